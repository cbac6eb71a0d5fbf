#pragma once

// Parent-node deep Q caching agent: masked temporal-difference targets from a
// periodically synced target network, uniform experience replay, epsilon-greedy
// top-M action selection, and the hyper partition into K independent group
// networks whose outputs are concatenated before a global top-M.

#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <span>
#include <vector>

#include "cachenet/core.hpp"
#include "cachenet/cost.hpp"
#include "cachenet/neural.hpp"
#include "cachenet/tabular_q.hpp"

namespace cachenet {

/// (s(tau-1), a(tau), c(tau), s(tau))
struct Experience {
  StateVector s_prev;
  CacheAction action;
  CostVector cost;
  StateVector s_next;

  std::size_t width() const { return s_prev.size(); }

  void validate() const {
    detail::require_same_length(action.size(), s_prev.size(), "experience action");
    detail::require_same_length(cost.size(), s_prev.size(), "experience cost");
    detail::require_same_length(s_next.size(), s_prev.size(), "experience next state");
  }

  /// Files [begin, begin + width) re-indexed from zero.
  Experience slice(std::size_t begin, std::size_t width) const {
    auto cut = [&](const auto& v) {
      using V = std::decay_t<decltype(v)>;
      return V(std::vector<typename V::value_type>(v.begin() + static_cast<std::ptrdiff_t>(begin),
                                                   v.begin() + static_cast<std::ptrdiff_t>(begin + width)));
    };
    std::vector<std::uint8_t> bits(action.bits().begin() + static_cast<std::ptrdiff_t>(begin),
                                   action.bits().begin() + static_cast<std::ptrdiff_t>(begin + width));
    const auto held = static_cast<std::size_t>(std::accumulate(bits.begin(), bits.end(), std::size_t{0}));
    return Experience{cut(s_prev), CacheAction(std::move(bits), std::max(held, std::min(action.budget(), width))),
                      cut(cost), cut(s_next)};
  }
};

/// Ring of the R most recent experiences with uniform sampling (with replacement).
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    detail::require(capacity >= 1, "replay capacity must be >= 1");
    ring_.reserve(capacity);
  }

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return ring_.size(); }
  bool empty() const { return ring_.empty(); }
  std::size_t inserted() const { return inserted_; }

  void push(Experience e) {
    if (ring_.size() < capacity_) {
      ring_.push_back(std::move(e));
    } else {
      ring_[inserted_ % capacity_] = std::move(e);
    }
    ++inserted_;
  }

  /// Slot i in storage order (not insertion order once wrapped).
  const Experience& at(std::size_t i) const { return ring_.at(i); }

  std::size_t sample_index(SeededRng& rng) const {
    detail::require(!ring_.empty(), "cannot sample an empty replay buffer");
    return static_cast<std::size_t>(rng.uniform_index(ring_.size()));
  }

  std::vector<const Experience*> sample(std::size_t batch, SeededRng& rng) const {
    std::vector<const Experience*> out;
    out.reserve(batch);
    for (std::size_t i = 0; i < batch; ++i) out.push_back(&ring_[sample_index(rng)]);
    return out;
  }

 private:
  std::size_t capacity_;
  std::vector<Experience> ring_;
  std::size_t inserted_ = 0;
};

struct AgentConfig {
  double gamma = 0.8;
  double learning_rate = 0.01;
  ExplorationSchedule exploration{ExplorationSchedule::Mode::constant, 0.4};
  std::size_t target_sync = 10;
  std::size_t batch = 1;
  std::size_t replay = 10;
  std::size_t budget = 5;
  std::vector<std::size_t> hidden{50};

  void validate() const {
    DiscountFactor{gamma};
    detail::require(learning_rate > 0.0, "learning rate must be > 0");
    detail::require(exploration.epsilon0 >= 0.0 && exploration.epsilon0 <= 1.0, "epsilon must lie in [0,1]");
    detail::require(target_sync >= 1, "target sync period must be >= 1");
    detail::require(batch >= 1, "batch size must be >= 1");
    detail::require(replay >= 1, "replay capacity must be >= 1");
    detail::require(budget >= 1, "parent cache budget must be >= 1");
    for (auto h : hidden) detail::require(h >= 1, "hidden widths must be >= 1");
  }

  LayerSpec layers_for(std::size_t width) const {
    std::vector<std::size_t> sizes{width};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(width);
    return LayerSpec(std::move(sizes));
  }
};

/// Exploit (top-M of the network output) w.p. 1 - eps, else a uniform M-subset.
inline CacheAction select_action(const NetParams& theta, const StateVector& s, double eps, std::size_t budget,
                                 SeededRng& rng) {
  detail::require_same_length(s.size(), theta.spec().input_width(), "select_action state");
  detail::require(eps >= 0.0 && eps <= 1.0, "epsilon must lie in [0,1]");
  if (rng.uniform01() < eps) return random_action(s.size(), budget, rng);
  const auto o = forward(theta, s);
  return top_m_action(std::span<const double>(o), budget);
}

/// [c + gamma Q(s_next; theta_tar) - Q(s_prev; theta)] masked to uncached files.
inline std::vector<double> td_error(const NetParams& theta, const NetParams& theta_tar, const Experience& e,
                                    double gamma) {
  e.validate();
  detail::require(theta.spec() == theta_tar.spec(), "td_error: online and target shapes differ");
  detail::require_same_length(e.width(), theta.spec().input_width(), "td_error experience");
  const auto predicted = forward(theta, e.s_prev);
  const auto bootstrap = forward(theta_tar, e.s_next);
  std::vector<double> delta(e.width(), 0.0);
  for (std::size_t f = 0; f < delta.size(); ++f) {
    if (e.action.cached(f)) continue;
    delta[f] = e.cost[f] + gamma * bootstrap[f] - predicted[f];
  }
  return delta;
}

/// Sample mean of squared masked TD norms.
inline double batch_loss(const NetParams& theta, const NetParams& theta_tar, std::span<const Experience* const> batch,
                         double gamma) {
  detail::require(!batch.empty(), "batch_loss: empty batch");
  double total = 0.0;
  for (const Experience* e : batch) {
    for (double d : td_error(theta, theta_tar, *e, gamma)) total += d * d;
  }
  return total / static_cast<double>(batch.size());
}

/// Semi-gradient of batch_loss in theta; the target network is held constant.
inline NetParams batch_loss_gradient(const NetParams& theta, const NetParams& theta_tar,
                                     std::span<const Experience* const> batch, double gamma) {
  detail::require(!batch.empty(), "batch_loss_gradient: empty batch");
  NetParams grad(theta.spec());
  const double scale = -2.0 / static_cast<double>(batch.size());
  for (const Experience* e : batch) {
    auto seed = td_error(theta, theta_tar, *e, gamma);
    bool any = false;
    for (auto& d : seed) {
      any = any || d != 0.0;
      d *= scale;
    }
    if (!any) continue;
    add_scaled(grad, backward(theta, e->s_prev.span(), seed), 1.0);
  }
  return grad;
}

/// Online and target networks with their replay memory.
struct DqnLearner {
  NetParams online;
  NetParams target;
  ReplayBuffer replay;
  AgentConfig config;
  std::size_t train_steps = 0;

  DqnLearner(NetParams init, AgentConfig cfg)
      : online(init), target(std::move(init)), replay(cfg.replay), config(std::move(cfg)) {}

  double target_distance() const { return param_distance(online, target); }
};

/// One SGD step on a uniformly sampled batch. Returns false (and leaves the
/// learner untouched) when the replay memory is empty.
inline bool train_step(DqnLearner& learner, SeededRng& rng) {
  if (learner.replay.empty()) return false;
  const auto batch = learner.replay.sample(learner.config.batch, rng);
  const auto grad = batch_loss_gradient(learner.online, learner.target, batch, learner.config.gamma);
  add_scaled(learner.online, grad, -learner.config.learning_rate);
  ++learner.train_steps;
  return true;
}

/// theta_tar <- theta when tau is a multiple of the sync period.
inline bool sync_target(DqnLearner& learner, std::size_t tau) {
  detail::require(tau >= 1, "sync_target: tau must be >= 1");
  if (tau % learner.config.target_sync != 0) return false;
  learner.target = learner.online;
  return true;
}

/// Contiguous file groups [0, F_1), [F_1, F_1 + F_2), ...
class HyperPartition {
 public:
  explicit HyperPartition(std::vector<std::size_t> widths) : widths_(std::move(widths)) {
    detail::require(!widths_.empty(), "partition needs at least one group");
    std::size_t off = 0;
    for (auto w : widths_) {
      detail::require(w >= 1, "group widths must be >= 1");
      offsets_.push_back(off);
      off += w;
    }
    total_ = off;
  }

  /// K groups of near-equal width (the first F mod K groups one larger).
  static HyperPartition even(std::size_t files, std::size_t groups) {
    detail::require(groups >= 1 && groups <= files, "group count must lie in [1, F]");
    std::vector<std::size_t> w(groups, files / groups);
    for (std::size_t k = 0; k < files % groups; ++k) ++w[k];
    return HyperPartition(std::move(w));
  }

  std::size_t groups() const { return widths_.size(); }
  std::size_t files() const { return total_; }
  std::size_t width(std::size_t k) const { return widths_[k]; }
  std::size_t offset(std::size_t k) const { return offsets_[k]; }
  const std::vector<std::size_t>& widths() const { return widths_; }

  StateVector slice(const StateVector& s, std::size_t k) const {
    return StateVector(std::vector<double>(s.begin() + static_cast<std::ptrdiff_t>(offsets_[k]),
                                           s.begin() + static_cast<std::ptrdiff_t>(offsets_[k] + widths_[k])));
  }

 private:
  std::vector<std::size_t> widths_;
  std::vector<std::size_t> offsets_;
  std::size_t total_ = 0;
};

/// Per-group forward passes concatenated in group order.
inline std::vector<double> hyper_forward(const HyperPartition& h, std::span<const NetParams> thetas,
                                         const StateVector& s) {
  detail::require_same_length(thetas.size(), h.groups(), "hyper_forward group count");
  detail::require_same_length(s.size(), h.files(), "hyper_forward state");
  std::vector<double> out;
  out.reserve(h.files());
  for (std::size_t k = 0; k < h.groups(); ++k) {
    detail::require_same_length(thetas[k].spec().input_width(), h.width(k), "hyper_forward group width");
    const auto o = forward(thetas[k], h.slice(s, k));
    out.insert(out.end(), o.begin(), o.end());
  }
  return out;
}

inline CacheAction hyper_select_action(const HyperPartition& h, std::span<const NetParams> thetas,
                                       const StateVector& s, double eps, std::size_t budget, SeededRng& rng) {
  detail::require(eps >= 0.0 && eps <= 1.0, "epsilon must lie in [0,1]");
  detail::require_same_length(s.size(), h.files(), "hyper_select_action state");
  if (rng.uniform01() < eps) return random_action(s.size(), budget, rng);
  const auto o = hyper_forward(h, thetas, s);
  return top_m_action(std::span<const double>(o), budget);
}

/// The parent agent: one learner per partition group, a shared exploration
/// stream and one sampling stream per group.
class HyperDqnAgent {
 public:
  HyperDqnAgent(HyperPartition partition, AgentConfig config, const SeededRng& master)
      : partition_(std::move(partition)), config_(std::move(config)),
        explore_rng_(rng_substream(master, {40, 0})) {
    config_.validate();
    for (std::size_t k = 0; k < partition_.groups(); ++k) {
      SeededRng init_rng = rng_substream(master, {41, k});
      learners_.emplace_back(init_params(config_.layers_for(partition_.width(k)), init_rng), config_);
      train_rngs_.push_back(rng_substream(master, {42, k}));
    }
  }

  const HyperPartition& partition() const { return partition_; }
  const AgentConfig& config() const { return config_; }
  std::size_t groups() const { return learners_.size(); }
  const DqnLearner& learner(std::size_t k) const { return learners_[k]; }
  DqnLearner& learner(std::size_t k) { return learners_[k]; }

  std::vector<NetParams> online_params() const {
    std::vector<NetParams> out;
    for (const auto& l : learners_) out.push_back(l.online);
    return out;
  }

  std::vector<double> predict(const StateVector& s) const {
    const auto thetas = online_params();
    return hyper_forward(partition_, thetas, s);
  }

  CacheAction exploit_action(const StateVector& s) const {
    const auto o = predict(s);
    return top_m_action(std::span<const double>(o), config_.budget);
  }

  /// Epsilon-greedy decision for interval tau.
  CacheAction act(const StateVector& s, std::size_t tau, bool force_exploit = false) {
    const double eps = force_exploit ? 0.0 : config_.exploration.at(tau);
    const auto thetas = online_params();
    return hyper_select_action(partition_, thetas, s, eps, config_.budget, explore_rng_);
  }

  /// Stores the experience slice of every group.
  void remember(const Experience& e) {
    e.validate();
    detail::require_same_length(e.width(), partition_.files(), "agent experience");
    for (std::size_t k = 0; k < learners_.size(); ++k) {
      learners_[k].replay.push(e.slice(partition_.offset(k), partition_.width(k)));
    }
  }

  /// Independent train step in every group.
  void train() {
    for (std::size_t k = 0; k < learners_.size(); ++k) train_step(learners_[k], train_rngs_[k]);
  }

  void sync(std::size_t tau) {
    for (auto& l : learners_) sync_target(l, tau);
  }

  /// Euclidean distance over all groups' parameters.
  double target_distance() const {
    double s = 0.0;
    for (const auto& l : learners_) {
      const double d = l.target_distance();
      s += d * d;
    }
    return std::sqrt(s);
  }

  void save(std::ostream& out) const {
    detail::write_u64(out, learners_.size());
    for (const auto& l : learners_) save_params(out, l.online);
  }

  /// Restores online parameters (targets are set equal); replay is not restored.
  void load(std::istream& in) {
    const auto k = detail::read_u64(in);
    detail::require(k == learners_.size(), "checkpoint group count differs from the partition");
    for (auto& l : learners_) {
      auto p = load_params(in);
      detail::require(p.spec() == l.online.spec(), "checkpoint layer spec differs from the agent");
      l.online = p;
      l.target = std::move(p);
    }
  }

 private:
  HyperPartition partition_;
  AgentConfig config_;
  SeededRng explore_rng_;
  std::vector<DqnLearner> learners_;
  std::vector<SeededRng> train_rngs_;
};

}  // namespace cachenet
