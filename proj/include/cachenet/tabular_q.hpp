#pragma once

// Exact tabular Q-learning for small discrete problems, with value iteration
// and policy evaluation as model-based references.

#include <algorithm>
#include <bit>
#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "cachenet/core.hpp"
#include "cachenet/policies.hpp"

namespace cachenet {

/// Dense (state, action) -> value table, zero-initialized.
class QTable {
 public:
  QTable(std::size_t states, std::size_t actions)
      : states_(states), actions_(actions), q_(states * actions, 0.0) {
    detail::require(states >= 1 && actions >= 1, "QTable needs at least one state and action");
  }

  std::size_t states() const { return states_; }
  std::size_t actions() const { return actions_; }

  double& at(std::size_t s, std::size_t a) {
    check(s, a);
    return q_[s * actions_ + a];
  }
  double at(std::size_t s, std::size_t a) const {
    check(s, a);
    return q_[s * actions_ + a];
  }

  std::span<const double> row(std::size_t s) const {
    check(s, 0);
    return std::span<const double>(q_).subspan(s * actions_, actions_);
  }

  double min_value(std::size_t s) const {
    auto r = row(s);
    return *std::min_element(r.begin(), r.end());
  }

  /// argmin over actions, ties to the lowest action id.
  std::size_t greedy(std::size_t s) const {
    auto r = row(s);
    return static_cast<std::size_t>(std::min_element(r.begin(), r.end()) - r.begin());
  }

  double sup_distance(const QTable& other) const {
    detail::require(states_ == other.states_ && actions_ == other.actions_, "QTable shape mismatch");
    double d = 0.0;
    for (std::size_t i = 0; i < q_.size(); ++i) d = std::max(d, std::fabs(q_[i] - other.q_[i]));
    return d;
  }

  const std::vector<double>& values() const { return q_; }

 private:
  void check(std::size_t s, std::size_t a) const {
    if (s >= states_ || a >= actions_) throw InvalidInput("QTable: unknown state or action id");
  }

  std::size_t states_;
  std::size_t actions_;
  std::vector<double> q_;
};

struct ExplorationSchedule {
  enum class Mode { constant, glie };
  Mode mode = Mode::constant;
  double epsilon0 = 0.4;

  /// Exploration probability at step tau >= 1.
  double at(std::size_t tau) const {
    if (mode == Mode::glie) return 1.0 / static_cast<double>(std::max<std::size_t>(tau, 1));
    return epsilon0;
  }
};

/// argmin w.p. 1 - eps, uniform random action otherwise. Always consumes one
/// uniform draw, plus one more when exploring.
inline std::size_t epsilon_greedy(std::span<const double> qrow, double eps, SeededRng& rng) {
  detail::require(!qrow.empty(), "epsilon_greedy: empty action row");
  detail::require(eps >= 0.0 && eps <= 1.0, "epsilon must lie in [0,1]");
  if (rng.uniform01() < eps) return static_cast<std::size_t>(rng.uniform_index(qrow.size()));
  return static_cast<std::size_t>(std::min_element(qrow.begin(), qrow.end()) - qrow.begin());
}

/// Q(s,a) <- (1 - beta) Q(s,a) + beta (cost + gamma min_a' Q(s', a')).
inline QTable& q_update(QTable& table, std::size_t s, std::size_t a, double cost, std::size_t s_next,
                        double beta, double gamma) {
  detail::require(beta > 0.0 && beta <= 1.0, "learning rate must lie in (0,1]");
  detail::require(gamma >= 0.0 && gamma < 1.0, "discount must lie in [0,1)");
  const double target = cost + gamma * table.min_value(s_next);
  double& q = table.at(s, a);
  q = (1.0 - beta) * q + beta * target;
  return table;
}

/// Explicit finite MDP. Used only by reference solvers and tests; learners
/// see nothing but sampled transitions.
struct TinyMdpSpec {
  std::size_t states = 0;
  std::size_t actions = 0;
  std::vector<double> transition;  // [s][a][s']
  std::vector<double> cost;        // [s][a][s']
  double gamma = 0.8;

  double p(std::size_t s, std::size_t a, std::size_t s2) const { return transition[(s * actions + a) * states + s2]; }
  double c(std::size_t s, std::size_t a, std::size_t s2) const { return cost[(s * actions + a) * states + s2]; }

  double expected_cost(std::size_t s, std::size_t a) const {
    double e = 0.0;
    for (std::size_t s2 = 0; s2 < states; ++s2) e += p(s, a, s2) * c(s, a, s2);
    return e;
  }

  void validate() const {
    detail::require(states >= 1 && actions >= 1, "mdp needs states and actions");
    detail::require(transition.size() == states * actions * states, "mdp transition tensor has wrong size");
    detail::require(cost.size() == transition.size(), "mdp cost tensor has wrong size");
    detail::require(gamma >= 0.0 && gamma < 1.0, "mdp discount must lie in [0,1)");
    for (std::size_t s = 0; s < states; ++s) {
      for (std::size_t a = 0; a < actions; ++a) {
        double row = 0.0;
        for (std::size_t s2 = 0; s2 < states; ++s2) {
          detail::require(p(s, a, s2) >= 0.0, "mdp: negative transition probability");
          detail::require(std::isfinite(c(s, a, s2)), "mdp: non-finite cost");
          row += p(s, a, s2);
        }
        if (std::fabs(row - 1.0) > 1e-12) throw InvalidInput("mdp: transition row is not stochastic");
      }
    }
  }

  /// Samples s' ~ P[s][a][.].
  std::size_t sample_next(std::size_t s, std::size_t a, SeededRng& rng) const {
    double u = rng.uniform01();
    for (std::size_t s2 = 0; s2 + 1 < states; ++s2) {
      u -= p(s, a, s2);
      if (u < 0.0) return s2;
    }
    return states - 1;
  }
};

/// One application of the optimal Bellman operator to Q.
inline QTable bellman_backup(const TinyMdpSpec& mdp, const QTable& q) {
  QTable out(mdp.states, mdp.actions);
  for (std::size_t s = 0; s < mdp.states; ++s) {
    for (std::size_t a = 0; a < mdp.actions; ++a) {
      double v = mdp.expected_cost(s, a);
      for (std::size_t s2 = 0; s2 < mdp.states; ++s2) v += mdp.gamma * mdp.p(s, a, s2) * q.min_value(s2);
      out.at(s, a) = v;
    }
  }
  return out;
}

/// Iterates the Bellman operator until the sup-norm change drops below tol.
inline QTable value_iteration(const TinyMdpSpec& mdp, double tol) {
  mdp.validate();
  detail::require(tol > 0.0, "tolerance must be > 0");
  QTable q(mdp.states, mdp.actions);
  for (;;) {
    QTable next = bellman_backup(mdp, q);
    const double change = next.sup_distance(q);
    q = std::move(next);
    if (change < tol) return q;
  }
}

inline std::vector<std::size_t> greedy_policy(const QTable& q) {
  std::vector<std::size_t> pi(q.states());
  for (std::size_t s = 0; s < q.states(); ++s) pi[s] = q.greedy(s);
  return pi;
}

/// V_pi by fixed-point iteration of V <- c_pi + gamma P_pi V.
inline std::vector<double> policy_evaluation(const TinyMdpSpec& mdp, const std::vector<std::size_t>& policy,
                                             double tol) {
  mdp.validate();
  detail::require(tol > 0.0, "tolerance must be > 0");
  detail::require_same_length(policy.size(), mdp.states, "policy_evaluation policy");
  for (auto a : policy) detail::require(a < mdp.actions, "policy maps a state to an unknown action");
  std::vector<double> v(mdp.states, 0.0), next(mdp.states);
  for (;;) {
    double change = 0.0;
    for (std::size_t s = 0; s < mdp.states; ++s) {
      const std::size_t a = policy[s];
      double x = mdp.expected_cost(s, a);
      for (std::size_t s2 = 0; s2 < mdp.states; ++s2) x += mdp.gamma * mdp.p(s, a, s2) * v[s2];
      next[s] = x;
      change = std::max(change, std::fabs(x - v[s]));
    }
    v.swap(next);
    if (change < tol) return v;
  }
}

/// Model-free Q-learning on sampled transitions of mdp, starting in state 0,
/// with learning rate 1 / (1 + prior visits of (s,a)).
inline QTable q_learning(const TinyMdpSpec& mdp, std::size_t steps, const ExplorationSchedule& schedule,
                         SeededRng& rng) {
  mdp.validate();
  QTable q(mdp.states, mdp.actions);
  std::vector<std::size_t> visits(mdp.states * mdp.actions, 0);
  std::size_t s = 0;
  for (std::size_t tau = 1; tau <= steps; ++tau) {
    const std::size_t a = epsilon_greedy(q.row(s), schedule.at(tau), rng);
    const std::size_t s2 = mdp.sample_next(s, a, rng);
    auto& n = visits[s * mdp.actions + a];
    q_update(q, s, a, mdp.c(s, a, s2), s2, 1.0 / (1.0 + static_cast<double>(n)), mdp.gamma);
    ++n;
    s = s2;
  }
  return q;
}

/// Leaf policy backed by per-file tabular Q-learning. Each file's previous-slot
/// request count is bucketed into `levels` quantization levels; every file
/// shares one (level x {keep out, cache}) table. The M files with the largest
/// predicted saving Q(level, 0) - Q(level, 1) are cached.
class TabularQLeafPolicy final : public CachePolicy {
 public:
  struct Params {
    std::size_t levels = 4;
    double epsilon = 0.1;
    double learning_rate = 0.1;
    double gamma = 0.8;
  };

  TabularQLeafPolicy(std::size_t files, std::size_t budget, Params params, SeededRng rng)
      : CachePolicy(files, budget), params_(params), table_(params.levels, 2), rng_(std::move(rng)) {
    detail::require(params.levels >= 1, "quantization levels must be >= 1");
  }

  std::string name() const override { return "tabular_q"; }

  /// Bucket index: 0 for no requests, then one level per doubling.
  std::size_t level(double count) const {
    const auto c = static_cast<std::uint64_t>(std::max(0.0, std::floor(count)));
    return std::min<std::size_t>(params_.levels - 1, static_cast<std::size_t>(std::bit_width(c)));
  }

  const CacheAction& act(const StateVector& s) override {
    if (rng_.uniform01() < params_.epsilon) {
      placement_ = random_action(files(), budget(), rng_);
    } else {
      placement_ = evaluate(s);
    }
    return placement_;
  }

  CacheAction evaluate(const StateVector& s) const override {
    StateVector saving(s.size());
    for (std::size_t f = 0; f < s.size(); ++f) {
      const auto l = level(s[f]);
      saving[f] = table_.at(l, 0) - table_.at(l, 1);
    }
    return top_m_action(saving, budget());
  }

  void learn(const StateVector& prev, const CacheAction& taken, const CostVector& cost,
             const StateVector& next) override {
    for (std::size_t f = 0; f < prev.size(); ++f) {
      q_update(table_, level(prev[f]), taken[f], cost[f], level(next[f]), params_.learning_rate, params_.gamma);
    }
  }

  const QTable& table() const { return table_; }
  std::unique_ptr<CachePolicy> clone() const override { return std::make_unique<TabularQLeafPolicy>(*this); }

 private:
  Params params_;
  QTable table_;
  SeededRng rng_;
};

}  // namespace cachenet
