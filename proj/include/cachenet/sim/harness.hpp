#pragma once

// Two-timescale simulation: T leaf slots nested in each parent interval,
// seed-paired policy comparison, and the CSV artifacts.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cachenet/core.hpp"
#include "cachenet/cost.hpp"
#include "cachenet/demand.hpp"
#include "cachenet/dqn.hpp"
#include "cachenet/policies.hpp"
#include "cachenet/sim/config.hpp"
#include "cachenet/tabular_q.hpp"

namespace cachenet {

struct MetricsRow {
  std::size_t tau = 0;
  std::string policy;
  double total_cost = 0.0;
  double reduced_cost = 0.0;
};

/// ||theta - theta_tar|| just before (pre_sync) and after the interval's sync.
struct ThetaPoint {
  std::size_t step = 0;
  double distance = 0.0;
  double pre_sync = 0.0;
};

struct CdfPoint {
  double reduced_cost = 0.0;
  double cum_prob = 0.0;
};

struct MetricsLog {
  std::vector<MetricsRow> rows;
  std::vector<ThetaPoint> theta;
  std::map<std::string, std::vector<CdfPoint>> cdf;

  /// tau-major, policy-name minor.
  void sort_rows() {
    std::stable_sort(rows.begin(), rows.end(), [](const MetricsRow& a, const MetricsRow& b) {
      return a.tau != b.tau ? a.tau < b.tau : a.policy < b.policy;
    });
  }

  std::vector<MetricsRow> rows_for(const std::string& policy) const {
    std::vector<MetricsRow> out;
    for (const auto& r : rows)
      if (r.policy == policy) out.push_back(r);
    return out;
  }
};

/// Empirical CDF: sorted samples with cumulative probability i/n.
inline std::vector<CdfPoint> empirical_cdf(std::vector<double> samples) {
  std::sort(samples.begin(), samples.end());
  std::vector<CdfPoint> out;
  const double n = static_cast<double>(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    out.push_back({samples[i], i + 1 == samples.size() ? 1.0 : static_cast<double>(i + 1) / n});
  }
  return out;
}

/// Everything logged about one interval, for replaying the accounting.
struct IntervalAudit {
  std::size_t tau = 0;
  std::vector<std::vector<RequestVector>> requests;  // [slot][leaf]
  std::vector<std::vector<RequestVector>> unserved;  // leaf misses [slot][leaf]
  std::vector<std::vector<CacheAction>> leaf_actions;  // placement at slot start [slot][leaf]
  std::vector<StateVector> reports;
  std::vector<CostVector> leaf_costs;  // slot-averaged, per leaf
  Experience experience;
  double nocache_total = 0.0;
};

/// A placement change observed by the harness. node is -1 for the parent.
struct PlacementEvent {
  std::size_t tau = 0;
  std::size_t slot = 0;
  long node = 0;
  bool mid_slot = false;
  std::string policy;
};

inline std::unique_ptr<CachePolicy> make_cache_policy(const std::string& name, std::size_t files, std::size_t budget,
                                                      const SimConfig& cfg, SeededRng rng) {
  if (name == "lru") return std::make_unique<LruPolicy>(files, budget);
  if (name == "lfu") return std::make_unique<LfuPolicy>(files, budget);
  if (name == "fifo") return std::make_unique<FifoPolicy>(files, budget);
  if (name == "rr") return std::make_unique<RandomReplacementPolicy>(files, budget, std::move(rng));
  if (name == "window_pop") return std::make_unique<WindowPopularityPolicy>(files, budget);
  if (name == "nocache") return std::make_unique<NoCachePolicy>(files);
  if (name == "tabular_q") {
    TabularQLeafPolicy::Params p{cfg.q_levels, cfg.q_epsilon, cfg.q_learning_rate, cfg.gamma};
    return std::make_unique<TabularQLeafPolicy>(files, budget, p, std::move(rng));
  }
  throw ConfigError("policy", "'" + name + "' is not a cache replacement policy");
}

inline AgentConfig agent_config(const SimConfig& cfg) {
  AgentConfig a;
  a.gamma = cfg.gamma;
  a.learning_rate = cfg.learning_rate;
  a.exploration = {cfg.exploration == "glie" ? ExplorationSchedule::Mode::glie : ExplorationSchedule::Mode::constant,
                   cfg.epsilon};
  a.target_sync = cfg.target_sync;
  a.batch = cfg.batch;
  a.replay = cfg.replay;
  a.budget = cfg.parent_capacity;
  a.hidden = cfg.hidden;
  return a;
}

/// One simulated hierarchy under one parent policy.
class World {
 public:
  World(SimConfig cfg, std::string parent)
      : cfg_(validated(std::move(cfg))), parent_name_(std::move(parent)), master_(cfg_.seed),
        weights_(leaf_weights(cfg_)) {
    if (!is_known_policy(parent_name_)) throw ConfigError("parent_policy", "unknown policy '" + parent_name_ + "'");
    const std::size_t F = cfg_.files;

    std::shared_ptr<const RequestTrace> trace;
    if (cfg_.demand == "trace") {
      try {
        trace = std::make_shared<const RequestTrace>(RequestTrace::load(cfg_.trace, F));
      } catch (const InvalidInput& e) {
        throw ConfigError("trace", e.what());
      }
    }
    std::optional<StaticPopularity> pop;
    if (cfg_.demand == "static") {
      SeededRng pop_rng = rng_substream(master_, {8, 0});
      pop = random_popularity(F, cfg_.intensity, pop_rng);
    }

    for (std::size_t n = 0; n < cfg_.leaves; ++n) {
      SeededRng demand_rng = rng_substream(master_, {1, n});
      if (pop) {
        demand_.emplace_back(*pop, demand_rng);
      } else if (trace) {
        demand_.emplace_back(trace);
      } else {
        SeededRng init_rng = rng_substream(master_, {9, n});
        MarkovDemand d;
        d.current = RequestVector(F);
        d.mean.assign(F, cfg_.noise_mean);
        d.stddev.assign(F, cfg_.noise_std);
        d.r_max = cfg_.r_max;
        for (std::size_t f = 0; f < F; ++f) {
          d.current[f] = static_cast<std::int64_t>(init_rng.uniform_index(static_cast<std::uint64_t>(cfg_.r_init) + 1));
          if (cfg_.noise_mean_spread > 0.0) d.mean[f] += init_rng.uniform(-cfg_.noise_mean_spread, cfg_.noise_mean_spread);
        }
        demand_.emplace_back(std::move(d), demand_rng);
      }
      order_rng_.push_back(rng_substream(master_, {2, n}));
      leaves_.push_back(make_cache_policy(cfg_.leaf_policy, F, cfg_.leaf_budget(n), cfg_, rng_substream(master_, {3, n})));
      leaf_state_.emplace_back(F);
    }

    if (parent_name_ == "dqn" || parent_name_ == "hyper_dqn") {
      HyperPartition part = parent_name_ == "dqn" ? HyperPartition::even(F, 1)
                                                  : HyperPartition(cfg_.group_widths(cfg_.groups));
      agent_.emplace(std::move(part), agent_config(cfg_), master_);
    } else if (parent_name_ != "optimal") {
      parent_ = make_cache_policy(parent_name_, F, cfg_.parent_capacity, cfg_, rng_substream(master_, {4, 0}));
    }
    s0_ = StateVector(F);
  }

  static SimConfig validated(SimConfig cfg) {
    cfg.validate();
    return cfg;
  }

  static LeafWeights leaf_weights(const SimConfig& cfg) {
    std::vector<double> w(cfg.leaves);
    for (std::size_t n = 0; n < cfg.leaves; ++n) w[n] = cfg.weight(n);
    return LeafWeights(std::move(w));
  }

  const SimConfig& config() const { return cfg_; }
  const std::string& policy_name() const { return parent_name_; }
  std::size_t tau() const { return tau_; }
  const StateVector& parent_state() const { return s0_; }
  const LeafWeights& weights() const { return weights_; }
  const HyperDqnAgent* agent() const { return agent_ ? &*agent_ : nullptr; }
  HyperDqnAgent* agent() { return agent_ ? &*agent_ : nullptr; }
  const CachePolicy& leaf(std::size_t n) const { return *leaves_.at(n); }
  const std::vector<ThetaPoint>& theta_trace() const { return theta_; }

  bool parent_per_request() const { return parent_ && parent_->per_request(); }

  /// Greedy parent choice at the current state (learning agents only).
  CacheAction exploit_action() const {
    detail::require(agent_.has_value(), "exploit_action needs a learning parent");
    return agent_->exploit_action(s0_);
  }

  void record_audit(bool on) { audit_on_ = on; }
  const IntervalAudit& last_audit() const { return audit_; }
  std::function<void(const PlacementEvent&)> on_placement_change;

  /// Runs interval tau() + 1. force_exploit sets epsilon to 0 for this interval.
  MetricsRow run_interval(bool force_exploit = false) {
    const std::size_t tau = tau_ + 1;
    const std::size_t T = cfg_.slots, N = cfg_.leaves, F = cfg_.files;
    const bool parent_stream = parent_per_request();
    const bool shuffled = cfg_.request_order == "shuffled";

    std::vector<std::vector<RequestVector>> req(T, std::vector<RequestVector>(N));
    std::vector<std::vector<RequestVector>> miss(T, std::vector<RequestVector>(N));
    std::vector<std::vector<CacheAction>> leaf_act(T);
    std::vector<std::vector<std::vector<FileId>>> stream(parent_stream ? T : 0, std::vector<std::vector<FileId>>(N));

    // Leaves first: their behaviour never depends on the parent.
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t n = 0; n < N; ++n) {
        CachePolicy& leaf = *leaves_[n];
        const CacheAction before = leaf.current_placement();
        leaf.act(leaf_state_[n]);
        const CacheAction start = leaf.current_placement();
        if (on_placement_change && !(start == before)) emit(tau, t + 1, static_cast<long>(n), false, leaf.name());
        leaf_act[t].push_back(start);

        RequestVector r = demand_[n].next();
        RequestVector m(F);
        if (leaf.per_request() || parent_stream) {
          auto units = expand(r);
          if (shuffled) order_rng_[n].shuffle(units);
          for (FileId f : units) {
            if (leaf.on_request(f)) continue;
            ++m[f];
            if (parent_stream) stream[t][n].push_back(f);
          }
          if (on_placement_change && !(leaf.current_placement() == start))
            emit(tau, t + 1, static_cast<long>(n), true, leaf.name());
        } else {
          for (std::size_t f = 0; f < F; ++f) m[f] = start.cached(f) ? 0 : r[f];
        }
        CostVector own(F);
        for (std::size_t f = 0; f < F; ++f) own[f] = static_cast<double>(m[f]);
        StateVector now = to_state(r);
        leaf.learn(leaf_state_[n], start, own, now);
        leaf_state_[n] = std::move(now);
        req[t][n] = std::move(r);
        miss[t][n] = std::move(m);
      }
    }

    // Parent decision for this interval.
    const StateVector s_prev = s0_;
    CacheAction a0 = CacheAction::empty(F, cfg_.parent_capacity);
    if (agent_) {
      a0 = agent_->act(s0_, tau, force_exploit);
    } else if (!parent_) {
      StateVector future(F);
      for (std::size_t t = 0; t < T; ++t)
        for (std::size_t n = 0; n < N; ++n)
          for (std::size_t f = 0; f < F; ++f)
            future[f] += weights_[n] * static_cast<double>(miss[t][n][f]) / static_cast<double>(T);
      a0 = noncausal_optimal_act(future, cfg_.parent_capacity);
    } else {
      const CacheAction before = parent_->current_placement();
      a0 = parent_->act(s0_);
      if (on_placement_change && !(a0 == before)) emit(tau, 1, -1, false, parent_->name());
    }

    // Costs.
    std::vector<std::vector<CostVector>> slot_cost(N, std::vector<CostVector>(T));
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t n = 0; n < N; ++n) {
        const auto& m = miss[t][n];
        CostVector c(F);
        if (parent_stream) {
          const CacheAction before = parent_->current_placement();
          for (std::size_t f = 0; f < F; ++f) c[f] = static_cast<double>(m[f]);
          for (FileId f : stream[t][n])
            if (!parent_->on_request(f)) c[f] += 1.0;
          if (on_placement_change && !(parent_->current_placement() == before))
            emit(tau, t + 1, -1, true, parent_->name());
        } else if (!leaves_[n]->per_request()) {
          c = leaf_cost(leaf_act[t][n], a0, req[t][n]);
        } else {
          for (std::size_t f = 0; f < F; ++f)
            c[f] = static_cast<double>(m[f] * (1 - a0[f]) + m[f]);
        }
        slot_cost[n][t] = std::move(c);
      }
    }

    std::vector<CostVector> cbar;
    std::vector<StateVector> reports;
    double nocache_total = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
      cbar.push_back(slot_average_cost(slot_cost[n]));
      StateVector sbar(F);
      std::int64_t requested = 0;
      for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t f = 0; f < F; ++f) {
          sbar[f] += static_cast<double>(req[t][n][f]);
          requested += req[t][n][f];
        }
      }
      for (auto& x : sbar) x /= static_cast<double>(T);
      reports.push_back(masked_leaf_report(sbar, leaves_[n]->evaluate(sbar)));
      nocache_total += weights_[n] * 2.0 * static_cast<double>(requested) / static_cast<double>(T);
    }
    StateVector s_next = cachenet::parent_state(weights_, reports);
    CostVector c0 = parent_cost(weights_, cbar);

    Experience e{s_prev, a0, c0, s_next};
    if (agent_) {
      agent_->remember(e);
      agent_->train();
      const double pre = agent_->target_distance();
      agent_->sync(tau);
      theta_.push_back({tau, agent_->target_distance(), pre});
    } else if (parent_) {
      parent_->learn(s_prev, a0, c0, s_next);
    }

    if (audit_on_) {
      audit_ = IntervalAudit{tau, std::move(req), std::move(miss), std::move(leaf_act), reports, cbar, e, nocache_total};
    }

    s0_ = std::move(s_next);
    tau_ = tau;
    const double total = c0.sum();
    return MetricsRow{tau, parent_name_, total, nocache_total - total};
  }

 private:
  static std::vector<FileId> expand(const RequestVector& r) {
    std::vector<FileId> units;
    for (std::size_t f = 0; f < r.size(); ++f)
      for (std::int64_t k = 0; k < r[f]; ++k) units.push_back(f);
    return units;
  }

  void emit(std::size_t tau, std::size_t slot, long node, bool mid, const std::string& name) {
    on_placement_change(PlacementEvent{tau, slot, node, mid, name});
  }

  SimConfig cfg_;
  std::string parent_name_;
  SeededRng master_;
  LeafWeights weights_;
  std::vector<DemandSource> demand_;
  std::vector<SeededRng> order_rng_;
  std::vector<std::unique_ptr<CachePolicy>> leaves_;
  std::vector<StateVector> leaf_state_;
  std::unique_ptr<CachePolicy> parent_;
  std::optional<HyperDqnAgent> agent_;
  StateVector s0_;
  std::size_t tau_ = 0;
  std::vector<ThetaPoint> theta_;
  bool audit_on_ = false;
  IntervalAudit audit_;
};

/// The intervals (1-based) at which CDF samples are taken; empty when disabled.
inline std::vector<std::size_t> cdf_intervals(const SimConfig& cfg) {
  if (cfg.cdf_samples == 0) return {};
  SeededRng rng = rng_substream(SeededRng(cfg.seed), {7, 0});
  std::vector<std::size_t> all(cfg.horizon);
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i + 1;
  // partial Fisher-Yates
  for (std::size_t i = 0; i < cfg.cdf_samples; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.uniform_index(all.size() - i));
    std::swap(all[i], all[j]);
  }
  all.resize(cfg.cdf_samples);
  std::sort(all.begin(), all.end());
  return all;
}

/// One full run of cfg under a single parent policy.
inline MetricsLog run_policy(const SimConfig& cfg, const std::string& policy) {
  World world(cfg, policy);
  const auto samples = cdf_intervals(cfg);
  std::vector<double> cdf_values;
  MetricsLog log;
  for (std::size_t tau = 1; tau <= cfg.horizon; ++tau) {
    const bool sample = std::binary_search(samples.begin(), samples.end(), tau);
    auto row = world.run_interval(sample);
    if (sample) cdf_values.push_back(row.reduced_cost);
    log.rows.push_back(std::move(row));
  }
  if (cfg.theta_trace) log.theta = world.theta_trace();
  if (!samples.empty()) log.cdf[policy] = empirical_cdf(std::move(cdf_values));
  return log;
}

/// Runs cfg's parent policy.
inline MetricsLog run_experiment(const SimConfig& cfg) {
  cfg.validate();
  auto log = run_policy(cfg, cfg.parent_policy);
  log.sort_rows();
  return log;
}

/// Every policy on the identical demand realization. Independent runs may
/// execute concurrently; results are merged in policy-name order.
inline MetricsLog compare_policies(const SimConfig& cfg, std::vector<std::string> policies, bool parallel = false) {
  cfg.validate();
  if (policies.size() < 2) throw ConfigError("policies", "compare needs at least two policies");
  for (const auto& p : policies)
    if (!is_known_policy(p)) throw ConfigError("policies", "unknown policy '" + p + "'");
  std::sort(policies.begin(), policies.end());
  policies.erase(std::unique(policies.begin(), policies.end()), policies.end());

  std::vector<MetricsLog> parts(policies.size());
  if (parallel) {
    std::vector<std::future<MetricsLog>> jobs;
    for (const auto& p : policies) jobs.push_back(std::async(std::launch::async, run_policy, std::cref(cfg), p));
    for (std::size_t i = 0; i < jobs.size(); ++i) parts[i] = jobs[i].get();
  } else {
    for (std::size_t i = 0; i < policies.size(); ++i) parts[i] = run_policy(cfg, policies[i]);
  }

  MetricsLog log;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    log.rows.insert(log.rows.end(), parts[i].rows.begin(), parts[i].rows.end());
    if (log.theta.empty()) log.theta = parts[i].theta;
    for (auto& [k, v] : parts[i].cdf) log.cdf[k] = std::move(v);
  }
  log.sort_rows();
  return log;
}

namespace detail {

inline std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path, "cannot open output file");
  return out;
}

inline void finish_output(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) throw IoError(path, "write failed");
}

}  // namespace detail

inline void emit_metrics_csv(const MetricsLog& log, const std::string& path) {
  auto out = detail::open_output(path);
  out << "tau,policy,total_cost,reduced_cost\n";
  for (const auto& r : log.rows) {
    out << r.tau << ',' << r.policy << ',' << detail::format_double(r.total_cost) << ','
        << detail::format_double(r.reduced_cost) << '\n';
  }
  detail::finish_output(out, path);
}

/// Post-sync distance per interval.
inline void emit_theta_csv(const std::vector<ThetaPoint>& trace, const std::string& path) {
  auto out = detail::open_output(path);
  out << "step,distance\n";
  for (const auto& p : trace) out << p.step << ',' << detail::format_double(p.distance) << '\n';
  detail::finish_output(out, path);
}

inline void emit_cdf_csv(const std::vector<CdfPoint>& cdf, const std::string& path) {
  auto out = detail::open_output(path);
  out << "reduced_cost,cum_prob\n";
  for (const auto& p : cdf)
    out << detail::format_double(p.reduced_cost) << ',' << detail::format_double(p.cum_prob) << '\n';
  detail::finish_output(out, path);
}

/// Writes metrics.csv, theta.csv (when traced) and cdf_<policy>.csv into dir.
inline std::vector<std::string> emit_csv(const MetricsLog& log, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError(dir, "cannot create output directory: " + ec.message());
  std::vector<std::string> written;
  const auto base = std::filesystem::path(dir);
  written.push_back((base / "metrics.csv").string());
  emit_metrics_csv(log, written.back());
  if (!log.theta.empty()) {
    written.push_back((base / "theta.csv").string());
    emit_theta_csv(log.theta, written.back());
  }
  for (const auto& [policy, cdf] : log.cdf) {
    written.push_back((base / ("cdf_" + policy + ".csv")).string());
    emit_cdf_csv(cdf, written.back());
  }
  return written;
}

/// Reads a metrics CSV back (round-trip helper).
inline std::vector<MetricsRow> read_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open metrics file");
  std::string line;
  if (!std::getline(in, line) || line != "tau,policy,total_cost,reduced_cost") throw IoError(path, "bad metrics header");
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cols.push_back(cell);
    if (cols.size() != 4) throw IoError(path, "malformed metrics row");
    rows.push_back({std::stoull(cols[0]), cols[1], std::stod(cols[2]), std::stod(cols[3])});
  }
  return rows;
}

}  // namespace cachenet
