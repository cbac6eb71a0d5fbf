#pragma once

// Cost and state aggregation tying leaves to the parent: nodal fetch cost,
// slot averaging, weighted parent cost/state and the masked leaf report.

#include <cmath>
#include <vector>

#include "cachenet/core.hpp"

namespace cachenet {

/// Nonnegative per-leaf influence weights w_n.
class LeafWeights {
 public:
  explicit LeafWeights(std::vector<double> w) : w_(std::move(w)) {
    for (double x : w_) detail::require(x >= 0.0 && std::isfinite(x), "leaf weights must be finite and >= 0");
  }
  static LeafWeights uniform(std::size_t leaves) { return LeafWeights(std::vector<double>(leaves, 1.0)); }

  std::size_t size() const { return w_.size(); }
  double operator[](std::size_t n) const { return w_[n]; }
  const std::vector<double>& values() const { return w_; }

 private:
  std::vector<double> w_;
};

class DiscountFactor {
 public:
  explicit DiscountFactor(double g) : g_(g) {
    detail::require(g >= 0.0 && g < 1.0, "discount factor must lie in [0,1)");
  }
  double value() const { return g_; }
  operator double() const { return g_; }

 private:
  double g_;
};

/// c_f = r_f (1 - a0_f)(1 - an_f) + r_f (1 - an_f). The first summand is the
/// parent's cloud fetch, the second the leaf's fetch from the parent.
inline CostVector leaf_cost(const CacheAction& leaf, const CacheAction& parent, const RequestVector& r) {
  detail::require_same_length(leaf.size(), r.size(), "leaf_cost leaf action");
  detail::require_same_length(parent.size(), r.size(), "leaf_cost parent action");
  CostVector c(r.size());
  for (std::size_t f = 0; f < r.size(); ++f) {
    const auto rf = r[f];
    const std::int64_t leaf_miss = 1 - leaf[f];
    const std::int64_t parent_miss = 1 - parent[f];
    c[f] = static_cast<double>(rf * parent_miss * leaf_miss + rf * leaf_miss);
  }
  return c;
}

inline CostVector slot_average_cost(const std::vector<CostVector>& per_slot) {
  detail::require(!per_slot.empty(), "slot_average_cost: no slots");
  CostVector avg(per_slot.front().size());
  for (const auto& c : per_slot) {
    detail::require_same_length(c.size(), avg.size(), "slot_average_cost");
    for (std::size_t f = 0; f < c.size(); ++f) avg[f] += c[f];
  }
  const double t = static_cast<double>(per_slot.size());
  for (auto& x : avg) x /= t;
  return avg;
}

template <class Vec>
Vec weighted_sum(const LeafWeights& w, const std::vector<Vec>& parts, const char* what) {
  detail::require_same_length(w.size(), parts.size(), what);
  detail::require(!parts.empty(), "weighted sum over zero leaves");
  Vec out(parts.front().size());
  for (std::size_t n = 0; n < parts.size(); ++n) {
    detail::require_same_length(parts[n].size(), out.size(), what);
    for (std::size_t f = 0; f < out.size(); ++f) out[f] += w[n] * parts[n][f];
  }
  return out;
}

/// c0 = sum_n w_n cbar_n
inline CostVector parent_cost(const LeafWeights& w, const std::vector<CostVector>& leaf_costs) {
  return weighted_sum(w, leaf_costs, "parent_cost");
}

/// sbar with entries the leaf would cache zeroed out.
inline StateVector masked_leaf_report(const StateVector& s_bar, const CacheAction& leaf_action) {
  detail::require_same_length(s_bar.size(), leaf_action.size(), "masked_leaf_report");
  StateVector out(s_bar.size());
  for (std::size_t f = 0; f < s_bar.size(); ++f) out[f] = leaf_action.cached(f) ? 0.0 : s_bar[f];
  return out;
}

/// s0 = sum_n w_n report_n
inline StateVector parent_state(const LeafWeights& w, const std::vector<StateVector>& reports) {
  return weighted_sum(w, reports, "parent_state");
}

/// Cost saved relative to the empty-cache baseline on the same requests.
inline double reduced_cost(const CostVector& policy_cost, const CostVector& nocache_cost) {
  detail::require_same_length(policy_cost.size(), nocache_cost.size(), "reduced_cost");
  return nocache_cost.sum() - policy_cost.sum();
}

}  // namespace cachenet
