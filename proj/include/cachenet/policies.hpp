#pragma once

// Cache policies usable at either tier. Per-request refreshers (LRU, LFU,
// FIFO, RR) update on every unit request; boundary policies (window
// popularity, the non-causal oracle, no-cache) only change at act().

#include <deque>
#include <memory>
#include <string>
#include <vector>

#include "cachenet/core.hpp"

namespace cachenet {

class CachePolicy {
 public:
  CachePolicy(std::size_t files, std::size_t budget)
      : placement_(CacheAction::lowest_ids(files, budget)) {}
  virtual ~CachePolicy() = default;

  virtual std::string name() const = 0;
  virtual bool per_request() const { return false; }

  /// Boundary decision from the latest observed state.
  virtual const CacheAction& act(const StateVector&) { return placement_; }

  /// The placement act() would produce at s, with no side effects.
  virtual CacheAction evaluate(const StateVector&) const { return placement_; }

  /// Serves one unit request. Returns true on a hit.
  virtual bool on_request(FileId f) { return placement_.cached(f); }

  /// Slot feedback for learning policies.
  virtual void learn(const StateVector& /*prev*/, const CacheAction& /*taken*/, const CostVector& /*cost*/,
                     const StateVector& /*next*/) {}

  const CacheAction& current_placement() const { return placement_; }
  std::size_t files() const { return placement_.size(); }
  std::size_t budget() const { return placement_.budget(); }

  virtual std::unique_ptr<CachePolicy> clone() const = 0;

 protected:
  CacheAction placement_;
};

class NoCachePolicy final : public CachePolicy {
 public:
  explicit NoCachePolicy(std::size_t files) : CachePolicy(files, 0) {}
  std::string name() const override { return "nocache"; }
  std::unique_ptr<CachePolicy> clone() const override { return std::make_unique<NoCachePolicy>(*this); }
};

/// Least recently used. Recency is an intrusive doubly linked list over file
/// ids so the policy stays trivially copyable.
class LruPolicy final : public CachePolicy {
 public:
  LruPolicy(std::size_t files, std::size_t budget)
      : CachePolicy(files, 0), prev_(files + 1, kNone), next_(files + 1, kNone), budget_(budget) {
    placement_ = CacheAction::empty(files, budget);
    prev_[sentinel()] = sentinel();
    next_[sentinel()] = sentinel();
    for (FileId f = 0; f < std::min(files, budget); ++f) insert(f);
  }

  std::string name() const override { return "lru"; }
  bool per_request() const override { return true; }

  bool on_request(FileId f) override {
    if (placement_.cached(f)) {
      unlink(f);
      push_back(f);
      return true;
    }
    if (placement_.count() >= std::min(budget_, files())) {
      if (budget_ == 0) return false;
      const FileId victim = next_[sentinel()];
      unlink(victim);
      placement_.set(victim, false);
    }
    insert(f);
    return false;
  }

  /// Files from least to most recently used.
  std::vector<FileId> recency_order() const {
    std::vector<FileId> out;
    for (FileId f = next_[sentinel()]; f != sentinel(); f = next_[f]) out.push_back(f);
    return out;
  }

  std::unique_ptr<CachePolicy> clone() const override { return std::make_unique<LruPolicy>(*this); }

 private:
  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::size_t sentinel() const { return prev_.size() - 1; }

  void insert(FileId f) {
    placement_.set(f, true);
    push_back(f);
  }
  void push_back(FileId f) {
    const std::size_t s = sentinel();
    const std::size_t last = prev_[s];
    next_[last] = f;
    prev_[f] = last;
    next_[f] = s;
    prev_[s] = f;
  }
  void unlink(FileId f) {
    next_[prev_[f]] = next_[f];
    prev_[next_[f]] = prev_[f];
    prev_[f] = next_[f] = kNone;
  }

  std::vector<std::size_t> prev_;
  std::vector<std::size_t> next_;
  std::size_t budget_;
};

/// Least frequently used with global counters that survive eviction. A
/// missing file is admitted only if its count exceeds the coldest resident's.
class LfuPolicy final : public CachePolicy {
 public:
  LfuPolicy(std::size_t files, std::size_t budget)
      : CachePolicy(files, budget), counts_(files, 0), residents_(placement_.cached_files()) {}

  std::string name() const override { return "lfu"; }
  bool per_request() const override { return true; }

  bool on_request(FileId f) override {
    ++counts_[f];
    if (placement_.cached(f)) return true;
    if (budget() == 0) return false;
    if (placement_.count() < std::min(budget(), files())) {
      placement_.set(f, true);
      residents_.push_back(f);
      return false;
    }
    // coldest resident, lowest id on ties
    std::size_t slot = 0;
    for (std::size_t i = 1; i < residents_.size(); ++i) {
      const FileId g = residents_[i], v = residents_[slot];
      if (counts_[g] < counts_[v] || (counts_[g] == counts_[v] && g < v)) slot = i;
    }
    const FileId victim = residents_[slot];
    if (counts_[f] > counts_[victim]) {
      placement_.set(victim, false);
      placement_.set(f, true);
      residents_[slot] = f;
    }
    return false;
  }

  std::uint64_t count(FileId f) const { return counts_[f]; }
  std::unique_ptr<CachePolicy> clone() const override { return std::make_unique<LfuPolicy>(*this); }

 private:
  std::vector<std::uint64_t> counts_;
  std::vector<FileId> residents_;
};

/// First in, first out. Hits do not reorder.
class FifoPolicy final : public CachePolicy {
 public:
  FifoPolicy(std::size_t files, std::size_t budget) : CachePolicy(files, budget) {
    for (FileId f = 0; f < std::min(files, budget); ++f) queue_.push_back(f);
  }

  std::string name() const override { return "fifo"; }
  bool per_request() const override { return true; }

  bool on_request(FileId f) override {
    if (placement_.cached(f)) return true;
    if (budget() == 0) return false;
    if (placement_.count() >= std::min(budget(), files())) {
      placement_.set(queue_.front(), false);
      queue_.pop_front();
    }
    placement_.set(f, true);
    queue_.push_back(f);
    return false;
  }

  std::unique_ptr<CachePolicy> clone() const override { return std::make_unique<FifoPolicy>(*this); }

 private:
  std::deque<FileId> queue_;
};

/// Random replacement: a miss at capacity evicts a uniformly chosen resident.
class RandomReplacementPolicy final : public CachePolicy {
 public:
  RandomReplacementPolicy(std::size_t files, std::size_t budget, SeededRng rng)
      : CachePolicy(files, budget), rng_(std::move(rng)) {
    residents_ = placement_.cached_files();
  }

  std::string name() const override { return "rr"; }
  bool per_request() const override { return true; }

  bool on_request(FileId f) override {
    if (placement_.cached(f)) return true;
    if (budget() == 0) return false;
    if (placement_.count() >= std::min(budget(), files())) {
      const auto i = static_cast<std::size_t>(rng_.uniform_index(residents_.size()));
      placement_.set(residents_[i], false);
      residents_[i] = f;
    } else {
      residents_.push_back(f);
    }
    placement_.set(f, true);
    return false;
  }

  std::unique_ptr<CachePolicy> clone() const override {
    return std::make_unique<RandomReplacementPolicy>(*this);
  }

 private:
  SeededRng rng_;
  std::vector<FileId> residents_;
};

/// Caches the M files with the largest observed demand in the last window.
class WindowPopularityPolicy final : public CachePolicy {
 public:
  WindowPopularityPolicy(std::size_t files, std::size_t budget) : CachePolicy(files, budget) {}

  std::string name() const override { return "window_pop"; }

  const CacheAction& act(const StateVector& s) override {
    placement_ = evaluate(s);
    return placement_;
  }
  CacheAction evaluate(const StateVector& s) const override { return top_m_action(s, budget()); }

  std::unique_ptr<CachePolicy> clone() const override {
    return std::make_unique<WindowPopularityPolicy>(*this);
  }
};

inline CacheAction windowed_popularity_act(const StateVector& s, std::size_t budget) {
  return top_m_action(s, budget);
}

/// Non-causal benchmark: given the realized weighted unserved demand of the
/// upcoming interval, cache its M largest entries.
inline CacheAction noncausal_optimal_act(const StateVector& future, std::size_t budget) {
  for (double x : future) detail::require(x >= 0.0, "future demand must be nonnegative");
  return top_m_action(future, budget);
}

}  // namespace cachenet
