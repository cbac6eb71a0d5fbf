#pragma once

// Shared vocabulary: per-file vectors, cache placements, seeded randomness and
// the top-M decision rule used by every policy.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cachenet {

using FileId = std::size_t;

/// Raised when an operation receives arguments outside its contract.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

inline void require(bool ok, const char* what) {
  if (!ok) throw InvalidInput(what);
}

inline void require_same_length(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw InvalidInput(std::string(what) + ": length mismatch (" + std::to_string(a) +
                       " vs " + std::to_string(b) + ")");
  }
}

}  // namespace detail

struct CatalogSpec {
  std::size_t files = 1;

  explicit CatalogSpec(std::size_t f) : files(f) {
    detail::require(f >= 1, "catalog must hold at least one file");
  }
};

/// Two-timescale clock: T fast slots nested in each slow interval.
class Clock {
 public:
  explicit Clock(std::size_t slots_per_interval) : slots_(slots_per_interval) {
    detail::require(slots_ >= 1, "slots per interval must be >= 1");
  }

  std::size_t interval() const { return interval_; }
  std::size_t slot() const { return slot_; }
  std::size_t slots_per_interval() const { return slots_; }

  void advance() {
    if (slot_ == slots_) {
      slot_ = 1;
      ++interval_;
    } else {
      ++slot_;
    }
  }

 private:
  std::size_t slots_;
  std::size_t interval_ = 1;
  std::size_t slot_ = 1;
};

/// Length-F vector tagged with its role so requests, states and costs do not mix.
template <class T, class Tag>
class PerFile {
 public:
  using value_type = T;

  PerFile() = default;
  explicit PerFile(std::size_t n, T fill = T{}) : v_(n, fill) {}
  PerFile(std::initializer_list<T> il) : v_(il) {}
  explicit PerFile(std::vector<T> v) : v_(std::move(v)) {}

  std::size_t size() const { return v_.size(); }
  bool empty() const { return v_.empty(); }
  T& operator[](std::size_t i) { return v_[i]; }
  const T& operator[](std::size_t i) const { return v_[i]; }
  auto begin() { return v_.begin(); }
  auto end() { return v_.end(); }
  auto begin() const { return v_.begin(); }
  auto end() const { return v_.end(); }

  const std::vector<T>& values() const { return v_; }
  std::vector<T>& values() { return v_; }
  std::span<const T> span() const { return v_; }

  T sum() const { return std::accumulate(v_.begin(), v_.end(), T{}); }

  friend bool operator==(const PerFile&, const PerFile&) = default;

 private:
  std::vector<T> v_;
};

struct RequestTag;
struct StateTag;
struct CostTag;

/// Per-file request counts observed in one fast slot.
using RequestVector = PerFile<std::int64_t, RequestTag>;
/// Per-file nonnegative demand summary.
using StateVector = PerFile<double, StateTag>;
/// Per-file serving cost.
using CostVector = PerFile<double, CostTag>;

inline StateVector to_state(const RequestVector& r) {
  StateVector s(r.size());
  for (std::size_t f = 0; f < r.size(); ++f) s[f] = static_cast<double>(r[f]);
  return s;
}

/// Binary placement vector with a capacity budget. A policy may hold fewer
/// files than its budget while filling up; it never holds more.
class CacheAction {
 public:
  CacheAction() = default;

  CacheAction(std::vector<std::uint8_t> bits, std::size_t budget)
      : bits_(std::move(bits)), budget_(budget) {
    std::size_t n = 0;
    for (auto b : bits_) {
      detail::require(b <= 1, "placement entries must be 0 or 1");
      n += b;
    }
    detail::require(n <= budget_, "placement exceeds capacity budget");
    count_ = n;
  }

  static CacheAction empty(std::size_t files, std::size_t budget) {
    return CacheAction(std::vector<std::uint8_t>(files, 0), budget);
  }

  /// Lowest-id files up to the budget.
  static CacheAction lowest_ids(std::size_t files, std::size_t budget) {
    std::vector<std::uint8_t> bits(files, 0);
    for (std::size_t f = 0; f < std::min(files, budget); ++f) bits[f] = 1;
    return CacheAction(std::move(bits), budget);
  }

  std::size_t size() const { return bits_.size(); }
  std::size_t budget() const { return budget_; }
  std::size_t count() const { return count_; }
  bool cached(FileId f) const { return bits_[f] != 0; }
  std::uint8_t operator[](FileId f) const { return bits_[f]; }
  const std::vector<std::uint8_t>& bits() const { return bits_; }

  /// True when exactly min(M, F) files are cached.
  bool full() const { return count_ == std::min(budget_, bits_.size()); }

  std::vector<FileId> cached_files() const {
    std::vector<FileId> out;
    out.reserve(count_);
    for (FileId f = 0; f < bits_.size(); ++f)
      if (bits_[f]) out.push_back(f);
    return out;
  }

  void set(FileId f, bool on) {
    if (static_cast<bool>(bits_[f]) == on) return;
    if (on) {
      detail::require(count_ < budget_, "placement exceeds capacity budget");
      ++count_;
    } else {
      --count_;
    }
    bits_[f] = on ? 1 : 0;
  }

  friend bool operator==(const CacheAction& a, const CacheAction& b) {
    return a.bits_ == b.bits_ && a.budget_ == b.budget_;
  }

 private:
  std::vector<std::uint8_t> bits_;
  std::size_t budget_ = 0;
  std::size_t count_ = 0;
};

// ---------------------------------------------------------------------------
// Randomness. Every distribution is implemented here rather than taken from
// <random> so draw sequences are identical across standard libraries.

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t mix64(std::uint64_t x) {
  std::uint64_t s = x;
  return splitmix64(s);
}

inline std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace detail

/// xoshiro256** seeded through SplitMix64. Satisfies UniformRandomBitGenerator.
class SeededRng {
 public:
  using result_type = std::uint64_t;

  explicit SeededRng(std::uint64_t seed = 0) : seed_(seed) {
    std::uint64_t sm = seed;
    for (auto& w : s_) w = detail::splitmix64(sm);
    if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
  }

  std::uint64_t seed() const { return seed_; }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() { return next_u64(); }

  std::uint64_t next_u64() {
    const std::uint64_t result = detail::rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = detail::rotl(s_[3], 45);
    return result;
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Unbiased uniform integer in [0, n) (Lemire's multiply-and-reject).
  std::uint64_t uniform_index(std::uint64_t n) {
    detail::require(n > 0, "uniform_index needs n > 0");
    unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (low < threshold) {
        m = static_cast<unsigned __int128>(next_u64()) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  /// Standard normal via the Marsaglia polar method (spare value cached).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, q;
    do {
      u = 2.0 * uniform01() - 1.0;
      v = 2.0 * uniform01() - 1.0;
      q = u * u + v * v;
    } while (q >= 1.0 || q == 0.0);
    const double k = std::sqrt(-2.0 * std::log(q) / q);
    spare_ = v * k;
    has_spare_ = true;
    return u * k;
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Poisson count. Inversion for small means, PTRS (Hormann 1993) otherwise.
  std::int64_t poisson(double mean) {
    detail::require(mean >= 0.0 && std::isfinite(mean), "poisson mean must be finite and >= 0");
    if (mean == 0.0) return 0;
    if (mean < 10.0) {
      const double limit = std::exp(-mean);
      double prod = uniform01();
      std::int64_t k = 0;
      while (prod > limit) {
        ++k;
        prod *= uniform01();
      }
      return k;
    }
    const double slam = std::sqrt(mean);
    const double loglam = std::log(mean);
    const double b = 0.931 + 2.53 * slam;
    const double a = -0.059 + 0.02483 * b;
    const double invalpha = 1.1239 + 1.1328 / (b - 3.4);
    const double vr = 0.9277 - 3.6224 / (b - 2);
    for (;;) {
      const double u = uniform01() - 0.5;
      const double v = uniform01();
      const double us = 0.5 - std::fabs(u);
      const double k = std::floor((2 * a / us + b) * u + mean + 0.43);
      if (us >= 0.07 && v <= vr) return static_cast<std::int64_t>(k);
      if (k < 0 || (us < 0.013 && v > us)) continue;
      if (std::log(v) + std::log(invalpha) - std::log(a / (us * us) + b) <=
          -mean + k * loglam - std::lgamma(k + 1)) {
        return static_cast<std::int64_t>(k);
      }
    }
  }

  /// Fisher-Yates shuffle driven by this stream.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_index(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> s_{};
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Child stream keyed by (master seed, label). Distinct labels give unrelated
/// sequences; the master's own draw position is irrelevant.
inline SeededRng rng_substream(const SeededRng& master, std::pair<std::uint64_t, std::uint64_t> label) {
  std::uint64_t h = detail::mix64(master.seed() ^ 0x6A09E667F3BCC909ULL);
  h = detail::mix64(h ^ detail::mix64(label.first + 0x243F6A8885A308D3ULL));
  h = detail::mix64(h ^ detail::mix64(label.second + 0x13198A2E03707344ULL));
  return SeededRng(h);
}

/// Places 1 at the min(M, F) largest scores; ties go to the lowest file id.
inline CacheAction top_m_action(std::span<const double> scores, std::size_t budget) {
  detail::require(budget >= 1, "cache budget must be >= 1");
  for (double x : scores) detail::require(std::isfinite(x), "top_m_action: non-finite score");
  const std::size_t n = scores.size();
  const std::size_t m = std::min(budget, n);
  std::vector<FileId> idx(n);
  std::iota(idx.begin(), idx.end(), FileId{0});
  auto better = [&](FileId a, FileId b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  };
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(m), idx.end(), better);
  std::vector<std::uint8_t> bits(n, 0);
  for (std::size_t i = 0; i < m; ++i) bits[idx[i]] = 1;
  return CacheAction(std::move(bits), budget);
}

inline CacheAction top_m_action(const StateVector& scores, std::size_t budget) {
  return top_m_action(scores.span(), budget);
}

/// Uniformly random placement of exactly min(M, F) files.
inline CacheAction random_action(std::size_t files, std::size_t budget, SeededRng& rng) {
  const std::size_t m = std::min(budget, files);
  std::vector<FileId> idx(files);
  std::iota(idx.begin(), idx.end(), FileId{0});
  // Partial Fisher-Yates: first m slots become a uniform m-subset.
  for (std::size_t i = 0; i < m; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.uniform_index(files - i));
    std::swap(idx[i], idx[j]);
  }
  std::vector<std::uint8_t> bits(files, 0);
  for (std::size_t i = 0; i < m; ++i) bits[idx[i]] = 1;
  return CacheAction(std::move(bits), budget);
}

}  // namespace cachenet
