#pragma once

// Per-slot request generators: static popularity with Poisson thinning,
// clipped Gaussian random-walk dynamics, and CSV trace replay.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "cachenet/core.hpp"

namespace cachenet {

struct StaticPopularity {
  std::vector<double> p;
  double intensity = 100.0;
};

/// Entry f is Poisson with mean intensity * p_f / sum(p).
inline RequestVector draw_static(const StaticPopularity& pop, SeededRng& rng) {
  detail::require(pop.intensity > 0.0 && std::isfinite(pop.intensity), "intensity must be > 0");
  double total = 0.0;
  for (double x : pop.p) {
    detail::require(x >= 0.0 && x <= 1.0, "popularity entries must lie in [0,1]");
    total += x;
  }
  detail::require(total > 0.0, "popularity vector is all zero");
  RequestVector r(pop.p.size());
  for (std::size_t f = 0; f < pop.p.size(); ++f) r[f] = rng.poisson(pop.intensity * pop.p[f] / total);
  return r;
}

/// Popularities drawn uniformly from [0,1].
inline StaticPopularity random_popularity(std::size_t files, double intensity, SeededRng& rng) {
  StaticPopularity pop{std::vector<double>(files), intensity};
  for (auto& x : pop.p) x = rng.uniform01();
  return pop;
}

struct MarkovDemand {
  RequestVector current;
  std::vector<double> mean;
  std::vector<double> stddev;
  std::int64_t r_max = 10'000;

  void validate() const {
    detail::require_same_length(current.size(), mean.size(), "markov demand mean");
    detail::require_same_length(current.size(), stddev.size(), "markov demand stddev");
    detail::require(r_max >= 1, "r_max must be >= 1");
    for (double s : stddev) detail::require(s > 0.0 && std::isfinite(s), "noise stddev must be > 0");
    for (auto r : current) detail::require(r >= 0 && r <= r_max, "request count outside [0, r_max]");
  }
};

/// r_f <- clamp(floor(r_f + delta_f), 0, r_max), delta_f ~ N(mean_f, stddev_f^2).
inline std::pair<MarkovDemand, RequestVector> markov_step(MarkovDemand d, SeededRng& rng) {
  for (std::size_t f = 0; f < d.current.size(); ++f) {
    const double next = std::floor(static_cast<double>(d.current[f]) + rng.normal(d.mean[f], d.stddev[f]));
    d.current[f] = static_cast<std::int64_t>(std::clamp(next, 0.0, static_cast<double>(d.r_max)));
  }
  RequestVector out = d.current;
  return {std::move(d), std::move(out)};
}

/// Replayed request counts keyed by global slot index. Missing pairs are zero.
class RequestTrace {
 public:
  RequestTrace() = default;

  static RequestTrace parse(std::istream& in, std::size_t files) {
    RequestTrace trace;
    trace.files_ = files;
    std::string line;
    if (!std::getline(in, line)) throw InvalidInput("trace: missing header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "slot,file,count") throw InvalidInput("trace: header must be 'slot,file,count'");
    std::size_t lineno = 1;
    std::int64_t last_slot = -1;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      std::istringstream row(line);
      std::int64_t slot = 0, file = 0, count = 0;
      char c1 = 0, c2 = 0;
      if (!(row >> slot >> c1 >> file >> c2 >> count) || c1 != ',' || c2 != ',') {
        throw InvalidInput("trace: malformed row at line " + std::to_string(lineno));
      }
      if (slot < 0 || file < 0 || static_cast<std::size_t>(file) >= files || count < 0) {
        throw InvalidInput("trace: value out of range at line " + std::to_string(lineno));
      }
      if (slot < last_slot) throw InvalidInput("trace: rows not sorted by slot at line " + std::to_string(lineno));
      last_slot = slot;
      auto& vec = trace.slots_[static_cast<std::size_t>(slot)];
      if (vec.empty()) vec = RequestVector(files);
      vec[static_cast<std::size_t>(file)] += count;
    }
    return trace;
  }

  static RequestTrace load(const std::string& path, std::size_t files) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("trace: cannot open '" + path + "'");
    return parse(in, files);
  }

  RequestVector at(std::size_t slot) const {
    auto it = slots_.find(slot);
    return it == slots_.end() ? RequestVector(files_) : it->second;
  }

 private:
  std::size_t files_ = 0;
  std::map<std::size_t, RequestVector> slots_;
};

/// One leaf's demand process. Single owner; advanced once per fast slot.
class DemandSource {
 public:
  DemandSource(StaticPopularity pop, SeededRng rng) : model_(std::move(pop)), rng_(std::move(rng)) {}
  DemandSource(MarkovDemand d, SeededRng rng) : model_(std::move(d)), rng_(std::move(rng)) {
    std::get<MarkovDemand>(model_).validate();
  }
  DemandSource(std::shared_ptr<const RequestTrace> trace) : model_(std::move(trace)), rng_(0) {}

  RequestVector next() {
    const std::size_t slot = slot_++;
    if (auto* s = std::get_if<StaticPopularity>(&model_)) return draw_static(*s, rng_);
    if (auto* m = std::get_if<MarkovDemand>(&model_)) {
      auto [state, r] = markov_step(std::move(*m), rng_);
      *m = std::move(state);
      return r;
    }
    return std::get<std::shared_ptr<const RequestTrace>>(model_)->at(slot);
  }

  const StaticPopularity* static_popularity() const { return std::get_if<StaticPopularity>(&model_); }

 private:
  std::variant<StaticPopularity, MarkovDemand, std::shared_ptr<const RequestTrace>> model_;
  SeededRng rng_;
  std::size_t slot_ = 0;
};

}  // namespace cachenet
