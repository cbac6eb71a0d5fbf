#pragma once

// Simulation configuration: flat `key = value` text, `#` comments,
// comma-separated lists. Every validation failure names its key.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <locale>
#include <type_traits>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cachenet/core.hpp"

namespace cachenet {

/// Invalid configuration; key() is the offending key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& message)
      : std::runtime_error(message), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

/// Filesystem failure; path() is the file involved.
class IoError : public std::runtime_error {
 public:
  IoError(std::string path, const std::string& message) : std::runtime_error(message), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

inline const std::vector<std::string>& known_policies() {
  static const std::vector<std::string> names{"fifo",   "hyper_dqn",  "lfu", "lru", "nocache",
                                              "optimal", "rr",        "tabular_q", "window_pop", "dqn"};
  return names;
}

inline bool is_known_policy(const std::string& name) {
  const auto& k = known_policies();
  return std::find(k.begin(), k.end(), name) != k.end();
}

struct SimConfig {
  std::size_t files = 50;
  std::size_t leaves = 1;
  std::size_t parent_capacity = 5;
  std::vector<std::size_t> leaf_capacity{5};  // one entry, or one per leaf
  std::size_t slots = 1;
  std::size_t horizon = 500;

  std::string leaf_policy = "window_pop";
  std::string parent_policy = "dqn";
  std::vector<std::string> policies;  // compare list; empty -> parent_policy only

  // demand
  std::string demand = "static";  // static | markov | trace
  double intensity = 100.0;
  double noise_mean = 0.0;
  double noise_std = 1.0;
  double noise_mean_spread = 0.0;  // per (leaf, file) mean offset drawn from U(-spread, spread)
  std::int64_t r_init = 10;        // initial Markov counts drawn uniformly from [0, r_init]
  std::int64_t r_max = 10'000;
  std::string trace;
  std::string request_order = "shuffled";  // shuffled | ascending

  std::vector<double> weights;  // empty -> all ones
  bool mean_weights = false;    // `weights = mean`: every leaf weighs 1/N

  // parent agent
  std::size_t groups = 1;
  std::vector<std::size_t> group_sizes;  // empty -> even split
  double gamma = 0.8;
  double learning_rate = 0.01;
  double epsilon = 0.4;
  std::string exploration = "constant";  // constant | glie
  std::size_t target_sync = 10;
  std::size_t batch = 1;
  std::size_t replay = 10;
  std::vector<std::size_t> hidden{50};

  // tabular leaf learner
  std::size_t q_levels = 4;
  double q_epsilon = 0.1;
  double q_learning_rate = 0.1;

  // metrics
  std::size_t cdf_samples = 0;  // 0 disables CDF mode
  bool theta_trace = true;

  std::uint64_t seed = 1;

  std::size_t leaf_budget(std::size_t n) const {
    return leaf_capacity.size() == 1 ? leaf_capacity.front() : leaf_capacity.at(n);
  }

  double weight(std::size_t n) const {
    if (mean_weights) return 1.0 / static_cast<double>(leaves);
    return weights.empty() ? 1.0 : weights.at(n);
  }

  /// Group widths the hyper agent uses: explicit sizes, else an even split.
  std::vector<std::size_t> group_widths(std::size_t k) const {
    if (!group_sizes.empty()) return group_sizes;
    std::vector<std::size_t> w(k, files / k);
    for (std::size_t i = 0; i < files % k; ++i) ++w[i];
    return w;
  }

  std::vector<std::string> policy_list() const {
    return policies.empty() ? std::vector<std::string>{parent_policy} : policies;
  }

  void validate() const {
    auto need = [](bool ok, const char* key, const std::string& msg) {
      if (!ok) throw ConfigError(key, msg);
    };
    need(files >= 1, "files", "files must be >= 1");
    need(leaves >= 1, "leaves", "leaves must be >= 1");
    need(parent_capacity >= 1, "parent_capacity", "parent_capacity must be >= 1");
    need(leaf_capacity.size() == 1 || leaf_capacity.size() == leaves, "leaf_capacity",
         "leaf_capacity must list one value or one per leaf");
    for (auto m : leaf_capacity) need(m >= 1, "leaf_capacity", "leaf capacities must be >= 1");
    need(slots >= 1, "slots", "slots must be >= 1");
    need(horizon >= 1, "horizon", "horizon must be >= 1");
    need(is_known_policy(leaf_policy) && leaf_policy != "dqn" && leaf_policy != "hyper_dqn" &&
             leaf_policy != "optimal",
         "leaf_policy", "unsupported leaf policy '" + leaf_policy + "'");
    need(is_known_policy(parent_policy), "parent_policy", "unknown policy '" + parent_policy + "'");
    for (const auto& p : policies) need(is_known_policy(p), "policies", "unknown policy '" + p + "'");
    need(demand == "static" || demand == "markov" || demand == "trace", "demand",
         "demand must be static, markov or trace");
    need(intensity > 0.0 && std::isfinite(intensity), "intensity", "intensity must be > 0");
    need(std::isfinite(noise_mean), "noise_mean", "noise_mean must be finite");
    need(noise_std > 0.0 && std::isfinite(noise_std), "noise_std", "noise_std must be > 0");
    need(noise_mean_spread >= 0.0 && std::isfinite(noise_mean_spread), "noise_mean_spread",
         "noise_mean_spread must be >= 0");
    need(r_max >= 1, "r_max", "r_max must be >= 1");
    need(r_init >= 0 && r_init <= r_max, "r_init", "r_init must lie in [0, r_max]");
    need(demand != "trace" || !trace.empty(), "trace", "demand = trace needs a trace path");
    need(request_order == "shuffled" || request_order == "ascending", "request_order",
         "request_order must be shuffled or ascending");
    need(weights.empty() || weights.size() == leaves, "weights", "weights must list one value per leaf");
    for (double w : weights) need(w >= 0.0 && std::isfinite(w), "weights", "weights must be finite and >= 0");
    need(groups >= 1 && groups <= files, "groups", "groups must lie in [1, files]");
    if (!group_sizes.empty()) {
      need(group_sizes.size() == groups, "group_sizes", "group_sizes must list one width per group");
      std::size_t total = 0;
      for (auto g : group_sizes) {
        need(g >= 1, "group_sizes", "group widths must be >= 1");
        total += g;
      }
      need(total == files, "group_sizes", "group widths must sum to files");
    }
    need(gamma >= 0.0 && gamma < 1.0, "gamma", "gamma must lie in [0,1)");
    need(learning_rate > 0.0 && std::isfinite(learning_rate), "learning_rate", "learning_rate must be > 0");
    need(epsilon >= 0.0 && epsilon <= 1.0, "epsilon", "epsilon must lie in [0,1]");
    need(exploration == "constant" || exploration == "glie", "exploration", "exploration must be constant or glie");
    need(target_sync >= 1, "target_sync", "target_sync must be >= 1");
    need(batch >= 1, "batch", "batch must be >= 1");
    need(replay >= 1, "replay", "replay must be >= 1");
    for (auto h : hidden) need(h >= 1, "hidden", "hidden widths must be >= 1");
    need(q_levels >= 1, "q_levels", "q_levels must be >= 1");
    need(q_epsilon >= 0.0 && q_epsilon <= 1.0, "q_epsilon", "q_epsilon must lie in [0,1]");
    need(q_learning_rate > 0.0 && q_learning_rate <= 1.0, "q_learning_rate", "q_learning_rate must lie in (0,1]");
    need(cdf_samples <= horizon, "cdf_samples", "cdf_samples must not exceed horizon");
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(v);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* first = text.data();
  const char* last = first + text.size();
  if constexpr (std::is_floating_point_v<T>) {
    // classic locale; trailing garbage is rejected
    std::istringstream in(text);
    in.imbue(std::locale::classic());
    if (!(in >> value) || !(in >> std::ws).eof()) throw ConfigError(key, "'" + text + "' is not a number");
  } else {
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) throw ConfigError(key, "'" + text + "' is not a valid integer");
  }
  return value;
}

template <class T>
std::vector<T> parse_number_list(const std::string& key, const std::string& text) {
  std::vector<T> out;
  for (const auto& item : split_list(text)) out.push_back(parse_number<T>(key, item));
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError(key, "'" + text + "' is not a boolean");
}

}  // namespace detail

/// Overrides one field. Unknown keys are rejected.
inline void apply_config_value(SimConfig& c, const std::string& key, const std::string& raw) {
  using detail::parse_number;
  using detail::parse_number_list;
  const std::string v = detail::trim(raw);
  if (key == "files") c.files = parse_number<std::size_t>(key, v);
  else if (key == "leaves") c.leaves = parse_number<std::size_t>(key, v);
  else if (key == "parent_capacity") c.parent_capacity = parse_number<std::size_t>(key, v);
  else if (key == "leaf_capacity") c.leaf_capacity = parse_number_list<std::size_t>(key, v);
  else if (key == "slots") c.slots = parse_number<std::size_t>(key, v);
  else if (key == "horizon") c.horizon = parse_number<std::size_t>(key, v);
  else if (key == "leaf_policy") c.leaf_policy = v;
  else if (key == "parent_policy") c.parent_policy = v;
  else if (key == "policies") c.policies = detail::split_list(v);
  else if (key == "demand") c.demand = v;
  else if (key == "intensity") c.intensity = parse_number<double>(key, v);
  else if (key == "noise_mean") c.noise_mean = parse_number<double>(key, v);
  else if (key == "noise_std") c.noise_std = parse_number<double>(key, v);
  else if (key == "noise_mean_spread") c.noise_mean_spread = parse_number<double>(key, v);
  else if (key == "r_init") c.r_init = parse_number<std::int64_t>(key, v);
  else if (key == "r_max") c.r_max = parse_number<std::int64_t>(key, v);
  else if (key == "trace") c.trace = v;
  else if (key == "request_order") c.request_order = v;
  else if (key == "weights") {
    c.mean_weights = v == "mean";
    c.weights = c.mean_weights ? std::vector<double>{} : parse_number_list<double>(key, v);
  }
  else if (key == "groups") c.groups = parse_number<std::size_t>(key, v);
  else if (key == "group_sizes") c.group_sizes = parse_number_list<std::size_t>(key, v);
  else if (key == "gamma") c.gamma = parse_number<double>(key, v);
  else if (key == "learning_rate") c.learning_rate = parse_number<double>(key, v);
  else if (key == "epsilon") c.epsilon = parse_number<double>(key, v);
  else if (key == "exploration") c.exploration = v;
  else if (key == "target_sync") c.target_sync = parse_number<std::size_t>(key, v);
  else if (key == "batch") c.batch = parse_number<std::size_t>(key, v);
  else if (key == "replay") c.replay = parse_number<std::size_t>(key, v);
  else if (key == "hidden") c.hidden = parse_number_list<std::size_t>(key, v);
  else if (key == "q_levels") c.q_levels = parse_number<std::size_t>(key, v);
  else if (key == "q_epsilon") c.q_epsilon = parse_number<double>(key, v);
  else if (key == "q_learning_rate") c.q_learning_rate = parse_number<double>(key, v);
  else if (key == "cdf_samples") c.cdf_samples = parse_number<std::size_t>(key, v);
  else if (key == "theta_trace") c.theta_trace = detail::parse_bool(key, v);
  else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, v);
  else throw ConfigError(key, "unknown configuration key '" + key + "'");
}

/// Parses config text on top of `base`. Does not validate.
inline SimConfig parse_config(std::istream& in, SimConfig base = {}) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno), "expected 'key = value' on line " + std::to_string(lineno));
    }
    const std::string key = detail::trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno), "empty key");
    apply_config_value(base, key, line.substr(eq + 1));
  }
  return base;
}

inline SimConfig parse_config_string(const std::string& text, SimConfig base = {}) {
  std::istringstream in(text);
  return parse_config(in, std::move(base));
}

inline SimConfig load_config(const std::string& path, SimConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open config file");
  return parse_config(in, std::move(base));
}

/// Parent-only static experiment used for the convergence figures: one leaf
/// that caches nothing, one slot per interval, so the parent sees raw demand.
inline SimConfig preset_fig5() {
  SimConfig c;
  c.files = 50;
  c.parent_capacity = 5;
  c.leaves = 1;
  c.leaf_policy = "nocache";
  c.slots = 1;
  c.horizon = 500;
  c.parent_policy = "dqn";
  c.demand = "static";
  c.intensity = 100.0;
  c.hidden = {50};
  c.replay = 10;
  c.batch = 1;
  c.target_sync = 10;
  c.gamma = 0.8;
  c.learning_rate = 0.01;
  c.epsilon = 0.4;
  return c;
}

/// Same as fig5; the sweep over target_sync happens in the driver.
inline SimConfig preset_fig6() {
  SimConfig c = preset_fig5();
  c.horizon = 2000;
  return c;
}

inline const std::vector<std::size_t>& fig6_sync_periods() {
  static const std::vector<std::size_t> periods{2, 3, 5, 20};
  return periods;
}

/// Two-tier Markov-demand comparison at desk scale.
inline SimConfig preset_fig7() {
  SimConfig c;
  c.files = 100;
  c.leaves = 5;
  c.parent_capacity = 10;
  c.leaf_capacity = {5};
  c.slots = 2;
  c.horizon = 2000;
  c.leaf_policy = "window_pop";
  c.parent_policy = "hyper_dqn";
  c.policies = {"fifo", "hyper_dqn", "lfu", "lru", "optimal"};
  c.demand = "markov";
  c.noise_mean = 0.5;  // cancels the floor's downward bias
  c.noise_std = 1.0;
  c.r_init = 10;
  c.mean_weights = true;
  c.groups = 5;
  c.cdf_samples = 100;
  return c;
}

/// fig7 with more leaves.
inline SimConfig preset_fig9(std::size_t leaves = 10) {
  SimConfig c = preset_fig7();
  c.leaves = leaves;
  c.policies = {"hyper_dqn", "optimal"};
  return c;
}

inline SimConfig preset(const std::string& name) {
  if (name == "fig5") return preset_fig5();
  if (name == "fig6") return preset_fig6();
  if (name == "fig7") return preset_fig7();
  if (name == "fig9") return preset_fig9();
  throw ConfigError("preset", "unknown preset '" + name + "'");
}

}  // namespace cachenet
