// Command-line driver: run, compare, sweep, preset.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cachenet/cachenet.hpp"

namespace {

using namespace cachenet;

struct Common {
  std::string config;
  std::string out = "out";
  std::string policies;
  std::vector<std::string> sets;
  std::uint64_t seed = 0;
  bool seed_given = false;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "config file (key = value lines)");
  cmd->add_option("--out", c.out, "output directory");
  cmd->add_option("--policies", c.policies, "comma-separated parent policies");
  cmd->add_option("--set", c.sets, "override one key, key=value (repeatable)");
  cmd->add_option_function<std::uint64_t>(
      "--seed", [&c](const std::uint64_t& s) { c.seed = s, c.seed_given = true; }, "master seed");
  cmd->add_flag("--quiet", c.quiet, "suppress the summary");
}

/// Precedence: --seed, then CACHENET_SEED, then the config file.
SimConfig resolve(SimConfig cfg, const Common& c) {
  if (!c.config.empty()) cfg = load_config(c.config, std::move(cfg));
  for (const auto& kv : c.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("set", "--set expects key=value, got '" + kv + "'");
    apply_config_value(cfg, detail::trim(kv.substr(0, eq)), kv.substr(eq + 1));
  }
  if (const char* env = std::getenv("CACHENET_SEED"); env && *env) {
    cfg.seed = detail::parse_number<std::uint64_t>("CACHENET_SEED", env);
  }
  if (c.seed_given) cfg.seed = c.seed;
  if (!c.policies.empty()) cfg.policies = detail::split_list(c.policies);
  cfg.validate();
  return cfg;
}

void summarize(const MetricsLog& log, const std::vector<std::string>& files, bool quiet) {
  if (quiet) return;
  std::map<std::string, std::pair<double, std::size_t>> acc;
  for (const auto& r : log.rows) {
    auto& a = acc[r.policy];
    a.first += r.reduced_cost;
    ++a.second;
  }
  for (const auto& [p, a] : acc)
    std::cout << "policy=" << p << " intervals=" << a.second << " mean_reduced_cost=" << a.first / a.second << '\n';
  for (const auto& f : files) std::cout << "wrote " << f << '\n';
}

MetricsLog simulate(const SimConfig& cfg) {
  const auto list = cfg.policy_list();
  return list.size() >= 2 ? compare_policies(cfg, list) : run_policy(cfg, list.front());
}

int run_preset(const std::string& name, const Common& c) {
  SimConfig cfg = resolve(preset(name), c);
  if (name != "fig6") {
    const auto log = simulate(cfg);
    summarize(log, emit_csv(log, c.out), c.quiet);
    return 0;
  }
  std::filesystem::create_directories(c.out);
  for (auto period : fig6_sync_periods()) {
    SimConfig run = cfg;
    run.target_sync = period;
    const auto log = run_policy(run, run.parent_policy);
    const auto tag = "_c" + std::to_string(period);
    const auto base = std::filesystem::path(c.out);
    emit_theta_csv(log.theta, (base / ("theta" + tag + ".csv")).string());
    emit_metrics_csv(log, (base / ("metrics" + tag + ".csv")).string());
    if (!c.quiet) std::cout << "target_sync=" << period << " wrote " << (base / ("theta" + tag + ".csv")).string() << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-tier cache placement simulator"};
  app.require_subcommand(1);

  Common run_opts, cmp_opts, sweep_opts, preset_opts;
  auto* run = app.add_subcommand("run", "simulate one configuration");
  add_common(run, run_opts);

  auto* cmp = app.add_subcommand("compare", "seed-paired comparison of parent policies");
  add_common(cmp, cmp_opts);

  std::string sweep_key, sweep_values;
  auto* sweep = app.add_subcommand("sweep", "vary one key over a list of values");
  add_common(sweep, sweep_opts);
  sweep->add_option("--key", sweep_key, "configuration key to vary")->required();
  sweep->add_option("--values", sweep_values, "comma-separated values")->required();

  std::string preset_name;
  auto* pre = app.add_subcommand("preset", "desk-scale reproduction presets");
  add_common(pre, preset_opts);
  pre->add_option("name", preset_name, "fig5 | fig6 | fig7 | fig9")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error_key=cli message=\"" << e.what() << "\"\n";
    return 2;
  }

  try {
    if (*run) {
      SimConfig cfg = resolve({}, run_opts);
      const auto log = run_policy(cfg, cfg.parent_policy);
      summarize(log, emit_csv(log, run_opts.out), run_opts.quiet);
    } else if (*cmp) {
      SimConfig cfg = resolve({}, cmp_opts);
      const auto log = compare_policies(cfg, cfg.policy_list());
      summarize(log, emit_csv(log, cmp_opts.out), cmp_opts.quiet);
    } else if (*sweep) {
      SimConfig base = resolve({}, sweep_opts);
      for (const auto& v : detail::split_list(sweep_values)) {
        SimConfig cfg = base;
        apply_config_value(cfg, sweep_key, v);
        cfg.validate();
        const auto dir = (std::filesystem::path(sweep_opts.out) / (sweep_key + "=" + v)).string();
        const auto log = simulate(cfg);
        summarize(log, emit_csv(log, dir), sweep_opts.quiet);
      }
    } else if (*pre) {
      return run_preset(preset_name, preset_opts);
    }
  } catch (const ConfigError& e) {
    std::cerr << "error_key=" << e.key() << " message=\"" << e.what() << "\"\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "error_key=io path=\"" << e.path() << "\" message=\"" << e.what() << "\"\n";
    return 3;
  } catch (const InvalidInput& e) {
    std::cerr << "error_key=input message=\"" << e.what() << "\"\n";
    return 4;
  }
  return 0;
}
