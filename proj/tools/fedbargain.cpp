// Command-line driver: sweep-reward, sweep-commtime, leader-curve, run.

#include <CLI11.hpp>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "fedbargain/harness.hpp"

namespace fs = std::filesystem;
using namespace fedbargain;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

struct CommonOptions {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  unsigned workers = 1;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--config", opts.config, "Scenario JSON (default scenario when omitted)");
  cmd->add_option("--out", opts.out, "Output directory (overrides output_dir)");
  cmd->add_option("--seed", opts.seed, "Master seed (overrides seed)");
  cmd->add_option("--workers", opts.workers, "Worker threads; 0 = hardware concurrency");
}

ScenarioConfig resolve(const CommonOptions& opts) {
  ScenarioConfig cfg = opts.config.empty() ? default_scenario() : load_config(opts.config);
  if (opts.seed) cfg.seed = *opts.seed;
  if (!opts.out.empty()) cfg.output_dir = opts.out;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stackelberg incentive game coupled to federated training"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  CommonOptions opts;
  auto* reward = app.add_subcommand("sweep-reward", "Best responses over the reward grid");
  add_common(reward, opts);

  std::optional<int> ue;
  auto* commtime = app.add_subcommand("sweep-commtime", "Best response of one device over tau");
  add_common(commtime, opts);
  commtime->add_option("--ue", ue, "Device id (defaults to sweeps.commtime.ue_id)");

  auto* leader = app.add_subcommand("leader-curve", "Normalized leader utility and equilibrium");
  add_common(leader, opts);

  std::optional<double> theta_scale;
  auto* run = app.add_subcommand("run", "Equilibrium followed by federated training");
  add_common(run, opts);
  run->add_option("--theta-scale", theta_scale, "Multiply equilibrium thetas before training")
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  ScenarioConfig cfg;
  try {
    cfg = resolve(opts);
    if (theta_scale) cfg.training.theta_scale = *theta_scale;
    cfg.validate();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }

  const fs::path out_dir = cfg.output_dir;
  try {
    if (*reward) {
      write_csv(out_dir / "reward_sweep.csv", sweep_reward(cfg, opts.workers));
    } else if (*commtime) {
      write_csv(out_dir / "commtime_sweep.csv", sweep_commtime(cfg, ue, opts.workers));
    } else if (*leader) {
      const LeaderCurve curve = leader_curve(cfg, opts.workers);
      write_csv(out_dir / "leader_curve.csv", curve.curve);
      write_equilibrium_json(out_dir / "equilibrium.json", curve, curve.curve.meta);
    } else if (*run) {
      const RunReport report = run_end_to_end(cfg, opts.workers);
      write_csv(out_dir / "rounds.csv", rounds_table(report));
      if (!report.theta_sweep.empty()) {
        write_csv(out_dir / "theta_sweep.csv", theta_sweep_table(report, cfg.game.law));
      }
      write_report_json(out_dir / "report.json", report);
      if (report.train.aborted) {
        std::cerr << "training aborted: " << report.train.diagnostic << '\n';
        return kExitRuntime;
      }
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}
