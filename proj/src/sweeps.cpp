#include <algorithm>
#include <fstream>
#include <stdexcept>

#include <fmt/format.h>
#include <json.hpp>

#include "fedbargain/harness.hpp"
#include "fedbargain/parallel.hpp"

namespace fedbargain {

namespace {

SweepMeta meta_for(const ScenarioConfig& cfg) { return {config_hash(cfg), cfg.seed, kVersion}; }

const UeProfile& find_ue(const ScenarioConfig& cfg, int id) {
  for (const auto& p : cfg.ues) {
    if (p.id == id) return p;
  }
  throw std::invalid_argument("no device with id " + std::to_string(id));
}

}  // namespace

SweepResult sweep_reward(const ScenarioConfig& cfg, unsigned workers) {
  SweepResult out;
  out.columns = {"r", "ue_id", "theta_star", "local_iters", "utility"};
  out.meta = meta_for(cfg);

  const std::size_t n_ue = cfg.ues.size();
  out.rows.resize(cfg.reward_grid.size() * n_ue);
  parallel_for(cfg.reward_grid.size(), workers, [&](std::size_t i) {
    const double r = cfg.reward_grid[i];
    for (std::size_t k = 0; k < n_ue; ++k) {
      const BestResponse br = best_response(cfg.ues[k], r, cfg.game);
      out.rows[i * n_ue + k] = {r, static_cast<double>(cfg.ues[k].id), br.theta,
                                local_iterations(br.theta, cfg.game.law), br.utility};
    }
  });
  return out;
}

SweepResult sweep_commtime(const ScenarioConfig& cfg, std::optional<int> ue_id, unsigned workers) {
  SweepResult out;
  out.columns = {"tau", "ue_id", "r", "theta_star", "local_iters", "utility"};
  out.meta = meta_for(cfg);

  const UeProfile base = find_ue(cfg, ue_id.value_or(cfg.commtime.ue_id));
  const double r = cfg.commtime.reward;
  out.rows.resize(cfg.commtime.values.size());
  parallel_for(cfg.commtime.values.size(), workers, [&](std::size_t i) {
    UeProfile p = base;
    p.comm_time_norm = cfg.commtime.values[i];
    const BestResponse br = best_response(p, r, cfg.game);
    out.rows[i] = {p.comm_time_norm, static_cast<double>(p.id), r, br.theta,
                   local_iterations(br.theta, cfg.game.law), br.utility};
  });
  return out;
}

LeaderCurve leader_curve(const ScenarioConfig& cfg, unsigned workers) {
  LeaderCurve lc;
  SweepResult& out = lc.curve;
  out.columns = {"r", "theta_hat", "global_rounds", "total_payment", "bs_utility", "normalized_utility"};
  for (const auto& p : cfg.ues) out.columns.push_back("theta_" + std::to_string(p.id));
  out.meta = meta_for(cfg);

  const std::size_t n = cfg.reward_grid.size();
  out.rows.resize(n);
  parallel_for(n, workers, [&](std::size_t i) {
    const double r = cfg.reward_grid[i];
    const std::vector<double> thetas = nash_lower_level(cfg.ues, r, cfg.game);
    const double theta_hat = *std::max_element(thetas.begin(), thetas.end());
    double payment = 0.0;
    for (double t : thetas) payment += r * (1.0 - t);
    std::vector<double> row = {r,
                               theta_hat,
                               global_rounds(theta_hat, cfg.game.law),
                               payment,
                               bs_utility(cfg.ues, r, thetas, cfg.game),
                               0.0};
    row.insert(row.end(), thetas.begin(), thetas.end());
    out.rows[i] = std::move(row);
  });

  constexpr std::size_t kUtility = 4;
  constexpr std::size_t kNormalized = 5;
  double lo = out.rows[0][kUtility];
  for (std::size_t i = 0; i < n; ++i) {
    if (out.rows[i][kUtility] > out.rows[lc.argmax][kUtility]) lc.argmax = i;
    lo = std::min(lo, out.rows[i][kUtility]);
  }
  const double hi = out.rows[lc.argmax][kUtility];
  for (std::size_t i = 0; i < n; ++i) {
    out.rows[i][kNormalized] = hi > lo ? (out.rows[i][kUtility] - lo) / (hi - lo) : 1.0;
  }
  out.rows[lc.argmax][kNormalized] = 1.0;

  lc.equilibrium = leader_optimize(cfg.ues, cfg.game, workers);
  return lc;
}

std::vector<Dataset> scenario_shards(const ScenarioConfig& cfg) {
  Dataset ds;
  if (cfg.dataset.kind == DatasetSource::Kind::Synthetic) {
    const auto& s = cfg.dataset.synthetic;
    ds = gen_synthetic(s.classes, s.features, s.samples, s.separation, cfg.seed);
  } else {
    const auto& s = cfg.dataset.idx;
    ds = load_idx(resolve_data_path(s.images, s.data_dir), resolve_data_path(s.labels, s.data_dir));
    if (s.limit > 0 && s.limit < ds.size()) {
      std::vector<std::size_t> head(s.limit);
      for (std::size_t i = 0; i < s.limit; ++i) head[i] = i;
      ds = ds.subset(head);
    }
  }
  ds.validate();
  PartitionSpec spec = cfg.partition;
  spec.seed = cfg.seed + 1;
  return partition(ds, spec);
}

TrainConfig scenario_train_config(const ScenarioConfig& cfg, unsigned workers) {
  TrainConfig tc;
  tc.aggregator = cfg.training.aggregator;
  tc.solver = cfg.solver;
  tc.eps_global = cfg.training.eps_global;
  tc.max_rounds = cfg.training.max_rounds;
  tc.time_scale = cfg.training.time_scale;
  tc.workers = workers;
  for (const auto& p : cfg.ues) tc.timing.push_back({local_iter_time(p), p.comm_time_norm});
  return tc;
}

RunReport run_end_to_end(const ScenarioConfig& cfg, unsigned workers) {
  RunReport report;
  report.meta = meta_for(cfg);
  report.equilibrium = interaction_loop(cfg.ues, cfg.game, workers);

  for (double theta : report.equilibrium.theta_star) {
    report.training_thetas.push_back(std::clamp(theta * cfg.training.theta_scale,
                                                cfg.game.law.theta_min, cfg.game.law.theta_max));
  }

  const std::vector<Dataset> shards = scenario_shards(cfg);
  const TrainConfig tc = scenario_train_config(cfg, workers);
  report.train = train_federated(shards, report.training_thetas, tc);
  for (const auto& rec : report.train.rounds) report.simulated_time += rec.sim_time;

  for (double theta : cfg.theta_grid) {
    const std::vector<double> uniform(shards.size(), theta);
    report.theta_sweep.push_back({theta, train_federated(shards, uniform, tc)});
  }
  return report;
}

// Emission --------------------------------------------------------------------

namespace {

std::string fmt17(double v) { return fmt::format("{:.17g}", v); }

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

nlohmann::json meta_json(const SweepMeta& meta) {
  return {{"config_hash", meta.config_hash}, {"seed", meta.seed}, {"version", meta.version}};
}

nlohmann::json outcome_json(const StackelbergOutcome& eq) {
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& t : eq.trace) {
    trace.push_back({{"round", t.round},
                     {"reward", t.reward},
                     {"thetas", t.thetas},
                     {"leader_utility", t.leader_utility}});
  }
  return {{"reward_star", eq.reward_star},
          {"theta_star", eq.theta_star},
          {"payments", eq.payments},
          {"leader_utility", eq.leader_utility},
          {"converged", eq.converged},
          {"trace", trace}};
}

nlohmann::json train_json(const TrainResult& t) {
  nlohmann::json j = {{"rounds", t.rounds.size()},
                      {"converged", t.converged},
                      {"aborted", t.aborted},
                      {"diagnostic", t.diagnostic}};
  if (!t.rounds.empty()) {
    const auto& last = t.rounds.back();
    j["final_loss"] = last.global_loss;
    j["final_accuracy"] = last.global_accuracy;
    j["final_grad_norm"] = last.grad_norm;
  }
  return j;
}

}  // namespace

void write_csv(const std::filesystem::path& path, const SweepResult& table) {
  std::ofstream out = open_out(path);
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    out << (c ? "," : "") << table.columns[c];
  }
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << fmt17(row[c]);
    out << '\n';
  }
}

void write_equilibrium_json(const std::filesystem::path& path, const LeaderCurve& curve,
                            const SweepMeta& meta) {
  nlohmann::json j = meta_json(meta);
  j["equilibrium"] = outcome_json(curve.equilibrium);
  j["curve_argmax_reward"] = curve.curve.rows.at(curve.argmax).at(0);
  std::ofstream out = open_out(path);
  out << j.dump(2) << '\n';
}

SweepResult rounds_table(const RunReport& report) {
  SweepResult out;
  out.columns = {"round",      "client",      "local_iters",     "grad_ratio", "target_theta",
                 "hit_cap",    "global_loss", "global_accuracy", "grad_norm",  "sim_time"};
  out.meta = report.meta;
  for (const auto& rec : report.train.rounds) {
    for (std::size_t k = 0; k < rec.local_iters.size(); ++k) {
      out.rows.push_back({static_cast<double>(rec.round), static_cast<double>(k),
                          static_cast<double>(rec.local_iters[k]), rec.ratios[k], rec.targets[k],
                          rec.hit_cap[k] ? 1.0 : 0.0, rec.global_loss, rec.global_accuracy,
                          rec.grad_norm, rec.sim_time});
    }
  }
  return out;
}

SweepResult theta_sweep_table(const RunReport& report, const AccuracyLaw& law) {
  SweepResult out;
  out.columns = {"theta",      "rounds",         "converged",    "final_grad_norm",
                 "final_accuracy", "local_iters_law", "global_rounds_law"};
  out.meta = report.meta;
  for (const auto& point : report.theta_sweep) {
    const auto& t = point.train;
    const double grad = t.rounds.empty() ? 0.0 : t.rounds.back().grad_norm;
    const double acc = t.rounds.empty() ? 0.0 : t.rounds.back().global_accuracy;
    out.rows.push_back({point.theta, static_cast<double>(t.rounds.size()), t.converged ? 1.0 : 0.0,
                        grad, acc, local_iterations(point.theta, law),
                        global_rounds(point.theta, law)});
  }
  return out;
}

void write_report_json(const std::filesystem::path& path, const RunReport& report) {
  nlohmann::json j = meta_json(report.meta);
  j["equilibrium"] = outcome_json(report.equilibrium);
  nlohmann::json training = train_json(report.train);
  training["thetas"] = report.training_thetas;
  training["simulated_time"] = report.simulated_time;
  j["training"] = training;
  if (!report.theta_sweep.empty()) {
    nlohmann::json sweep = nlohmann::json::array();
    for (const auto& point : report.theta_sweep) {
      nlohmann::json entry = train_json(point.train);
      entry["theta"] = point.theta;
      sweep.push_back(entry);
    }
    j["theta_sweep"] = sweep;
  }
  std::ofstream out = open_out(path);
  out << j.dump(2) << '\n';
}

}  // namespace fedbargain
