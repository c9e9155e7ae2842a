#pragma once

// Scenario configuration and the experiment drivers behind the CLI.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fedbargain/cost.hpp"
#include "fedbargain/data.hpp"
#include "fedbargain/fl.hpp"
#include "fedbargain/game.hpp"

namespace fedbargain {

inline constexpr const char* kVersion = "0.1.0";

/// Invalid or unreadable configuration. `where` is the JSON key path
/// (e.g. "ues[2].comm_time_norm") or the file name for I/O failures.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string where, const std::string& message)
      : std::runtime_error(where + ": " + message), where_(std::move(where)) {}
  const std::string& where() const noexcept { return where_; }

 private:
  std::string where_;
};

struct SyntheticSource {
  int classes = 3;
  std::size_t features = 10;
  std::size_t samples = 600;
  double separation = 3.0;
};

struct IdxSource {
  std::string images;
  std::string labels;
  std::string data_dir;   // overrides $FEDBARGAIN_DATA_DIR when set
  std::size_t limit = 0;  // keep the first `limit` samples; 0 keeps all
};

struct DatasetSource {
  enum class Kind { Synthetic, Idx };
  Kind kind = Kind::Synthetic;
  SyntheticSource synthetic;
  IdxSource idx;
};

struct CommtimeSweep {
  int ue_id = 0;
  double reward = 10.0;
  std::vector<double> values;
};

struct TrainingSettings {
  AggregatorKind aggregator;
  double eps_global = 1e-2;
  std::size_t max_rounds = 2000;
  double time_scale = 1.0;
  /// Multiplies every equilibrium theta before training (clamped to bounds).
  double theta_scale = 1.0;
};

struct ScenarioConfig {
  std::vector<UeProfile> ues;
  GameConfig game;
  SolverConfig solver;
  PartitionSpec partition;
  DatasetSource dataset;
  TrainingSettings training;
  std::vector<double> reward_grid;
  CommtimeSweep commtime;
  std::vector<double> theta_grid;
  std::string output_dir = "out";
  std::uint64_t seed = 42;

  /// Throws ConfigError with the key path of the first violation.
  void validate() const;
};

/// Five devices with equal data size, channels from good to poor and CPU
/// speeds spread over [1, 3] GHz, on a 600-sample 3-class synthetic set.
ScenarioConfig default_scenario();

/// Parses JSON text; absent keys take the default_scenario() values and
/// unknown keys are rejected.
ScenarioConfig parse_config(std::string_view json_text);
ScenarioConfig load_config(const std::filesystem::path& path);

/// Canonical JSON of the resolved configuration (output_dir excluded).
std::string canonical_config(const ScenarioConfig& cfg);
/// 64-bit FNV-1a of canonical_config, as 16 hex digits.
std::string config_hash(const ScenarioConfig& cfg);

struct SweepMeta {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string version = kVersion;
};

struct SweepResult {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  SweepMeta meta;
};

/// Fig. 3a-style sweep: best response of every device at every reward.
/// Columns: r, ue_id, theta_star, local_iters, utility.
SweepResult sweep_reward(const ScenarioConfig& cfg, unsigned workers = 1);

/// Best response of one device over the tau grid at a fixed reward.
/// Columns: tau, ue_id, r, theta_star, local_iters, utility.
SweepResult sweep_commtime(const ScenarioConfig& cfg, std::optional<int> ue_id = std::nullopt,
                           unsigned workers = 1);

struct LeaderCurve {
  /// Columns: r, theta_hat, global_rounds, total_payment, bs_utility,
  /// normalized_utility, then theta_<id> per device.
  SweepResult curve;
  std::size_t argmax = 0;
  StackelbergOutcome equilibrium;
};

/// Leader utility over the reward grid, min-max normalized so the best grid
/// point (smallest r on ties) is exactly 1.
LeaderCurve leader_curve(const ScenarioConfig& cfg, unsigned workers = 1);

struct ThetaSweepPoint {
  double theta = 0.0;
  TrainResult train;
};

struct RunReport {
  SweepMeta meta;
  StackelbergOutcome equilibrium;
  std::vector<double> training_thetas;
  TrainResult train;
  double simulated_time = 0.0;
  std::vector<ThetaSweepPoint> theta_sweep;
};

/// Builds the dataset and its client shards from the scenario.
std::vector<Dataset> scenario_shards(const ScenarioConfig& cfg);
TrainConfig scenario_train_config(const ScenarioConfig& cfg, unsigned workers = 1);

/// Equilibrium, then federated training with the equilibrium thetas (and one
/// extra training run per theta_grid entry with that theta on every client).
RunReport run_end_to_end(const ScenarioConfig& cfg, unsigned workers = 1);

// Emission. Floats are written with 17 significant digits.
void write_csv(const std::filesystem::path& path, const SweepResult& table);
void write_equilibrium_json(const std::filesystem::path& path, const LeaderCurve& curve,
                            const SweepMeta& meta);
SweepResult rounds_table(const RunReport& report);
SweepResult theta_sweep_table(const RunReport& report, const AccuracyLaw& law);
void write_report_json(const std::filesystem::path& path, const RunReport& report);

}  // namespace fedbargain
