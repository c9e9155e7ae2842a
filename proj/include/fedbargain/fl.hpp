#pragma once

// Synchronous federated training of multinomial logistic regression. Each
// client runs full-batch gradient descent until its gradient norm shrinks to
// its assigned fraction theta of the starting norm.

#include <Eigen/Dense>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedbargain/data.hpp"

namespace fedbargain {

/// K x (d+1) matrix; the last column holds the per-class bias.
using ModelWeights = Eigen::MatrixXd;

ModelWeights zero_weights(int num_classes, std::size_t dim);

struct LossGrad {
  double loss = 0.0;
  ModelWeights grad;
};

/// Mean softmax cross-entropy over `shard` plus (l2/2)*||w||_F^2.
LossGrad loss_and_grad(const ModelWeights& w, const Dataset& shard, double l2);

/// Fraction of samples whose arg-max class matches the label.
double accuracy(const ModelWeights& w, const Dataset& shard);

/// 0.25 * max_i ||[x_i, 1]||^2 + l2.
double lipschitz_bound(const Dataset& shard, double l2);

struct SolverConfig {
  double l2_reg = 1e-2;
  std::size_t max_local_iters = 2000;
  /// Keep the local objective after every step (for descent diagnostics).
  bool record_objective = false;

  void validate() const;
};

/// FedProx term (mu/2)*||w - anchor||^2 added to a local objective.
struct Proximal {
  double mu = 0.0;
  ModelWeights anchor;
};

struct LocalResult {
  ModelWeights weights;
  std::size_t iterations = 0;
  double ratio = 0.0;  // ||grad|| at exit over ||grad|| at start
  bool hit_cap = false;
  double start_loss = 0.0;  // local data loss of the starting model
  std::vector<double> objective;  // filled when SolverConfig::record_objective
};

/// Runs fixed-step gradient descent from `start` until the local gradient
/// norm is at most theta times its initial value, or the iteration cap.
/// theta must lie in (0, 1); a zero starting gradient returns immediately.
LocalResult local_solve(const ModelWeights& start, const Dataset& shard, double theta,
                        const SolverConfig& cfg, const std::optional<Proximal>& prox = std::nullopt);

struct AggregatorKind {
  enum class Type { FedAvg, FedProx, FairWeighted };
  Type type = Type::FedAvg;
  double mu = 0.0;  // FedProx
  double q = 0.0;   // FairWeighted

  static AggregatorKind fed_avg() { return {}; }
  static AggregatorKind fed_prox(double mu) { return {Type::FedProx, mu, 0.0}; }
  static AggregatorKind fair_weighted(double q) { return {Type::FairWeighted, 0.0, q}; }

  void validate() const;
};

struct ClientUpdate {
  ModelWeights weights;
  double shard_size = 0.0;
  double local_loss = 0.0;
};

struct Aggregate {
  ModelWeights weights;
  std::vector<double> coefficients;  // sums to 1
  bool fell_back = false;            // fairness weights were all zero
};

Aggregate aggregate(std::span<const ClientUpdate> updates, const AggregatorKind& kind);

/// Per-client timing used for the simulated round time.
struct ClientTiming {
  double iter_time = 0.0;  // seconds per local iteration
  double comm_time = 0.0;  // normalized communication time tau
};

struct TrainConfig {
  AggregatorKind aggregator;
  SolverConfig solver;
  double eps_global = 1e-2;
  std::size_t max_rounds = 500;
  std::vector<ClientTiming> timing;  // empty, or one per client
  double time_scale = 1.0;           // seconds per unit of tau
  unsigned workers = 1;

  void validate() const;
};

struct RoundRecord {
  std::size_t round = 0;
  std::vector<std::size_t> local_iters;
  std::vector<double> ratios;
  std::vector<double> targets;
  std::vector<bool> hit_cap;
  double global_loss = 0.0;
  double global_accuracy = 0.0;
  double grad_norm = 0.0;
  double sim_time = 0.0;
};

struct TrainResult {
  ModelWeights weights;
  std::vector<RoundRecord> rounds;
  bool converged = false;
  bool aborted = false;
  std::string diagnostic;
};

/// Loss and gradient of the size-weighted union objective.
LossGrad global_loss_and_grad(const ModelWeights& w, std::span<const Dataset> shards, double l2);

TrainResult train_federated(std::span<const Dataset> shards, std::span<const double> thetas,
                            const TrainConfig& cfg);

}  // namespace fedbargain
