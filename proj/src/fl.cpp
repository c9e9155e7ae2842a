#include "fedbargain/fl.hpp"

#include <cmath>
#include <stdexcept>

#include "fedbargain/parallel.hpp"

namespace fedbargain {

ModelWeights zero_weights(int num_classes, std::size_t dim) {
  return ModelWeights::Zero(num_classes, static_cast<Eigen::Index>(dim) + 1);
}

namespace {

void check_shapes(const ModelWeights& w, const Dataset& shard) {
  if (shard.size() == 0) throw std::invalid_argument("empty shard");
  if (w.rows() != shard.num_classes || w.cols() != shard.features.cols() + 1) {
    throw std::invalid_argument("weights are " + std::to_string(w.rows()) + "x" +
                                std::to_string(w.cols()) + ", shard needs " +
                                std::to_string(shard.num_classes) + "x" +
                                std::to_string(shard.features.cols() + 1));
  }
  if (!w.allFinite()) throw std::invalid_argument("non-finite weights");
}

/// Row-wise logits X*W' + b.
Eigen::MatrixXd logits(const ModelWeights& w, const Dataset& shard) {
  const Eigen::Index d = shard.features.cols();
  Eigen::MatrixXd z = shard.features * w.leftCols(d).transpose();
  z.rowwise() += w.col(d).transpose();
  return z;
}

/// Data term only (no regularizer).
LossGrad data_loss_and_grad(const ModelWeights& w, const Dataset& shard) {
  const Eigen::Index n = static_cast<Eigen::Index>(shard.size());
  const Eigen::Index d = shard.features.cols();
  Eigen::MatrixXd p = logits(w, shard);

  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = shard.labels[static_cast<std::size_t>(i)];
    const double shift = p.row(i).maxCoeff();
    const double target = p(i, y) - shift;
    p.row(i).array() = (p.row(i).array() - shift).exp();
    const double total = p.row(i).sum();
    // -log softmax_y = log(sum exp(z - shift)) - (z_y - shift)
    loss += std::log(total) - target;
    p.row(i) /= total;
    p(i, y) -= 1.0;
  }

  const double inv_n = 1.0 / static_cast<double>(n);
  LossGrad out;
  out.loss = loss * inv_n;
  out.grad.resize(w.rows(), w.cols());
  out.grad.leftCols(d).noalias() = inv_n * (p.transpose() * shard.features);
  out.grad.col(d) = inv_n * p.colwise().sum().transpose();
  return out;
}

}  // namespace

LossGrad loss_and_grad(const ModelWeights& w, const Dataset& shard, double l2) {
  check_shapes(w, shard);
  if (!shard.features.allFinite()) throw std::invalid_argument("non-finite features");
  LossGrad out = data_loss_and_grad(w, shard);
  if (l2 != 0.0) {
    out.loss += 0.5 * l2 * w.squaredNorm();
    out.grad += l2 * w;
  }
  return out;
}

double accuracy(const ModelWeights& w, const Dataset& shard) {
  check_shapes(w, shard);
  const Eigen::MatrixXd z = logits(w, shard);
  std::size_t hits = 0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    Eigen::Index arg = 0;
    z.row(i).maxCoeff(&arg);
    if (arg == shard.labels[static_cast<std::size_t>(i)]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(shard.size());
}

double lipschitz_bound(const Dataset& shard, double l2) {
  const double max_row = shard.features.rowwise().squaredNorm().maxCoeff() + 1.0;
  return 0.25 * max_row + l2;
}

void SolverConfig::validate() const {
  if (!(l2_reg >= 0.0) || !std::isfinite(l2_reg)) throw std::invalid_argument("l2_reg must be >= 0");
  if (max_local_iters < 1) throw std::invalid_argument("max_local_iters must be >= 1");
}

LocalResult local_solve(const ModelWeights& start, const Dataset& shard, double theta,
                        const SolverConfig& cfg, const std::optional<Proximal>& prox) {
  if (!(theta > 0.0 && theta < 1.0)) throw std::domain_error("local_solve: theta must lie in (0, 1)");
  const double mu = prox ? prox->mu : 0.0;
  if (!(cfg.l2_reg + mu > 0.0)) {
    throw std::invalid_argument("local_solve: the theta stopping rule needs l2_reg > 0 or mu > 0");
  }

  // Local objective: data loss + l2 term + optional proximal term.
  auto evaluate = [&](const ModelWeights& w) {
    LossGrad lg = loss_and_grad(w, shard, cfg.l2_reg);
    if (prox) {
      const ModelWeights diff = w - prox->anchor;
      lg.loss += 0.5 * mu * diff.squaredNorm();
      lg.grad += mu * diff;
    }
    return lg;
  };

  LocalResult out;
  out.weights = start;
  LossGrad current = evaluate(out.weights);
  out.start_loss = current.loss - 0.5 * cfg.l2_reg * start.squaredNorm();
  if (prox) out.start_loss -= 0.5 * mu * (start - prox->anchor).squaredNorm();
  if (cfg.record_objective) out.objective.push_back(current.loss);

  const double initial_norm = current.grad.norm();
  if (initial_norm == 0.0) return out;

  const double step = 1.0 / (lipschitz_bound(shard, cfg.l2_reg) + mu);
  const double target = theta * initial_norm;
  double norm = initial_norm;
  while (out.iterations < cfg.max_local_iters && norm > target) {
    out.weights -= step * current.grad;
    current = evaluate(out.weights);
    norm = current.grad.norm();
    ++out.iterations;
    if (cfg.record_objective) out.objective.push_back(current.loss);
  }
  out.ratio = norm / initial_norm;
  out.hit_cap = norm > target;
  return out;
}

void AggregatorKind::validate() const {
  if (!(mu >= 0.0) || !std::isfinite(mu)) throw std::invalid_argument("mu must be finite and >= 0");
  if (!(q >= 0.0) || !std::isfinite(q)) throw std::invalid_argument("q must be finite and >= 0");
}

Aggregate aggregate(std::span<const ClientUpdate> updates, const AggregatorKind& kind) {
  kind.validate();
  if (updates.empty()) throw std::invalid_argument("aggregate: no updates");
  const auto rows = updates.front().weights.rows();
  const auto cols = updates.front().weights.cols();

  Aggregate out;
  std::vector<double> raw(updates.size());
  auto normalize = [&](auto&& score) {
    double total = 0.0;
    for (std::size_t k = 0; k < updates.size(); ++k) total += (raw[k] = score(updates[k]));
    return total;
  };
  auto by_size = [](const ClientUpdate& u) { return u.shard_size; };

  double total = 0.0;
  if (kind.type == AggregatorKind::Type::FairWeighted) {
    total = normalize([&](const ClientUpdate& u) { return u.shard_size * std::pow(u.local_loss, kind.q); });
    if (!(total > 0.0) || !std::isfinite(total)) {
      out.fell_back = true;
      total = normalize(by_size);
    }
  } else {
    total = normalize(by_size);
  }
  if (!(total > 0.0)) throw std::invalid_argument("aggregate: shard sizes must be positive");

  out.weights = ModelWeights::Zero(rows, cols);
  out.coefficients.resize(updates.size());
  for (std::size_t k = 0; k < updates.size(); ++k) {
    const auto& u = updates[k];
    if (u.weights.rows() != rows || u.weights.cols() != cols) {
      throw std::invalid_argument("aggregate: inconsistent weight dimensions");
    }
    if (!(u.shard_size >= 0.0) || !(u.local_loss >= 0.0)) {
      throw std::invalid_argument("aggregate: sizes and losses must be >= 0");
    }
    out.coefficients[k] = raw[k] / total;
    out.weights += out.coefficients[k] * u.weights;
  }
  return out;
}

void TrainConfig::validate() const {
  aggregator.validate();
  solver.validate();
  if (!(eps_global > 0.0)) throw std::invalid_argument("eps_global must be > 0");
  if (max_rounds < 1) throw std::invalid_argument("max_rounds must be >= 1");
  if (!(time_scale >= 0.0)) throw std::invalid_argument("time_scale must be >= 0");
}

LossGrad global_loss_and_grad(const ModelWeights& w, std::span<const Dataset> shards, double l2) {
  double total = 0.0;
  for (const auto& s : shards) total += static_cast<double>(s.size());
  LossGrad out;
  out.grad = ModelWeights::Zero(w.rows(), w.cols());
  for (const auto& s : shards) {
    check_shapes(w, s);
    const LossGrad part = data_loss_and_grad(w, s);
    const double share = static_cast<double>(s.size()) / total;
    out.loss += share * part.loss;
    out.grad += share * part.grad;
  }
  out.loss += 0.5 * l2 * w.squaredNorm();
  out.grad += l2 * w;
  return out;
}

namespace {

double global_accuracy(const ModelWeights& w, std::span<const Dataset> shards) {
  double hits = 0.0;
  double total = 0.0;
  for (const auto& s : shards) {
    hits += accuracy(w, s) * static_cast<double>(s.size());
    total += static_cast<double>(s.size());
  }
  return hits / total;
}

}  // namespace

TrainResult train_federated(std::span<const Dataset> shards, std::span<const double> thetas,
                            const TrainConfig& cfg) {
  cfg.validate();
  if (shards.empty() || shards.size() != thetas.size()) {
    throw std::invalid_argument("train_federated: need one theta per shard and at least one shard");
  }
  if (!cfg.timing.empty() && cfg.timing.size() != shards.size()) {
    throw std::invalid_argument("train_federated: timing must be empty or one entry per shard");
  }
  for (const auto& s : shards) {
    if (s.num_classes != shards.front().num_classes || s.dim() != shards.front().dim()) {
      throw std::invalid_argument("train_federated: shards disagree on classes or features");
    }
  }

  const std::size_t clients = shards.size();
  const double l2 = cfg.solver.l2_reg;
  TrainResult result;
  result.weights = zero_weights(shards.front().num_classes, shards.front().dim());

  if (global_loss_and_grad(result.weights, shards, l2).grad.norm() <= cfg.eps_global) {
    result.converged = true;
    return result;
  }

  const bool proximal = cfg.aggregator.type == AggregatorKind::Type::FedProx;
  std::vector<LocalResult> local(clients);
  for (std::size_t round = 1; round <= cfg.max_rounds; ++round) {
    const ModelWeights broadcast = result.weights;
    std::optional<Proximal> prox;
    if (proximal) prox = Proximal{cfg.aggregator.mu, broadcast};

    try {
      parallel_for(clients, cfg.workers, [&](std::size_t k) {
        local[k] = local_solve(broadcast, shards[k], thetas[k], cfg.solver, prox);
      });
    } catch (const std::invalid_argument& e) {
      // Shapes were checked up front, so this is a local solve that diverged.
      result.aborted = true;
      result.diagnostic = "local solve failed in round " + std::to_string(round) + ": " + e.what();
      return result;
    }

    std::vector<ClientUpdate> updates;
    updates.reserve(clients);
    RoundRecord rec;
    rec.round = round;
    for (std::size_t k = 0; k < clients; ++k) {
      updates.push_back({local[k].weights, static_cast<double>(shards[k].size()), local[k].start_loss});
      rec.local_iters.push_back(local[k].iterations);
      rec.ratios.push_back(local[k].ratio);
      rec.targets.push_back(thetas[k]);
      rec.hit_cap.push_back(local[k].hit_cap);
      if (!cfg.timing.empty()) {
        const auto& t = cfg.timing[k];
        rec.sim_time = std::max(rec.sim_time, static_cast<double>(local[k].iterations) * t.iter_time +
                                                  t.comm_time * cfg.time_scale);
      }
    }
    result.weights = aggregate(updates, cfg.aggregator).weights;

    if (!result.weights.allFinite()) {
      result.aborted = true;
      result.diagnostic = "non-finite global weights after round " + std::to_string(round);
      result.rounds.push_back(std::move(rec));
      return result;
    }

    const LossGrad global = global_loss_and_grad(result.weights, shards, l2);
    rec.global_loss = global.loss;
    rec.grad_norm = global.grad.norm();
    rec.global_accuracy = global_accuracy(result.weights, shards);
    result.rounds.push_back(std::move(rec));
    if (result.rounds.back().grad_norm <= cfg.eps_global) {
      result.converged = true;
      break;
    }
  }
  return result;
}

}  // namespace fedbargain
