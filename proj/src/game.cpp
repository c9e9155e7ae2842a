#include "fedbargain/game.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fedbargain/parallel.hpp"
#include "fedbargain/scalar_search.hpp"

namespace fedbargain {

void GameConfig::validate() const {
  law.validate();
  if (!(reward_min >= 0.0 && reward_min < reward_max) || !std::isfinite(reward_max)) {
    throw std::invalid_argument("reward bounds must satisfy 0 <= reward_min < reward_max");
  }
  if (!(beta > 0.0)) throw std::invalid_argument("beta must be > 0");
  if (!(kappa_acc > 0.0)) throw std::invalid_argument("kappa_acc must be > 0");
  if (!(follower_tol > 0.0)) throw std::invalid_argument("follower_tol must be > 0");
  if (leader_grid < 2) throw std::invalid_argument("leader_grid must be >= 2");
  if (max_interaction_rounds < 1) throw std::invalid_argument("max_interaction_rounds must be >= 1");
}

double ue_utility(const UeProfile& p, double theta, double reward, const AccuracyLaw& law) {
  return reward * (1.0 - theta) - session_cost(p, theta, law);
}

BestResponse best_response(const UeProfile& p, double reward, const GameConfig& cfg) {
  if (!(reward >= cfg.reward_min && reward <= cfg.reward_max)) {
    throw std::invalid_argument("best_response: reward outside [reward_min, reward_max]");
  }
  auto utility = [&](double theta) { return ue_utility(p, theta, reward, cfg.law); };
  const CheckedMax found =
      checked_maximize(utility, cfg.law.theta_min, cfg.law.theta_max, cfg.follower_tol,
                       10.0 * cfg.follower_tol, kCoarseGridPoints, kDenseGridPoints);
  return {found.best.x, found.best.value, found.used_fallback};
}

std::vector<double> nash_lower_level(std::span<const UeProfile> profiles, double reward,
                                     const GameConfig& cfg, unsigned workers) {
  if (profiles.empty()) throw std::invalid_argument("nash_lower_level: no profiles");
  std::vector<double> thetas(profiles.size());
  parallel_for(profiles.size(), workers,
               [&](std::size_t k) { thetas[k] = best_response(profiles[k], reward, cfg).theta; });
  return thetas;
}

double bs_utility(std::span<const UeProfile> profiles, double reward,
                  std::span<const double> thetas, const GameConfig& cfg) {
  if (profiles.size() != thetas.size() || thetas.empty()) {
    throw std::invalid_argument("bs_utility: one theta per profile required");
  }
  double worst = thetas.front();
  double contributed = 0.0;
  for (double theta : thetas) {
    if (!(theta >= cfg.law.theta_min && theta <= cfg.law.theta_max)) {
      throw std::invalid_argument("bs_utility: theta outside [theta_min, theta_max]");
    }
    worst = std::max(worst, theta);
    contributed += 1.0 - theta;
  }
  return cfg.beta * std::log1p(cfg.kappa_acc * (1.0 - worst)) - reward * contributed;
}

double leader_value(std::span<const UeProfile> profiles, double reward, const GameConfig& cfg,
                    unsigned workers) {
  return bs_utility(profiles, reward, nash_lower_level(profiles, reward, cfg, workers), cfg);
}

namespace {

StackelbergOutcome outcome_at(std::span<const UeProfile> profiles, double reward,
                              const GameConfig& cfg, unsigned workers) {
  StackelbergOutcome out;
  out.reward_star = reward;
  out.theta_star = nash_lower_level(profiles, reward, cfg, workers);
  out.leader_utility = bs_utility(profiles, reward, out.theta_star, cfg);
  out.payments.reserve(out.theta_star.size());
  for (double theta : out.theta_star) out.payments.push_back(reward * (1.0 - theta));
  return out;
}

/// Backward-induction argmax of the leader objective.
double optimal_reward(std::span<const UeProfile> profiles, const GameConfig& cfg,
                      unsigned workers) {
  const std::size_t n = cfg.leader_grid;
  const double lo = cfg.reward_min;
  const double hi = cfg.reward_max;
  const double step = (hi - lo) / static_cast<double>(n - 1);
  auto node = [&](std::size_t i) { return i + 1 == n ? hi : lo + step * static_cast<double>(i); };

  // Grid points are independent; each worker evaluates followers serially.
  std::vector<double> values(n);
  parallel_for(n, workers, [&](std::size_t i) { values[i] = leader_value(profiles, node(i), cfg); });

  std::size_t best = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (values[i] > values[best]) best = i;
  }

  const double left = best == 0 ? lo : node(best - 1);
  const double right = best + 1 == n ? hi : node(best + 1);
  auto objective = [&](double r) { return leader_value(profiles, r, cfg); };
  const ScalarMax refined =
      golden_section_maximize(objective, left, right, cfg.follower_tol * (hi - lo));
  return better_of({node(best), values[best]}, refined).x;
}

}  // namespace

StackelbergOutcome leader_optimize(std::span<const UeProfile> profiles, const GameConfig& cfg,
                                   unsigned workers) {
  if (profiles.empty()) throw std::invalid_argument("leader_optimize: no profiles");
  StackelbergOutcome out = outcome_at(profiles, optimal_reward(profiles, cfg, workers), cfg, workers);
  out.trace.push_back({0, out.reward_star, out.theta_star, out.leader_utility});
  return out;
}

StackelbergOutcome interaction_loop(std::span<const UeProfile> profiles, const GameConfig& cfg,
                                    unsigned workers) {
  if (profiles.empty()) throw std::invalid_argument("interaction_loop: no profiles");
  const double stop = cfg.follower_tol * (cfg.reward_max - cfg.reward_min);

  std::vector<TraceEntry> trace;
  double offered = 0.5 * (cfg.reward_min + cfg.reward_max);
  for (std::size_t round = 0; round < cfg.max_interaction_rounds; ++round) {
    // Followers answer the broadcast reward.
    StackelbergOutcome state = outcome_at(profiles, offered, cfg, workers);
    trace.push_back({round, offered, state.theta_star, state.leader_utility});

    // The leader anticipates the announced best-response map and re-offers.
    const double next = optimal_reward(profiles, cfg, workers);
    if (std::abs(next - offered) <= stop) {
      state.trace = std::move(trace);
      state.converged = true;
      return state;
    }
    offered = next;
  }

  StackelbergOutcome state = outcome_at(profiles, offered, cfg, workers);
  state.trace = std::move(trace);
  state.converged = false;
  return state;
}

}  // namespace fedbargain
