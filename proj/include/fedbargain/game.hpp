#pragma once

// Two-level Stackelberg incentive game. The base station (leader) offers a
// reward per unit of contributed accuracy; each device (follower) picks its
// local relative accuracy theta to maximize reward minus session cost.

#include <cstddef>
#include <span>
#include <vector>

#include "fedbargain/cost.hpp"

namespace fedbargain {

struct GameConfig {
  AccuracyLaw law;
  double reward_min = 0.0;
  double reward_max = 20.0;
  double beta = 100.0;      // leader benefit scale
  double kappa_acc = 10.0;  // leader benefit curvature
  double follower_tol = 1e-6;
  std::size_t leader_grid = 256;
  std::size_t max_interaction_rounds = 20;

  void validate() const;
};

struct BestResponse {
  double theta = 0.0;
  double utility = 0.0;
  /// Set when the coarse grid beat golden-section search and the dense-grid
  /// refinement produced the answer.
  bool used_fallback = false;
};

struct TraceEntry {
  std::size_t round = 0;
  double reward = 0.0;
  std::vector<double> thetas;
  double leader_utility = 0.0;
};

struct StackelbergOutcome {
  double reward_star = 0.0;
  std::vector<double> theta_star;
  double leader_utility = 0.0;
  std::vector<double> payments;
  std::vector<TraceEntry> trace;
  bool converged = true;
};

/// Number of coarse and dense grid points used to cross-check the follower
/// golden-section search.
inline constexpr std::size_t kCoarseGridPoints = 64;
inline constexpr std::size_t kDenseGridPoints = 4096;

/// r*(1-theta) - session_cost(p, theta, law).
double ue_utility(const UeProfile& p, double theta, double reward, const AccuracyLaw& law);

/// Utility-maximizing theta in [theta_min, theta_max]. Throws
/// std::invalid_argument when reward lies outside [reward_min, reward_max].
BestResponse best_response(const UeProfile& p, double reward, const GameConfig& cfg);

/// Independent best responses, in profile order. Followers do not interact, so
/// this is the unique lower-level Nash equilibrium.
std::vector<double> nash_lower_level(std::span<const UeProfile> profiles, double reward,
                                     const GameConfig& cfg, unsigned workers = 1);

/// beta*ln(1 + kappa_acc*(1 - max theta)) - reward*sum(1 - theta_k).
double bs_utility(std::span<const UeProfile> profiles, double reward,
                  std::span<const double> thetas, const GameConfig& cfg);

/// Leader objective with followers playing best responses.
double leader_value(std::span<const UeProfile> profiles, double reward, const GameConfig& cfg,
                    unsigned workers = 1);

/// Backward induction: grid search over the reward interval followed by a
/// golden-section refinement around the best cell. Ties favour smaller reward.
StackelbergOutcome leader_optimize(std::span<const UeProfile> profiles, const GameConfig& cfg,
                                   unsigned workers = 1);

/// Round-by-round leader/follower exchange starting from the midpoint reward.
/// Non-convergence is reported through `converged == false`, never thrown.
StackelbergOutcome interaction_loop(std::span<const UeProfile> profiles, const GameConfig& cfg,
                                    unsigned workers = 1);

}  // namespace fedbargain
