#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <stdexcept>

#include "fedbargain/game.hpp"
#include "fedbargain/harness.hpp"
#include "fedbargain/scalar_search.hpp"
#include "oracles.hpp"

using namespace fedbargain;

namespace {

UeProfile costless() {
  UeProfile p;
  p.cost_sensitivity = 0;
  return p;
}

}  // namespace

TEST_CASE("golden section finds interior and boundary maxima") {
  auto parabola = [](double x) { return -(x - 0.3) * (x - 0.3); };
  const ScalarMax m = golden_section_maximize(parabola, 0.0, 1.0, 1e-9);
  CHECK(m.x == doctest::Approx(0.3).epsilon(1e-8));

  auto increasing = [](double x) { return x; };
  CHECK(golden_section_maximize(increasing, 0.0, 2.0, 1e-6).x == 2.0);
  auto flat = [](double) { return 1.0; };
  CHECK(golden_section_maximize(flat, 0.5, 2.0, 1e-6).x == 0.5);
}

TEST_CASE("grid maximize breaks ties toward the smaller node") {
  auto flat = [](double) { return 0.0; };
  CHECK(grid_maximize(flat, 1.0, 5.0, 9).x == 1.0);
  auto step = [](double x) { return x >= 2.0 ? 1.0 : 0.0; };
  CHECK(grid_maximize(step, 0.0, 4.0, 5).x == 2.0);
}

TEST_CASE("checked maximize falls back on a bimodal function") {
  // Narrow tall peak near 0.9 that golden search brackets away from.
  auto bimodal = [](double x) {
    return std::exp(-50.0 * (x - 0.2) * (x - 0.2)) + 2.0 * std::exp(-2000.0 * (x - 0.9) * (x - 0.9));
  };
  const ScalarMax golden = golden_section_maximize(bimodal, 0.0, 1.0, 1e-6);
  CHECK(golden.x == doctest::Approx(0.2).epsilon(1e-3));

  const CheckedMax checked = checked_maximize(bimodal, 0.0, 1.0, 1e-6, 1e-5, 64, 4096);
  CHECK(checked.used_fallback);
  CHECK(checked.best.x == doctest::Approx(0.9).epsilon(1e-4));

  auto smooth = [](double x) { return -(x - 0.4) * (x - 0.4); };
  CHECK_FALSE(checked_maximize(smooth, 0.0, 1.0, 1e-6, 1e-5, 64, 4096).used_fallback);
}

TEST_CASE("ue_utility") {
  AccuracyLaw law;
  const UeProfile free = costless();
  CHECK(ue_utility(free, 0.3, 5.0, law) == doctest::Approx(5.0 * 0.7));

  std::mt19937_64 rng(11);
  for (int i = 0; i < 10; ++i) {
    const UeProfile p = oracle::random_profile(rng);
    const double t = 0.05 + 0.09 * i;
    CHECK(ue_utility(p, t, 0.0, law) == doctest::Approx(-session_cost(p, t, law)));
    CHECK(ue_utility(p, t, 0.0, law) <= 0.0);
  }

  UeProfile p;
  p.eff_capacitance = p.cycles_per_sample = p.data_size = p.cpu_freq = 1;
  p.comm_time_norm = 0.5;
  law.nu = 1;
  law.a = 1;
  CHECK(ue_utility(p, std::exp(-1.0), 10.0, law) ==
        doctest::Approx(2.36626382111226072).epsilon(1e-13));
}

TEST_CASE("best_response of a costless follower is theta_min") {
  GameConfig cfg;
  for (double r : {0.5, 3.0, 20.0}) {
    const BestResponse br = best_response(costless(), r, cfg);
    CHECK(br.theta == cfg.law.theta_min);
  }
}

TEST_CASE("best_response rejects rewards outside the bounds") {
  GameConfig cfg;
  CHECK_THROWS_AS(best_response(UeProfile{}, cfg.reward_max + 1, cfg), std::invalid_argument);
  CHECK_THROWS_AS(best_response(UeProfile{}, cfg.reward_min - 1, cfg), std::invalid_argument);
}

TEST_CASE("best_response is non-increasing in reward (grid oracle and solver)") {
  GameConfig cfg;
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> reward(cfg.reward_min, cfg.reward_max);
  for (int i = 0; i < 100; ++i) {
    const UeProfile p = oracle::random_profile(rng);
    double r1 = reward(rng);
    double r2 = reward(rng);
    if (r1 > r2) std::swap(r1, r2);
    CHECK(oracle::follower_grid(p, r2, cfg.law, 2001).theta <=
          oracle::follower_grid(p, r1, cfg.law, 2001).theta);
    CHECK(best_response(p, r2, cfg).theta <= best_response(p, r1, cfg).theta + cfg.follower_tol);
  }
}

TEST_CASE("best_response is non-increasing in communication time") {
  GameConfig cfg;
  std::mt19937_64 rng(22);
  for (int i = 0; i < 100; ++i) {
    UeProfile p1 = oracle::random_profile(rng);
    UeProfile p2 = p1;
    std::uniform_real_distribution<double> tau(0.01, 1.0);
    p1.comm_time_norm = tau(rng);
    p2.comm_time_norm = tau(rng);
    if (p1.comm_time_norm > p2.comm_time_norm) std::swap(p1, p2);
    const double r = 10.0;
    CHECK(oracle::follower_grid(p2, r, cfg.law, 2001).theta <=
          oracle::follower_grid(p1, r, cfg.law, 2001).theta);
    CHECK(best_response(p2, r, cfg).theta <= best_response(p1, r, cfg).theta + cfg.follower_tol);
  }
}

TEST_CASE("best_response matches the dense grid oracle") {
  GameConfig cfg;
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> reward(cfg.reward_min, cfg.reward_max);
  for (int i = 0; i < 100; ++i) {
    const UeProfile p = oracle::random_profile(rng);
    const double r = reward(rng);
    const auto dense = oracle::follower_grid(p, r, cfg.law, kDenseGridPoints);
    CHECK(best_response(p, r, cfg).utility >= dense.utility - 10 * cfg.follower_tol);
  }
}

TEST_CASE("follower argmax is invariant to scaling reward and lambda together") {
  GameConfig cfg;
  std::mt19937_64 rng(24);
  for (int i = 0; i < 30; ++i) {
    UeProfile p = oracle::random_profile(rng);
    const double r = 1.0 + 9.0 * i / 30.0;
    const double base = oracle::follower_grid(p, r, cfg.law, 2001).theta;
    p.cost_sensitivity *= 2.0;
    CHECK(oracle::follower_grid(p, 2.0 * r, cfg.law, 2001).theta == base);
  }
}

TEST_CASE("nash_lower_level") {
  GameConfig cfg;
  const UeProfile single;
  const std::vector<UeProfile> one{single};
  CHECK(nash_lower_level(one, 7.0, cfg) == std::vector<double>{best_response(single, 7.0, cfg).theta});

  const std::vector<UeProfile> twins(3, UeProfile{});
  const auto same = nash_lower_level(twins, 7.0, cfg);
  CHECK(same[0] == same[1]);
  CHECK(same[1] == same[2]);

  CHECK_THROWS_AS(nash_lower_level(std::vector<UeProfile>{}, 1.0, cfg), std::invalid_argument);

  // Default scenario: distinct answers ordered like the per-iteration cost.
  const ScenarioConfig sc = default_scenario();
  const double r = 10.0;
  const auto thetas = nash_lower_level(sc.ues, r, sc.game);
  CHECK(std::set<double>(thetas.begin(), thetas.end()).size() == thetas.size());
  const double cell = (sc.game.law.theta_max - sc.game.law.theta_min) / 4095.0;
  for (std::size_t k = 0; k < thetas.size(); ++k) {
    CHECK(std::abs(thetas[k] - oracle::follower_grid(sc.ues[k], r, sc.game.law, 4096).theta) <= cell);
    for (std::size_t j = 0; j < thetas.size(); ++j) {
      if (iteration_cost(sc.ues[k]) < iteration_cost(sc.ues[j])) CHECK(thetas[k] < thetas[j]);
    }
  }

  // Parallel evaluation assembles results in profile order.
  CHECK(nash_lower_level(sc.ues, r, sc.game, 4) == thetas);
}

TEST_CASE("bs_utility") {
  GameConfig cfg;
  cfg.beta = 1;
  cfg.kappa_acc = 1;
  const std::vector<UeProfile> two(2);
  const std::vector<double> half{0.5, 0.5};
  CHECK(bs_utility(two, 0.1, half, cfg) == doctest::Approx(0.305465108108164382).epsilon(1e-14));
  CHECK(bs_utility(two, 0.0, half, cfg) == doctest::Approx(std::log(1.5)));

  cfg.kappa_acc = 1e-12;
  const std::vector<double> worst{cfg.law.theta_max, cfg.law.theta_max};
  CHECK(bs_utility(two, 2.0, worst, cfg) ==
        doctest::Approx(-2.0 * 2 * (1 - cfg.law.theta_max)).epsilon(1e-9));

  // The benefit is driven by the worst follower.
  cfg.kappa_acc = 1;
  const std::vector<double> mixed{0.2, 0.5};
  CHECK(bs_utility(two, 0.0, mixed, cfg) == doctest::Approx(std::log(1.5)));

  const std::vector<double> bad{0.5, 1.0};
  CHECK_THROWS_AS(bs_utility(two, 0.0, bad, cfg), std::invalid_argument);
}

TEST_CASE("leader_optimize degenerate leaders pick the minimum reward") {
  GameConfig cfg;
  cfg.reward_min = 1.0;
  const ScenarioConfig sc = default_scenario();

  GameConfig tiny = cfg;
  tiny.beta = 1e-12;
  CHECK(leader_optimize(sc.ues, tiny).reward_star == tiny.reward_min);

  const std::vector<UeProfile> free{costless()};
  const StackelbergOutcome out = leader_optimize(free, cfg);
  CHECK(out.reward_star == cfg.reward_min);
  CHECK(out.theta_star[0] == cfg.law.theta_min);
  CHECK_FALSE(out.trace.empty());
}

TEST_CASE("leader_optimize on the default scenario") {
  const ScenarioConfig sc = default_scenario();
  const StackelbergOutcome a = leader_optimize(sc.ues, sc.game);
  CHECK(a.reward_star > sc.game.reward_min);
  CHECK(a.reward_star < sc.game.reward_max);
  for (std::size_t k = 0; k < a.theta_star.size(); ++k) {
    CHECK(a.theta_star[k] >= sc.game.law.theta_min);
    CHECK(a.theta_star[k] <= sc.game.law.theta_max);
    CHECK(a.payments[k] == doctest::Approx(a.reward_star * (1 - a.theta_star[k])));
    CHECK(a.payments[k] >= 0);
  }

  // Bit-for-bit deterministic, regardless of worker count.
  const StackelbergOutcome b = leader_optimize(sc.ues, sc.game, 3);
  CHECK(a.reward_star == b.reward_star);
  CHECK(a.theta_star == b.theta_star);
  CHECK(a.leader_utility == b.leader_utility);

  // The refined optimum is at least as good as every grid node.
  for (int i = 0; i < 256; ++i) {
    const double r = sc.game.reward_min + (sc.game.reward_max - sc.game.reward_min) * i / 255.0;
    CHECK(leader_value(sc.ues, r, sc.game) <= a.leader_utility + 1e-9);
  }
}

TEST_CASE("interaction_loop") {
  GameConfig cfg;
  const std::vector<UeProfile> free{costless()};
  const StackelbergOutcome single = interaction_loop(free, cfg);
  CHECK(single.converged);
  CHECK(single.trace.size() <= 2);
  CHECK(single.reward_star == cfg.reward_min);
  CHECK(single.trace.front().reward == doctest::Approx(0.5 * (cfg.reward_min + cfg.reward_max)));

  const ScenarioConfig sc = default_scenario();
  const StackelbergOutcome loop = interaction_loop(sc.ues, sc.game);
  const StackelbergOutcome direct = leader_optimize(sc.ues, sc.game);
  CHECK(loop.converged);
  CHECK(loop.trace.size() <= sc.game.max_interaction_rounds);
  CHECK(std::abs(loop.trace.back().leader_utility - direct.leader_utility) <= sc.game.follower_tol);
  CHECK(std::abs(loop.reward_star - direct.reward_star) <=
        sc.game.follower_tol * (sc.game.reward_max - sc.game.reward_min));

  const std::vector<UeProfile> twins(4, sc.ues[2]);
  for (const auto& entry : interaction_loop(twins, sc.game).trace) {
    CHECK(std::all_of(entry.thetas.begin(), entry.thetas.end(),
                      [&](double t) { return t == entry.thetas.front(); }));
  }

  GameConfig capped = sc.game;
  capped.max_interaction_rounds = 1;
  const StackelbergOutcome cut = interaction_loop(sc.ues, capped);
  CHECK_FALSE(cut.converged);
  CHECK(cut.trace.size() == 1);
}
