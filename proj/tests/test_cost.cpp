#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "fedbargain/cost.hpp"
#include "oracles.hpp"

using namespace fedbargain;

namespace {

UeProfile unit_profile() {
  UeProfile p;
  p.eff_capacitance = 1;
  p.cycles_per_sample = 1;
  p.data_size = 1;
  p.cpu_freq = 1;
  p.comm_time_norm = 0.5;
  p.weight_energy = 1;
  p.weight_time = 1;
  p.cost_sensitivity = 1;
  return p;
}

}  // namespace

TEST_CASE("local_iter_time is C*D/f") {
  UeProfile p;
  p.cycles_per_sample = 10;
  p.data_size = 5;
  p.cpu_freq = 25;
  CHECK(local_iter_time(p) == doctest::Approx(2.0));

  UeProfile q = unit_profile();
  CHECK(local_iter_time(q) == 1.0);

  std::mt19937_64 rng(1);
  for (int i = 0; i < 20; ++i) {
    UeProfile r = oracle::random_profile(rng);
    const double t = local_iter_time(r);
    r.cpu_freq *= 2;
    CHECK(local_iter_time(r) == doctest::Approx(t / 2).epsilon(1e-14));
  }
}

TEST_CASE("local_iter_energy is kappa*C*D*f^2") {
  UeProfile p;
  p.eff_capacitance = 2;
  p.cycles_per_sample = 10;
  p.data_size = 5;
  p.cpu_freq = 3;
  CHECK(local_iter_energy(p) == doctest::Approx(900.0));

  UeProfile q = unit_profile();
  CHECK(local_iter_energy(q) == 1.0);
  q.cpu_freq = 2;
  CHECK(local_iter_energy(q) == 4.0);
}

TEST_CASE("energy-time product grows linearly in f") {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 20; ++i) {
    const UeProfile p = oracle::random_profile(rng);
    const double cd = p.cycles_per_sample * p.data_size;
    const double expected = p.eff_capacitance * cd * cd * p.cpu_freq;
    CHECK(local_iter_energy(p) * local_iter_time(p) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("local_iterations law") {
  AccuracyLaw law;
  law.nu = 10;
  CHECK(local_iterations(1.0, law) == 0.0);
  CHECK(local_iterations(std::exp(-1.0), law) == doctest::Approx(10.0).epsilon(1e-14));
  law.nu = 5;
  CHECK(local_iterations(0.25, law) == doctest::Approx(6.93147180559945309).epsilon(1e-14));

  CHECK_THROWS_AS(local_iterations(0.0, law), std::domain_error);
  CHECK_THROWS_AS(local_iterations(1.5, law), std::domain_error);
  CHECK_THROWS_AS(local_iterations(-0.1, law), std::domain_error);
}

TEST_CASE("global_rounds law") {
  AccuracyLaw law;
  law.a = 1;
  CHECK(global_rounds(0.5, law) == 2.0);
  law.a = 7;
  CHECK(global_rounds(1e-12, law) == doctest::Approx(7.0));
  law.a = 2;
  CHECK(global_rounds(0.9, law) == doctest::Approx(20.0).epsilon(1e-14));
  CHECK_THROWS_AS(global_rounds(1.0, law), std::domain_error);
  CHECK_THROWS_AS(global_rounds(1.2, law), std::domain_error);
}

TEST_CASE("local and global laws trade off in opposite directions") {
  const AccuracyLaw law;
  for (int i = 0; i < 200; ++i) {
    const double t1 = law.theta_min + (law.theta_max - law.theta_min) * i / 200.0;
    const double t2 = t1 + (law.theta_max - law.theta_min) / 200.0;
    CHECK(local_iterations(t1, law) > local_iterations(t2, law));
    CHECK(global_rounds(t1, law) < global_rounds(t2, law));
  }
}

TEST_CASE("per_round_cost") {
  const UeProfile p = unit_profile();
  AccuracyLaw law;
  law.nu = 1;
  CHECK(per_round_cost(p, 1.0, law) == communication_cost(p));
  CHECK(per_round_cost(p, std::exp(-1.0), law) == doctest::Approx(2.5).epsilon(1e-14));

  UeProfile free = p;
  free.weight_energy = 0;
  free.weight_time = 0;
  for (double t : {0.01, 0.3, 0.99}) CHECK(per_round_cost(free, t, law) == 0.0);
}

TEST_CASE("session_cost") {
  UeProfile p = unit_profile();
  AccuracyLaw law;
  law.nu = 1;
  law.a = 1;
  CHECK(session_cost(p, std::exp(-1.0), law) ==
        doctest::Approx(3.95494176717331606).epsilon(1e-13));

  UeProfile idle = p;
  idle.cost_sensitivity = 0;
  for (double t : {0.01, 0.5, 0.99}) CHECK(session_cost(idle, t, law) == 0.0);

  // Divergence as theta -> 1 with positive communication cost.
  CHECK(session_cost(p, 1 - 1e-9, law) > 1e8);

  // Linear in lambda.
  std::mt19937_64 rng(3);
  for (int i = 0; i < 20; ++i) {
    UeProfile q = oracle::random_profile(rng);
    const double t = 0.05 + 0.9 * i / 20.0;
    const double base = session_cost(q, t, law);
    q.cost_sensitivity *= 2;
    CHECK(session_cost(q, t, law) == doctest::Approx(2 * base).epsilon(1e-14));
  }
}

TEST_CASE("session_cost is continuous on the theta range") {
  const UeProfile p = unit_profile();
  const AccuracyLaw law;
  const double h = 1e-9;
  for (int i = 1; i < 100; ++i) {
    const double t = law.theta_min + (law.theta_max - law.theta_min) * i / 100.0;
    CHECK(std::abs(session_cost(p, t + h, law) - session_cost(p, t, law)) < 1e-4);
  }
}

TEST_CASE("profile validation names the field") {
  UeProfile p;
  CHECK_NOTHROW(p.validate());
  p.comm_time_norm = 1.5;
  try {
    p.validate();
    FAIL("expected invalid_argument");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("comm_time_norm") != std::string::npos);
  }
  UeProfile q;
  q.weight_energy = 0;
  q.weight_time = 0;
  CHECK_THROWS_AS(q.validate(), std::invalid_argument);
  UeProfile r;
  r.cpu_freq = 0;
  CHECK_THROWS_AS(r.validate(), std::invalid_argument);

  AccuracyLaw law;
  law.theta_min = 0.5;
  law.theta_max = 0.4;
  CHECK_THROWS_AS(law.validate(), std::invalid_argument);
}
