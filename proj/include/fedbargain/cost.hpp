#pragma once

// Device-level computation/communication cost model and the accuracy laws
// that map a local relative accuracy to local and global iteration counts.

namespace fedbargain {

/// One follower device (UE).
struct UeProfile {
  int id = 0;
  double cpu_freq = 1e9;           // cycles / s
  double eff_capacitance = 1e-28;  // energy per cycle = eff_capacitance * f^2
  double cycles_per_sample = 1e6;
  double data_size = 1.0;          // samples
  double comm_time_norm = 1.0;     // tau in (0, 1], 1 = worst channel
  double weight_energy = 1.0;
  double weight_time = 1.0;
  double cost_sensitivity = 1.0;   // lambda

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

struct AccuracyLaw {
  double nu = 10.0;  // local-iteration coefficient
  double a = 1.0;    // global-round coefficient
  double theta_min = 0.01;
  double theta_max = 0.99;

  void validate() const;
};

/// Seconds per local iteration: C*D/f.
double local_iter_time(const UeProfile& p);
/// Joules per local iteration: kappa*C*D*f^2.
double local_iter_energy(const UeProfile& p);

/// Weighted cost of one local iteration.
double iteration_cost(const UeProfile& p);
/// Weighted cost of one upload (once per global round).
double communication_cost(const UeProfile& p);

/// L(theta) = nu*ln(1/theta). Throws std::domain_error unless theta in (0, 1].
double local_iterations(double theta, const AccuracyLaw& law);

/// G(theta) = a/(1-theta). Throws std::domain_error for theta >= 1 or theta <= 0.
double global_rounds(double theta, const AccuracyLaw& law);

/// iteration_cost*L(theta) + communication_cost.
double per_round_cost(const UeProfile& p, double theta, const AccuracyLaw& law);

/// lambda * per_round_cost * G(theta).
double session_cost(const UeProfile& p, double theta, const AccuracyLaw& law);

}  // namespace fedbargain
