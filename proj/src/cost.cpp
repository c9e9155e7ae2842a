#include "fedbargain/cost.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace fedbargain {

namespace {

void require_positive(double v, const char* field) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw std::invalid_argument(std::string(field) + " must be finite and > 0");
  }
}

void require_nonnegative(double v, const char* field) {
  if (!(v >= 0.0) || !std::isfinite(v)) {
    throw std::invalid_argument(std::string(field) + " must be finite and >= 0");
  }
}

}  // namespace

void UeProfile::validate() const {
  require_positive(cpu_freq, "cpu_freq");
  require_positive(eff_capacitance, "eff_capacitance");
  require_positive(cycles_per_sample, "cycles_per_sample");
  if (!(data_size >= 1.0) || !std::isfinite(data_size)) {
    throw std::invalid_argument("data_size must be >= 1");
  }
  if (!(comm_time_norm > 0.0 && comm_time_norm <= 1.0)) {
    throw std::invalid_argument("comm_time_norm must lie in (0, 1]");
  }
  require_nonnegative(weight_energy, "weight_energy");
  require_nonnegative(weight_time, "weight_time");
  if (weight_energy == 0.0 && weight_time == 0.0) {
    throw std::invalid_argument("weight_energy and weight_time must not both be zero");
  }
  require_nonnegative(cost_sensitivity, "cost_sensitivity");
}

void AccuracyLaw::validate() const {
  require_positive(nu, "nu");
  require_positive(a, "a");
  if (!(theta_min > 0.0 && theta_min < theta_max && theta_max < 1.0)) {
    throw std::invalid_argument("theta bounds must satisfy 0 < theta_min < theta_max < 1");
  }
}

double local_iter_time(const UeProfile& p) {
  return p.cycles_per_sample * p.data_size / p.cpu_freq;
}

double local_iter_energy(const UeProfile& p) {
  return p.eff_capacitance * p.cycles_per_sample * p.data_size * p.cpu_freq * p.cpu_freq;
}

double iteration_cost(const UeProfile& p) {
  return p.weight_energy * local_iter_energy(p) + p.weight_time * local_iter_time(p);
}

double communication_cost(const UeProfile& p) { return p.weight_time * p.comm_time_norm; }

double local_iterations(double theta, const AccuracyLaw& law) {
  if (!(theta > 0.0 && theta <= 1.0)) {
    throw std::domain_error("local_iterations: theta must lie in (0, 1]");
  }
  return -law.nu * std::log(theta);
}

double global_rounds(double theta, const AccuracyLaw& law) {
  if (!(theta > 0.0 && theta < 1.0)) {
    throw std::domain_error("global_rounds: theta must lie in (0, 1)");
  }
  return law.a / (1.0 - theta);
}

double per_round_cost(const UeProfile& p, double theta, const AccuracyLaw& law) {
  return iteration_cost(p) * local_iterations(theta, law) + communication_cost(p);
}

double session_cost(const UeProfile& p, double theta, const AccuracyLaw& law) {
  return p.cost_sensitivity * per_round_cost(p, theta, law) * global_rounds(theta, law);
}

}  // namespace fedbargain
