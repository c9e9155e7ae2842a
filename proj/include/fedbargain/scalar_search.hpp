#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>

namespace fedbargain {

struct ScalarMax {
  double x = 0.0;
  double value = 0.0;
};

/// Keeps the strictly better candidate; on equal values the smaller x wins.
inline ScalarMax better_of(const ScalarMax& lhs, const ScalarMax& rhs) {
  if (rhs.value > lhs.value) return rhs;
  if (rhs.value == lhs.value && rhs.x < lhs.x) return rhs;
  return lhs;
}

/// Maximizes f on the uniform grid of `points` nodes spanning [lo, hi].
/// Ties go to the smallest node.
template <typename F>
ScalarMax grid_maximize(F&& f, double lo, double hi, std::size_t points) {
  if (points < 2) throw std::invalid_argument("grid_maximize: need at least 2 points");
  ScalarMax best{lo, f(lo)};
  const double step = (hi - lo) / static_cast<double>(points - 1);
  for (std::size_t i = 1; i < points; ++i) {
    const double x = (i + 1 == points) ? hi : lo + step * static_cast<double>(i);
    const double v = f(x);
    if (v > best.value) best = {x, v};
  }
  return best;
}

/// Golden-section search for the maximum of a unimodal f on [lo, hi].
///
/// Iterates until the bracket is no wider than `tol`. The interval end points
/// are candidates too, so a maximum sitting exactly on a bound is returned
/// exactly. Ties between the two probes keep the lower sub-interval.
template <typename F>
ScalarMax golden_section_maximize(F&& f, double lo, double hi, double tol) {
  if (!(hi >= lo)) throw std::invalid_argument("golden_section_maximize: empty interval");
  if (!(tol > 0.0)) throw std::invalid_argument("golden_section_maximize: tol must be > 0");

  const ScalarMax at_lo{lo, f(lo)};
  const ScalarMax at_hi{hi, f(hi)};
  if (hi - lo <= tol) return better_of(at_lo, at_hi);

  constexpr double inv_phi = 0.6180339887498948482;  // (sqrt(5) - 1) / 2
  double a = lo;
  double b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (b - a > tol) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  ScalarMax inner = better_of({c, fc}, {d, fd});
  return better_of(better_of(at_lo, inner), at_hi);
}

struct CheckedMax {
  ScalarMax best;
  bool used_fallback = false;
};

/// Golden-section search cross-checked against a coarse grid. When the coarse
/// grid beats the golden result by more than `slack`, unimodality is assumed
/// broken: the best cell of a dense grid is refined instead.
template <typename F>
CheckedMax checked_maximize(F&& f, double lo, double hi, double tol, double slack,
                            std::size_t coarse_points, std::size_t dense_points) {
  const ScalarMax golden = golden_section_maximize(f, lo, hi, tol);
  const ScalarMax coarse = grid_maximize(f, lo, hi, coarse_points);
  if (coarse.value <= golden.value + slack) return {golden, false};

  const double step = (hi - lo) / static_cast<double>(dense_points - 1);
  const ScalarMax dense = grid_maximize(f, lo, hi, dense_points);
  const double left = std::max(lo, dense.x - step);
  const double right = std::min(hi, dense.x + step);
  return {better_of(dense, golden_section_maximize(f, left, right, tol)), true};
}

}  // namespace fedbargain
