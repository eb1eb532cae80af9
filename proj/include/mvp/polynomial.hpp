#pragma once

// Thrust-command polynomial F(u) = sum a_i u^i and its inverse on a
// monotone command interval.

#include <Eigen/Dense>
#include <boost/math/tools/toms748_solve.hpp>
#include <unsupported/Eigen/Polynomials>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace mvp {

inline double command_to_force(std::span<const double> poly, double u) {
  double f = 0.0;
  for (auto it = poly.rbegin(); it != poly.rend(); ++it) f = f * u + *it;
  return f;
}

inline std::vector<double> derivative(std::span<const double> poly) {
  std::vector<double> d;
  for (std::size_t i = 1; i < poly.size(); ++i) d.push_back(static_cast<double>(i) * poly[i]);
  return d;
}

/// True when the polynomial is strictly monotone on [lo, hi]. Works from the
/// real roots of the derivative: the derivative must keep one sign on every
/// sub-interval they split [lo, hi] into.
inline bool is_strictly_monotone(std::span<const double> poly, double lo, double hi) {
  if (!(lo < hi)) return false;
  std::vector<double> d = derivative(poly);
  while (!d.empty() && d.back() == 0.0) d.pop_back();
  if (d.empty()) return false;

  std::vector<double> cuts{lo, hi};
  if (d.size() > 1) {
    Eigen::PolynomialSolver<double, Eigen::Dynamic> solver;
    solver.compute(Eigen::Map<const Eigen::VectorXd>(d.data(), static_cast<Eigen::Index>(d.size())));
    std::vector<double> roots;
    solver.realRoots(roots, 1e-8);
    for (double r : roots)
      if (r > lo && r < hi) cuts.push_back(r);
  }
  std::sort(cuts.begin(), cuts.end());

  int sign = 0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double mid = 0.5 * (cuts[i] + cuts[i + 1]);
    const double slope = command_to_force(d, mid);
    const int s = slope > 0.0 ? 1 : (slope < 0.0 ? -1 : 0);
    if (s == 0 || (sign != 0 && s != sign)) return false;
    sign = s;
  }
  return sign != 0;
}

struct CommandResult {
  double command = 0.0;
  bool saturated = false;
};

/// Inverts a polynomial that is strictly monotone on [command_min,
/// command_max]. Forces outside the reachable range clamp to the nearest
/// command bound and report saturation.
inline CommandResult force_to_command(std::span<const double> poly, double force,
                                      double command_min, double command_max) {
  const double f_lo = command_to_force(poly, command_min);
  const double f_hi = command_to_force(poly, command_max);
  const bool increasing = f_hi > f_lo;
  const double reach_lo = std::min(f_lo, f_hi);
  const double reach_hi = std::max(f_lo, f_hi);

  if (force <= reach_lo)
    return {increasing ? command_min : command_max, force < reach_lo};
  if (force >= reach_hi)
    return {increasing ? command_max : command_min, force > reach_hi};

  auto residual = [&](double u) { return command_to_force(poly, u) - force; };
  std::uintmax_t max_iter = 200;
  auto [a, b] = boost::math::tools::toms748_solve(
      residual, command_min, command_max, f_lo - force, f_hi - force,
      boost::math::tools::eps_tolerance<double>(52), max_iter);
  const double u = std::abs(residual(a)) <= std::abs(residual(b)) ? a : b;
  return {u, false};
}

}  // namespace mvp
