#pragma once

// Thruster allocation: per-thruster columns of the generalized force map,
// the stacked allocation problem with box and servo-rate fan constraints,
// the QP solve, and conversion of solved forces into motor commands and
// servo angle steps.

#include "mvp/dof.hpp"
#include "mvp/frames.hpp"
#include "mvp/polynomial.hpp"
#include "mvp/qp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mvp {

/// Rows: body force (3), body torque (3), earth force (3), earth torque term (3).
using GeneralizedForce = Eigen::Matrix<double, 12, 1>;

inline constexpr double kFeasibilityTol = 1e-6;
inline constexpr double kForceDeadband = 0.05;  // N
/// Upper bound on a fan half-angle; keeps the two fan rows well separated.
inline constexpr double kMaxFanAngle = 1.4;

struct ThrusterBase {
  std::string id;
  Transform mount;  // thruster frame expressed in the body frame
  double force_min = 0.0;
  double force_max = 0.0;
  std::vector<double> poly;  // a_0 .. a_n
  double command_min = -1.0;
  double command_max = 1.0;
};

struct FixedThruster : ThrusterBase {};

/// Servo rotates the thruster about its own z axis.
struct ArticulatedThruster : ThrusterBase {
  double servo_rate = 1.0;  // rad/s
  double angle_min = -kPi;
  double angle_max = kPi;
  double current_angle = 0.0;

  /// Thruster frame at the current servo angle.
  Transform current_mount() const {
    return compose(mount, Transform{Attitude::from_euler(0.0, 0.0, current_angle), Vec3::Zero()});
  }
};

struct ThrusterSet {
  std::vector<FixedThruster> fixed;
  std::vector<ArticulatedThruster> articulated;

  Eigen::Index columns() const {
    return static_cast<Eigen::Index>(fixed.size() + 2 * articulated.size());
  }
  std::size_t size() const { return fixed.size() + articulated.size(); }
};

class AllocationError : public std::runtime_error {
 public:
  enum class Code { kEmptyDofMask, kDimensionMismatch, kInfeasible, kSolverNotConverged };
  AllocationError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

/// Body-to-earth rotation and the matrix applied to the moment rows 10-12.
struct FrameMaps {
  Mat3 earth_from_body = Mat3::Identity();
  Mat3 euler_jacobian = Mat3::Identity();

  /// Throws GimbalLock when the Jacobian is undefined.
  static FrameMaps from(const Attitude& attitude) {
    const Vec3 e = attitude.euler();
    return {attitude.matrix(), euler_rate_jacobian(e.x(), e.y())};
  }
};

/// Column for a unit force along `direction` (thruster-frame axis).
inline GeneralizedForce thruster_column(const Transform& mount, const Vec3& direction,
                                        const FrameMaps& maps) {
  const Vec3 force = mount.rotation.rotate(direction);
  const Vec3 moment = mount.translation.cross(force);
  GeneralizedForce col;
  col << force, moment, maps.earth_from_body * force, maps.euler_jacobian * moment;
  return col;
}

inline GeneralizedForce column_fixed(const FixedThruster& t, const FrameMaps& maps) {
  return thruster_column(t.mount, Vec3::UnitX(), maps);
}

inline GeneralizedForce column_fixed(const FixedThruster& t, const Attitude& attitude) {
  return column_fixed(t, FrameMaps::from(attitude));
}

/// Columns for the (X, Y) force pair in the thruster's current frame.
inline Eigen::Matrix<double, 12, 2> columns_articulated(const ArticulatedThruster& t,
                                                         const FrameMaps& maps) {
  const Transform mount = t.current_mount();
  Eigen::Matrix<double, 12, 2> cols;
  cols.col(0) = thruster_column(mount, Vec3::UnitX(), maps);
  cols.col(1) = thruster_column(mount, Vec3::UnitY(), maps);
  return cols;
}

inline Eigen::Matrix<double, 12, 2> columns_articulated(const ArticulatedThruster& t,
                                                         const Attitude& attitude) {
  return columns_articulated(t, FrameMaps::from(attitude));
}

/// Full 12-row allocation matrix; columns are fixed thrusters in order, then
/// (X, Y) pairs of articulated thrusters.
inline Eigen::MatrixXd allocation_matrix(const ThrusterSet& set, const FrameMaps& maps) {
  Eigen::MatrixXd m(12, set.columns());
  Eigen::Index c = 0;
  for (const auto& t : set.fixed) m.col(c++) = column_fixed(t, maps);
  for (const auto& t : set.articulated) {
    m.middleCols(c, 2) = columns_articulated(t, maps);
    c += 2;
  }
  return m;
}

/// Fan half-angles (below, above the current heading) the servo can sweep
/// within one controller period, tightened near the angle limits.
struct FanLimits {
  double below = 0.0;
  double above = 0.0;
};

inline FanLimits fan_limits(const ArticulatedThruster& t, double dt) {
  const double sweep = std::min(t.servo_rate * dt, kMaxFanAngle);
  return {std::clamp(t.current_angle - t.angle_min, 0.0, sweep),
          std::clamp(t.angle_max - t.current_angle, 0.0, sweep)};
}

struct AllocationProblem {
  Eigen::MatrixXd M;         // |mask| x (N + 2 M_a)
  Eigen::MatrixXd A;         // constraint rows
  Eigen::VectorXd B;
  Eigen::VectorXd tau_star;  // |mask|
  DofMask mask;
  std::size_t fixed_count = 0;
  std::size_t articulated_count = 0;
  std::vector<FanLimits> fans;
  std::vector<double> x_max;  // T_Max per articulated thruster

  Eigen::Index columns() const { return M.cols(); }
};

inline AllocationProblem build_problem(const ThrusterSet& set, const FrameMaps& maps,
                                       const DofMask& mask, const Eigen::VectorXd& tau_star,
                                       double dt) {
  if (mask.none()) throw AllocationError(AllocationError::Code::kEmptyDofMask, "empty DOF mask");
  if (static_cast<std::size_t>(tau_star.size()) != mask.count())
    throw AllocationError(AllocationError::Code::kDimensionMismatch,
                          "tau_star has " + std::to_string(tau_star.size()) + " rows, mask selects " +
                              std::to_string(mask.count()));
  if (set.columns() == 0)
    throw AllocationError(AllocationError::Code::kDimensionMismatch, "no thrusters");

  AllocationProblem p;
  p.mask = mask;
  p.tau_star = tau_star;
  p.fixed_count = set.fixed.size();
  p.articulated_count = set.articulated.size();

  const Eigen::MatrixXd full = allocation_matrix(set, maps);
  p.M.resize(static_cast<Eigen::Index>(mask.count()), full.cols());
  Eigen::Index r = 0;
  for (std::size_t i = 0; i < kDofCount; ++i)
    if (mask[i]) p.M.row(r++) = full.row(static_cast<Eigen::Index>(i));

  const Eigen::Index n = full.cols();
  const auto rows = static_cast<Eigen::Index>(2 * set.fixed.size() + 3 * set.articulated.size());
  p.A = Eigen::MatrixXd::Zero(rows, n);
  p.B = Eigen::VectorXd::Zero(rows);

  Eigen::Index row = 0;
  Eigen::Index col = 0;
  for (const auto& t : set.fixed) {
    p.A(row, col) = 1.0;
    p.B(row++) = t.force_max;
    p.A(row, col) = -1.0;
    p.B(row++) = -t.force_min;
    ++col;
  }
  for (const auto& t : set.articulated) {
    const FanLimits fan = fan_limits(t, dt);
    p.fans.push_back(fan);
    p.x_max.push_back(t.force_max);
    // X <= T_Max
    p.A(row, col) = 1.0;
    p.B(row++) = t.force_max;
    // Y <= tan(above) X
    p.A(row, col) = -std::sin(fan.above);
    p.A(row, col + 1) = std::cos(fan.above);
    p.B(row++) = 0.0;
    // Y >= -tan(below) X
    p.A(row, col) = -std::sin(fan.below);
    p.A(row, col + 1) = -std::cos(fan.below);
    p.B(row++) = 0.0;
    col += 2;
  }
  return p;
}

inline AllocationProblem build_problem(const ThrusterSet& set, const Attitude& attitude,
                                       const DofMask& mask, const Eigen::VectorXd& tau_star,
                                       double dt) {
  return build_problem(set, FrameMaps::from(attitude), mask, tau_star, dt);
}

struct ThrusterOutput {
  std::string id;
  bool articulated = false;
  double force = 0.0;    // N along the thruster axis
  double command = 0.0;  // command units
  bool saturated = false;
  double angle_delta = 0.0;  // rad, articulated only
};

struct AllocationSolution {
  Eigen::VectorXd forces;  // solved F, column order of the problem
  double residual = 0.0;   // ||tau* - M F||
  std::vector<int> active_set;
  int iterations = 0;
  std::vector<ThrusterOutput> outputs;
};

/// Previous solution used to warm-start the next solve.
struct WarmStart {
  Eigen::VectorXd forces;
  std::vector<int> active_set;
};

inline constexpr double kRegularization = 1e-9;

inline double allocation_objective(const AllocationProblem& p, const Eigen::VectorXd& f) {
  return (p.tau_star - p.M * f).squaredNorm();
}

namespace detail {

// Pulls tolerance-level violations back onto the constraint set.
inline void project_onto_constraints(const AllocationProblem& p, Eigen::VectorXd& f) {
  Eigen::Index col = 0;
  for (std::size_t k = 0; k < p.fixed_count; ++k, ++col) {
    const double hi = p.B(2 * col);
    const double lo = -p.B(2 * col + 1);
    f(col) = std::clamp(f(col), lo, hi);
  }
  for (std::size_t k = 0; k < p.articulated_count; ++k, col += 2) {
    double x = std::clamp(f(col), 0.0, p.x_max[k]);
    double y = std::clamp(f(col + 1), -std::tan(p.fans[k].below) * x, std::tan(p.fans[k].above) * x);
    if (std::hypot(x, y) < 1e-12) x = y = 0.0;
    f(col) = x;
    f(col + 1) = y;
  }
}

inline Eigen::VectorXd feasible_start(const AllocationProblem& p) {
  Eigen::VectorXd f = Eigen::VectorXd::Zero(p.columns());
  for (std::size_t k = 0; k < p.fixed_count; ++k) {
    const auto c = static_cast<Eigen::Index>(k);
    f(c) = std::clamp(0.0, -p.B(2 * c + 1), p.B(2 * c));
  }
  return f;
}

}  // namespace detail

/// Minimizes ||tau* - M F||^2 subject to A F <= B.
inline AllocationSolution solve(const AllocationProblem& p, const WarmStart* warm = nullptr) {
  qp::Problem q;
  q.H = p.M.transpose() * p.M;
  q.H.diagonal().array() += kRegularization;
  q.c = -p.M.transpose() * p.tau_star;
  q.A = p.A;
  q.b = p.B;

  Eigen::VectorXd start = detail::feasible_start(p);
  std::span<const int> hint;
  if (warm != nullptr && warm->forces.size() == p.columns() &&
      qp::max_violation(q, warm->forces) <= 1e-9) {
    start = warm->forces;
    hint = warm->active_set;
  }
  if (qp::max_violation(q, start) > 1e-9)
    throw AllocationError(AllocationError::Code::kInfeasible, "allocation constraints exclude F = 0");

  qp::Options opt;
  opt.max_iterations = 100 + 10 * static_cast<int>(q.A.rows() + q.H.rows());
  qp::Result r = qp::solve(q, start, hint, opt);
  if (r.status == qp::Status::kInfeasibleStart)
    throw AllocationError(AllocationError::Code::kInfeasible, "infeasible start point");
  if (r.status == qp::Status::kMaxIterations)
    throw AllocationError(AllocationError::Code::kSolverNotConverged,
                          "active-set solver hit " + std::to_string(opt.max_iterations) + " iterations");

  AllocationSolution s;
  s.forces = r.x;
  detail::project_onto_constraints(p, s.forces);
  s.residual = (p.tau_star - p.M * s.forces).norm();
  s.active_set = std::move(r.active_set);
  s.iterations = r.iterations;
  return s;
}

struct ArticulatedForce {
  double force = 0.0;
  double angle_delta = 0.0;
};

/// Force magnitude and servo step from the (X, Y) pair; below the deadband
/// the servo holds its angle.
inline ArticulatedForce recover_articulated(double x, double y) {
  const double f = std::hypot(x, y);
  if (f < kForceDeadband) return {0.0, 0.0};
  return {f, std::atan2(y, x)};
}

/// Converts solved forces into commands and angle steps. Does not move the
/// servos; see apply_angle_steps.
inline void assign_outputs(const ThrusterSet& set, AllocationSolution& s) {
  s.outputs.clear();
  Eigen::Index col = 0;
  for (const auto& t : set.fixed) {
    const double f = s.forces(col++);
    const CommandResult c = force_to_command(t.poly, f, t.command_min, t.command_max);
    s.outputs.push_back({t.id, false, f, c.command, c.saturated, 0.0});
  }
  for (const auto& t : set.articulated) {
    const ArticulatedForce af = recover_articulated(s.forces(col), s.forces(col + 1));
    col += 2;
    const CommandResult c = force_to_command(t.poly, af.force, t.command_min, t.command_max);
    s.outputs.push_back({t.id, true, af.force, c.command, c.saturated, af.angle_delta});
  }
}

/// Advances each articulated thruster's angle by its solved step, clamped to
/// the hardware limits.
inline void apply_angle_steps(ThrusterSet& set, const AllocationSolution& s) {
  const std::size_t offset = set.fixed.size();
  for (std::size_t k = 0; k < set.articulated.size(); ++k) {
    auto& t = set.articulated[k];
    t.current_angle = std::clamp(t.current_angle + s.outputs[offset + k].angle_delta, t.angle_min, t.angle_max);
  }
}

}  // namespace mvp
