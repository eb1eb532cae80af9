#pragma once

// Per-DOF PID control with switchable control modes. Each tick turns the
// merged setpoint into a requested generalized force over the active mode's
// rows and hands it to the allocator.

#include "mvp/allocation.hpp"
#include "mvp/dof.hpp"
#include "mvp/frames.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mvp {

inline constexpr double kUnlimited = std::numeric_limits<double>::infinity();

struct PidGains {
  double kp = 0.0;
  double ki = 0.0;
  double kd = 0.0;
  double integral_limit = kUnlimited;
  double output_limit = kUnlimited;
};

struct ControlMode {
  std::string name;
  DofMask dofs;
  std::array<PidGains, kDofCount> gains{};  // meaningful for dofs in the set
};

/// Rejects masks that pair a body row with the earth row on the same axis.
inline std::optional<std::string> redundant_pair(const DofMask& dofs) {
  for (std::size_t i = 0; i < 6; ++i)
    if (dofs[i] && dofs[i + 6])
      return std::string(kDofNames[i]) + " and " + std::string(kDofNames[i + 6]);
  return std::nullopt;
}

struct PidState {
  double integral = 0.0;
  double previous_error = 0.0;
};

/// kp*e + ki*integral + kd*e_dot. The integral is clamped to
/// +-integral_limit and frozen while the output saturates in the direction
/// the error would push it.
inline double pid_step(const PidGains& g, double error, double error_rate, double dt, PidState& state) {
  const double candidate =
      std::clamp(state.integral + error * dt, -g.integral_limit, g.integral_limit);
  const double raw = g.kp * error + g.ki * candidate + g.kd * error_rate;
  const bool saturating = std::abs(raw) > g.output_limit && raw * error > 0.0;
  if (!saturating) state.integral = candidate;
  state.previous_error = error;
  const double out = g.kp * error + g.ki * state.integral + g.kd * error_rate;
  return std::clamp(out, -g.output_limit, g.output_limit);
}

/// Measured value of a DOF's controlled quantity. Depth is returned as the
/// earth-frame z coordinate so that errors point along the earth-z force row.
inline double measured_value(const Odometry& odom, Dof d) {
  const auto i = index(d);
  switch (dof_kind(d)) {
    case DofKind::kVelocity:
      return odom.twist.linear(static_cast<Eigen::Index>(i));
    case DofKind::kAngularRate:
      return odom.twist.angular(static_cast<Eigen::Index>(i - 3));
    case DofKind::kPosition:
      return odom.pose.position(static_cast<Eigen::Index>(i - 6));
    case DofKind::kAngle:
      return odom.pose.attitude.euler()(static_cast<Eigen::Index>(i - 9));
  }
  return 0.0;
}

/// Setpoint value translated into the same coordinate as measured_value.
inline double desired_value(Dof d, double setpoint, EarthFrame frame) {
  return d == Dof::kDepth ? z_from_depth(setpoint, frame) : setpoint;
}

inline double dof_error(Dof d, double desired, double measured) {
  return dof_kind(d) == DofKind::kAngle ? wrap_angle(desired - measured) : desired - measured;
}

/// Errors for every DOF of the mode that the setpoint claims. Angles wrap to
/// (-pi, pi]; depth is measured along earth z.
inline DofValues compute_errors(const DofValues& setpoint, const Odometry& odom, const ControlMode& mode,
                                EarthFrame frame) {
  DofValues errors;
  for (Dof d : kAllDofs) {
    if (!mode.dofs[index(d)] || !setpoint.contains(d)) continue;
    errors.set(d, dof_error(d, desired_value(d, setpoint.at(d), frame), measured_value(odom, d)));
  }
  return errors;
}

class UnknownMode : public std::runtime_error {
 public:
  explicit UnknownMode(const std::string& name) : std::runtime_error("unknown control mode: " + name) {}
};

struct ControlOutput {
  std::string mode;
  DofMask dofs;
  DofValues setpoint;  // effective, including holds
  DofValues errors;
  DofValues tau_star;
  DofValues integrals;
  Eigen::Index allocation_rows = 0;
  std::vector<ThrusterOutput> thrusters;
  std::vector<double> servo_angles;  // commanded angle per articulated thruster
  double residual = 0.0;
  bool enabled = true;
  bool saturated = false;
  bool gimbal = false;
  bool fault = false;
  std::string fault_reason;
};

class Controller {
 public:
  Controller(ThrusterSet thrusters, std::vector<ControlMode> modes, const std::string& initial_mode,
             EarthFrame frame, double nominal_dt)
      : thrusters_(std::move(thrusters)), frame_(frame), nominal_dt_(nominal_dt) {
    for (auto& m : modes) modes_.emplace(m.name, std::move(m));
    set_mode(initial_mode);
  }
  Controller(const Controller&) = delete;
  Controller& operator=(const Controller&) = delete;
  Controller(Controller&&) = default;
  Controller& operator=(Controller&&) = default;

  /// Resets integrals of DOFs the new mode drops. Same mode is a no-op.
  void set_mode(const std::string& name) {
    auto it = modes_.find(name);
    if (it == modes_.end()) throw UnknownMode(name);
    if (active_ == &it->second) return;
    for (std::size_t i = 0; i < kDofCount; ++i)
      if (!it->second.dofs[i]) pid_[i] = PidState{};
    active_ = &it->second;
  }

  void set_enabled(bool on) { enabled_ = on; }
  bool enabled() const { return enabled_; }

  const ControlMode& mode() const { return *active_; }
  const PidState& pid_state(Dof d) const { return pid_[index(d)]; }
  const ThrusterSet& thrusters() const { return thrusters_; }
  EarthFrame frame() const { return frame_; }
  double nominal_dt() const { return nominal_dt_; }

  ControlOutput tick(const Odometry& odom, const DofValues& setpoint, double dt) {
    ControlOutput out;
    out.mode = active_->name;
    out.dofs = active_->dofs;
    out.enabled = enabled_;

    if (!enabled_) {
      zero_output(out);
      remember_measurements(odom);
      return out;
    }
    if (!(dt >= 0.5 * nominal_dt_ && dt <= 2.0 * nominal_dt_)) {
      fault(out, "control period " + std::to_string(dt) + " s outside [0.5, 2] x nominal");
      return out;
    }

    const Vec3 euler = odom.pose.attitude.euler();
    Mat3 jacobian = last_jacobian_;
    try {
      jacobian = euler_rate_jacobian(euler.x(), euler.y());
      last_jacobian_ = jacobian;
    } catch (const GimbalLock&) {
      out.gimbal = true;
    }
    const FrameMaps maps{odom.pose.attitude.matrix(), jacobian};
    const Vec3 earth_velocity = maps.earth_from_body * odom.twist.linear;
    const Vec3 euler_rates = jacobian * odom.twist.angular;

    const auto rows = static_cast<Eigen::Index>(active_->dofs.count());
    Eigen::VectorXd tau(rows);
    Eigen::Index r = 0;
    for (Dof d : kAllDofs) {
      const auto i = index(d);
      if (!active_->dofs[i]) continue;
      if (setpoint.contains(d)) {
        held_.set(d, setpoint.at(d));
      } else if (!held_.contains(d)) {
        const double m = measured_value(odom, d);
        held_.set(d, d == Dof::kDepth ? depth_of(odom.pose.position, frame_) : m);
      }
      const double want = held_.at(d);
      const double measured = measured_value(odom, d);
      const double e = dof_error(d, desired_value(d, want, frame_), measured);

      double measured_rate = 0.0;
      switch (dof_kind(d)) {
        case DofKind::kPosition:
          measured_rate = earth_velocity(static_cast<Eigen::Index>(i - 6));
          break;
        case DofKind::kAngle:
          measured_rate = euler_rates(static_cast<Eigen::Index>(i - 9));
          break;
        default:
          measured_rate = previous_[i] ? (measured - *previous_[i]) / dt : 0.0;
          break;
      }
      const double u = pid_step(active_->gains[i], e, -measured_rate, dt, pid_[i]);
      out.setpoint.set(d, want);
      out.errors.set(d, e);
      out.tau_star.set(d, u);
      out.integrals.set(d, pid_[i].integral);
      tau(r++) = u;
    }
    remember_measurements(odom);

    try {
      const AllocationProblem problem = build_problem(thrusters_, maps, active_->dofs, tau, dt);
      AllocationSolution sol = solve(problem, warm_ ? &*warm_ : nullptr);
      assign_outputs(thrusters_, sol);
      apply_angle_steps(thrusters_, sol);
      warm_ = WarmStart{sol.forces, sol.active_set};
      out.allocation_rows = problem.M.rows();
      out.residual = sol.residual;
      out.thrusters = std::move(sol.outputs);
      for (const auto& t : out.thrusters) out.saturated = out.saturated || t.saturated;
      for (const auto& t : thrusters_.articulated) out.servo_angles.push_back(t.current_angle);
    } catch (const std::exception& e) {
      fault(out, e.what());
    }
    return out;
  }

 private:
  void zero_output(ControlOutput& out) {
    out.thrusters.clear();
    out.servo_angles.clear();
    for (const auto& t : thrusters_.fixed) {
      const CommandResult c = force_to_command(t.poly, 0.0, t.command_min, t.command_max);
      out.thrusters.push_back({t.id, false, 0.0, c.command, c.saturated, 0.0});
    }
    for (const auto& t : thrusters_.articulated) {
      const CommandResult c = force_to_command(t.poly, 0.0, t.command_min, t.command_max);
      out.thrusters.push_back({t.id, true, 0.0, c.command, c.saturated, 0.0});
      out.servo_angles.push_back(t.current_angle);
    }
  }

  void fault(ControlOutput& out, std::string reason) {
    out.fault = true;
    out.fault_reason = std::move(reason);
    warm_.reset();
    zero_output(out);
  }

  void remember_measurements(const Odometry& odom) {
    for (Dof d : kAllDofs) previous_[index(d)] = measured_value(odom, d);
  }

  ThrusterSet thrusters_;
  std::map<std::string, ControlMode> modes_;
  const ControlMode* active_ = nullptr;
  EarthFrame frame_;
  double nominal_dt_;
  bool enabled_ = true;
  std::array<PidState, kDofCount> pid_{};
  std::array<std::optional<double>, kDofCount> previous_{};
  DofValues held_;
  Mat3 last_jacobian_ = Mat3::Identity();
  std::optional<WarmStart> warm_;
};

}  // namespace mvp
