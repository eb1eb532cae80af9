#pragma once

// 6-DOF rigid-body vehicle simulator. Diagonal inertia (rigid + added mass),
// diagonal linear and quadratic damping, hydrostatic restoring from the
// gravity/buoyancy centers, buoyancy taper through the surface, RK4.

#include "mvp/allocation.hpp"
#include "mvp/frames.hpp"
#include "mvp/polynomial.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mvp {

using Vec6 = Eigen::Matrix<double, 6, 1>;

inline constexpr double kGravity = 9.81;

struct VehicleParams {
  double mass = 1.0;                            // kg
  Vec3 inertia = Vec3::Ones();                  // kg m^2, body diagonal
  Vec6 added_mass = Vec6::Zero();
  Vec6 linear_damping = Vec6::Zero();
  Vec6 quadratic_damping = Vec6::Zero();
  Vec3 center_of_gravity = Vec3::Zero();        // body frame, m
  Vec3 center_of_buoyancy = Vec3::Zero();
  double buoyancy = kGravity;                   // N when fully submerged
  double seabed_depth = 10.0;                   // m
  double surface_taper_depth = 0.2;             // m over which buoyancy tapers
  double surface_buoyancy_fraction = 0.5;       // fraction left at depth <= 0
};

struct SimState {
  Pose pose;
  Twist twist;
  std::vector<double> servo_angles;  // true angle per articulated thruster
  double time = 0.0;
};

class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Body-frame wrench [force; moment] produced by the thrusters. Written
/// independently of the allocation column code so each can check the other.
inline Vec6 actuator_wrench(std::span<const double> commands, std::span<const double> servo_angles,
                            const ThrusterSet& thrusters) {
  Vec6 w = Vec6::Zero();
  auto add = [&](const ThrusterBase& t, double command, double angle) {
    const Mat3 r = t.mount.rotation.matrix() * Eigen::AngleAxisd(angle, Vec3::UnitZ()).toRotationMatrix();
    const Vec3 f = command_to_force(t.poly, command) * r.col(0);
    w.head<3>() += f;
    w.tail<3>() += t.mount.translation.cross(f);
  };
  std::size_t k = 0;
  for (const auto& t : thrusters.fixed) add(t, commands[k++], 0.0);
  for (std::size_t j = 0; j < thrusters.articulated.size(); ++j)
    add(thrusters.articulated[j], commands[k++], servo_angles[j]);
  return w;
}

/// Buoyancy scale for the hull at `depth`.
inline double buoyancy_fraction(const VehicleParams& p, double depth) {
  if (p.surface_taper_depth <= 0.0) return depth > 0.0 ? 1.0 : p.surface_buoyancy_fraction;
  const double s = std::clamp(depth / p.surface_taper_depth, 0.0, 1.0);
  return p.surface_buoyancy_fraction + (1.0 - p.surface_buoyancy_fraction) * s;
}

/// Gravity plus buoyancy as a body-frame wrench.
inline Vec6 hydrostatic_wrench(const VehicleParams& p, const Pose& pose, EarthFrame frame) {
  const Vec3 up = earth_up(frame);
  const double b = p.buoyancy * buoyancy_fraction(p, depth_of(pose.position, frame));
  const Attitude to_body = pose.attitude.inverse();
  const Vec3 fg = to_body.rotate(-p.mass * kGravity * up);
  const Vec3 fb = to_body.rotate(b * up);
  Vec6 w;
  w << fg + fb, p.center_of_gravity.cross(fg) + p.center_of_buoyancy.cross(fb);
  return w;
}

namespace detail {

struct Derivative {
  Vec3 position_rate;
  Eigen::Vector4d quaternion_rate;  // (w, x, y, z)
  Vec6 acceleration;
};

struct RigidState {
  Vec3 position;
  Eigen::Vector4d quaternion;  // (w, x, y, z)
  Vec6 velocity;
};

inline Eigen::Quaterniond to_quat(const Eigen::Vector4d& q) { return {q(0), q(1), q(2), q(3)}; }

inline Derivative rigid_derivative(const VehicleParams& p, EarthFrame frame, const RigidState& s,
                                   const Vec6& thrust) {
  const Eigen::Quaterniond q = to_quat(s.quaternion).normalized();
  const Vec3 v = s.velocity.head<3>();
  const Vec3 w = s.velocity.tail<3>();

  Derivative d;
  d.position_rate = q * v;
  const Eigen::Quaterniond omega(0.0, w.x(), w.y(), w.z());
  const Eigen::Quaterniond qd = q * omega;
  d.quaternion_rate = 0.5 * Eigen::Vector4d(qd.w(), qd.x(), qd.y(), qd.z());

  // Rigid-body Coriolis/centripetal terms.
  Vec6 coriolis;
  coriolis << w.cross(p.mass * v), w.cross(p.inertia.cwiseProduct(w));
  const Vec6 damping = p.linear_damping.cwiseProduct(s.velocity) +
                       p.quadratic_damping.cwiseProduct(s.velocity.cwiseAbs()).cwiseProduct(s.velocity);
  const Vec6 restoring = hydrostatic_wrench(p, Pose{s.position, Attitude(q)}, frame);

  Vec6 inertia;
  inertia << Vec3::Constant(p.mass), p.inertia;
  inertia += p.added_mass;
  d.acceleration = (thrust + restoring - coriolis - damping).cwiseQuotient(inertia);
  return d;
}

inline RigidState advance(const RigidState& s, const Derivative& d, double h) {
  return {s.position + h * d.position_rate, s.quaternion + h * d.quaternion_rate,
          s.velocity + h * d.acceleration};
}

}  // namespace detail

/// One RK4 step of the rigid-body equations with a constant thrust wrench.
/// Servo angles are carried through unchanged; see slew_servos.
inline SimState step(const SimState& state, const Vec6& thrust, double dt, const VehicleParams& p,
                     EarthFrame frame) {
  if (!(dt > 0.0 && dt <= 0.1)) throw std::invalid_argument("physics step must be in (0, 0.1] s");
  const Eigen::Quaterniond q0 = state.pose.attitude.quaternion();
  detail::RigidState s0{state.pose.position, {q0.w(), q0.x(), q0.y(), q0.z()}, Vec6::Zero()};
  s0.velocity << state.twist.linear, state.twist.angular;

  using detail::advance;
  using detail::rigid_derivative;
  const auto k1 = rigid_derivative(p, frame, s0, thrust);
  const auto k2 = rigid_derivative(p, frame, advance(s0, k1, 0.5 * dt), thrust);
  const auto k3 = rigid_derivative(p, frame, advance(s0, k2, 0.5 * dt), thrust);
  const auto k4 = rigid_derivative(p, frame, advance(s0, k3, dt), thrust);

  detail::RigidState s1 = s0;
  s1.position += dt / 6.0 * (k1.position_rate + 2.0 * k2.position_rate + 2.0 * k3.position_rate + k4.position_rate);
  s1.quaternion += dt / 6.0 * (k1.quaternion_rate + 2.0 * k2.quaternion_rate + 2.0 * k3.quaternion_rate + k4.quaternion_rate);
  s1.velocity += dt / 6.0 * (k1.acceleration + 2.0 * k2.acceleration + 2.0 * k3.acceleration + k4.acceleration);

  if (!s1.position.allFinite() || !s1.quaternion.allFinite() || !s1.velocity.allFinite() ||
      s1.quaternion.norm() < 1e-12)
    throw SimulationError("non-finite state at t = " + std::to_string(state.time + dt));

  SimState out = state;
  out.pose.position = s1.position;
  out.pose.attitude = Attitude(detail::to_quat(s1.quaternion));
  out.twist.linear = s1.velocity.head<3>();
  out.twist.angular = s1.velocity.tail<3>();
  out.time = state.time + dt;
  return out;
}

/// Moves each servo toward its target by at most servo_rate * dt, inside its limits.
inline void slew_servos(std::vector<double>& angles, std::span<const double> targets,
                        const std::vector<ArticulatedThruster>& thrusters, double dt) {
  for (std::size_t k = 0; k < thrusters.size(); ++k) {
    const auto& t = thrusters[k];
    const double target = std::clamp(targets[k], t.angle_min, t.angle_max);
    const double max_step = t.servo_rate * dt;
    angles[k] = std::clamp(angles[k] + std::clamp(target - angles[k], -max_step, max_step), t.angle_min,
                           t.angle_max);
  }
}

/// Vehicle plant plus the thrusters it carries.
class Simulator {
 public:
  Simulator(VehicleParams params, ThrusterSet thrusters, EarthFrame frame, SimState initial)
      : params_(std::move(params)), thrusters_(std::move(thrusters)), frame_(frame), state_(std::move(initial)) {
    state_.servo_angles.resize(thrusters_.articulated.size(), 0.0);
    commands_.assign(thrusters_.size(), 0.0);
    servo_targets_ = state_.servo_angles;
  }

  void set_commands(std::span<const double> commands, std::span<const double> servo_targets) {
    commands_.assign(commands.begin(), commands.end());
    servo_targets_.assign(servo_targets.begin(), servo_targets.end());
  }

  /// Thrust is evaluated at the servo angles held at the start of the step.
  void advance(double dt) {
    const Vec6 thrust = actuator_wrench(commands_, state_.servo_angles, thrusters_);
    std::vector<double> angles = state_.servo_angles;
    state_ = step(state_, thrust, dt, params_, frame_);
    slew_servos(angles, servo_targets_, thrusters_.articulated, dt);
    state_.servo_angles = std::move(angles);
  }

  const SimState& state() const { return state_; }
  SimState& mutable_state() { return state_; }
  const VehicleParams& params() const { return params_; }
  const ThrusterSet& thrusters() const { return thrusters_; }
  EarthFrame frame() const { return frame_; }
  double depth() const { return depth_of(state_.pose.position, frame_); }
  double altitude() const { return params_.seabed_depth - depth(); }

 private:
  VehicleParams params_;
  ThrusterSet thrusters_;
  EarthFrame frame_;
  SimState state_;
  std::vector<double> commands_;
  std::vector<double> servo_targets_;
};

struct NoiseConfig {
  double drift_fraction = 0.0;  // horizontal position drift per meter travelled
  double attitude_sigma = 0.0;  // rad
  double depth_sigma = 0.0;     // m
  double velocity_sigma = 0.0;  // m/s
};

/// Dead-reckoning style odometry. Without noise it returns the truth. With
/// drift, the horizontal position accumulates an offset along a per-seed
/// heading at drift_fraction (scaled per seed) of the distance travelled.
class OdometrySensor {
 public:
  OdometrySensor(NoiseConfig cfg, std::uint64_t seed, EarthFrame frame, double seabed_depth)
      : cfg_(cfg), rng_(seed), frame_(frame), seabed_depth_(seabed_depth) {
    std::uniform_real_distribution<double> heading(0.0, 2.0 * kPi);
    std::normal_distribution<double> scale(1.0, 0.1);
    drift_heading_ = heading(rng_);
    drift_scale_ = std::clamp(scale(rng_), 0.5, 1.5);
  }

  Odometry measure(const SimState& truth) {
    if (last_time_) {
      const double dt = truth.time - *last_time_;
      const Vec3 v = truth.pose.attitude.rotate(truth.twist.linear);
      const double travelled = std::hypot(v.x(), v.y()) * dt;
      const double step = cfg_.drift_fraction * drift_scale_ * travelled;
      drift_ += step * Eigen::Vector2d(std::cos(drift_heading_), std::sin(drift_heading_));
    }
    last_time_ = truth.time;

    Odometry o;
    o.time = truth.time;
    o.pose = truth.pose;
    o.twist = truth.twist;
    o.pose.position.head<2>() += drift_;
    if (cfg_.attitude_sigma > 0.0) {
      std::normal_distribution<double> n(0.0, cfg_.attitude_sigma);
      const Vec3 e = truth.pose.attitude.euler();
      o.pose.attitude = Attitude::from_euler(e.x() + n(rng_), e.y() + n(rng_), e.z() + n(rng_));
    }
    if (cfg_.depth_sigma > 0.0) {
      std::normal_distribution<double> n(0.0, cfg_.depth_sigma);
      o.pose.position.z() += n(rng_);
    }
    if (cfg_.velocity_sigma > 0.0) {
      std::normal_distribution<double> n(0.0, cfg_.velocity_sigma);
      for (int i = 0; i < 3; ++i) o.twist.linear(i) += n(rng_);
    }
    o.altitude = seabed_depth_ - depth_of(o.pose.position, frame_);
    return o;
  }

  Eigen::Vector2d drift() const { return drift_; }

 private:
  NoiseConfig cfg_;
  std::mt19937_64 rng_;
  EarthFrame frame_;
  double seabed_depth_;
  double drift_heading_ = 0.0;
  double drift_scale_ = 1.0;
  Eigen::Vector2d drift_ = Eigen::Vector2d::Zero();
  std::optional<double> last_time_;
};

}  // namespace mvp
