#pragma once

// Rigid-body frames: attitude, transforms, and the body/earth kinematic maps.
//
// Conventions:
//   * Euler angles are Z-Y-X intrinsic (yaw, then pitch, then roll).
//   * Attitude::matrix() maps body-frame vectors into the earth frame.
//   * The earth frame is ENU or NED. Depth is always positive-down.

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace mvp {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

enum class EarthFrame { kEnu, kNed };

inline constexpr double kPi = std::numbers::pi;

/// Distance from |pitch| = pi/2 at which the Euler-rate Jacobian is refused.
inline constexpr double kGimbalMargin = 1e-6;

class GimbalLock : public std::runtime_error {
 public:
  explicit GimbalLock(double pitch)
      : std::runtime_error("Euler-rate Jacobian undefined at pitch " +
                           std::to_string(pitch)),
        pitch_(pitch) {}
  double pitch() const { return pitch_; }

 private:
  double pitch_;
};

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
  double w = std::remainder(a, 2.0 * kPi);
  if (w <= -kPi) w += 2.0 * kPi;
  return w;
}

/// Orientation of the body frame relative to the earth frame. Stored as a
/// unit quaternion; Euler angles are derived on demand.
class Attitude {
 public:
  Attitude() = default;
  explicit Attitude(const Eigen::Quaterniond& q) : q_(q.normalized()) {}

  static Attitude from_euler(double roll, double pitch, double yaw) {
    return Attitude(Eigen::AngleAxisd(yaw, Vec3::UnitZ()) *
                    Eigen::AngleAxisd(pitch, Vec3::UnitY()) *
                    Eigen::AngleAxisd(roll, Vec3::UnitX()));
  }

  static Attitude from_matrix(const Mat3& r) {
    return Attitude(Eigen::Quaterniond(r));
  }

  const Eigen::Quaterniond& quaternion() const { return q_; }
  Mat3 matrix() const { return q_.toRotationMatrix(); }

  /// (roll, pitch, yaw) in radians.
  Vec3 euler() const {
    const Mat3 r = matrix();
    const double sp = std::clamp(-r(2, 0), -1.0, 1.0);
    return {std::atan2(r(2, 1), r(2, 2)), std::asin(sp),
            std::atan2(r(1, 0), r(0, 0))};
  }
  double roll() const { return euler().x(); }
  double pitch() const { return euler().y(); }
  double yaw() const { return euler().z(); }

  Vec3 rotate(const Vec3& v) const { return q_ * v; }
  Attitude inverse() const { return Attitude(q_.conjugate()); }
  Attitude operator*(const Attitude& rhs) const { return Attitude(q_ * rhs.q_); }

 private:
  Eigen::Quaterniond q_{Eigen::Quaterniond::Identity()};
};

inline Attitude rotation_from_euler(double roll, double pitch, double yaw) {
  return Attitude::from_euler(roll, pitch, yaw);
}

/// Z-Y-X Euler-rate Jacobian: maps body angular rates (p, q, r) to
/// (roll_dot, pitch_dot, yaw_dot). Throws GimbalLock near |pitch| = pi/2.
inline Mat3 euler_rate_jacobian(double roll, double pitch) {
  if (!(std::abs(pitch) < kPi / 2.0 - kGimbalMargin)) throw GimbalLock(pitch);
  const double sr = std::sin(roll), cr = std::cos(roll);
  const double cp = std::cos(pitch), tp = std::tan(pitch);
  Mat3 j;
  j << 1.0, sr * tp, cr * tp,
       0.0, cr, -sr,
       0.0, sr / cp, cr / cp;
  return j;
}

struct Transform {
  Attitude rotation;
  Vec3 translation = Vec3::Zero();

  static Transform identity() { return {}; }
};

inline Transform compose(const Transform& a, const Transform& b) {
  return {a.rotation * b.rotation, a.rotation.rotate(b.translation) + a.translation};
}

inline Transform inverse(const Transform& t) {
  const Attitude inv = t.rotation.inverse();
  return {inv, -inv.rotate(t.translation)};
}

inline Vec3 transform_point(const Transform& t, const Vec3& p) {
  return t.rotation.rotate(p) + t.translation;
}

struct Pose {
  Vec3 position = Vec3::Zero();  // earth frame, meters
  Attitude attitude;
};

struct Twist {
  Vec3 linear = Vec3::Zero();   // body frame, m/s
  Vec3 angular = Vec3::Zero();  // body frame, rad/s
};

struct Odometry {
  double time = 0.0;
  Pose pose;
  Twist twist;
  double altitude = 0.0;  // above seabed, meters
};

/// Unit vector pointing up, expressed in the earth frame.
inline Vec3 earth_up(EarthFrame f) {
  return f == EarthFrame::kEnu ? Vec3::UnitZ() : Vec3(-Vec3::UnitZ());
}

inline double depth_of(const Vec3& earth_position, EarthFrame f) {
  return f == EarthFrame::kEnu ? -earth_position.z() : earth_position.z();
}

inline double z_from_depth(double depth, EarthFrame f) {
  return f == EarthFrame::kEnu ? -depth : depth;
}

inline bool is_finite(const Vec3& v) { return v.allFinite(); }

}  // namespace mvp
