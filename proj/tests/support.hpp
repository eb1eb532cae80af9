#pragma once

// Seeded generators and fixtures shared by the test binaries.

#include "mvp/allocation.hpp"
#include "mvp/frames.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace testing_support {

inline std::string config_path(const std::string& name) { return std::string(MVP_CONFIG_DIR) + "/" + name; }

/// Small seeded generator with the draws the property tests need.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool coin() { return integer(0, 1) == 1; }
  mvp::Vec3 vec3(double lo, double hi) { return {uniform(lo, hi), uniform(lo, hi), uniform(lo, hi)}; }
  mvp::Vec3 euler(double pitch_limit = 1.4) {
    return {uniform(-mvp::kPi, mvp::kPi), uniform(-pitch_limit, pitch_limit), uniform(-mvp::kPi, mvp::kPi)};
  }
  mvp::Attitude attitude(double pitch_limit = 1.4) {
    const mvp::Vec3 e = euler(pitch_limit);
    return mvp::Attitude::from_euler(e.x(), e.y(), e.z());
  }
  mvp::Transform mount() { return {attitude(mvp::kPi / 2 - 0.01), vec3(-1.0, 1.0)}; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    std::shuffle(v.begin(), v.end(), rng_);
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

inline mvp::FixedThruster fixed_thruster(const std::string& id, const mvp::Transform& mount, double limit = 40.0) {
  mvp::FixedThruster t;
  t.id = id;
  t.mount = mount;
  t.force_min = -limit;
  t.force_max = limit;
  t.poly = {0.0, 30.0, 0.0, 10.0};
  return t;
}

inline mvp::ArticulatedThruster articulated_thruster(const std::string& id, const mvp::Transform& mount,
                                                     double limit = 40.0, double rate = 2.0) {
  mvp::ArticulatedThruster t;
  t.id = id;
  t.mount = mount;
  t.force_min = 0.0;
  t.force_max = limit;
  t.poly = {0.0, 20.0, 20.0};
  t.command_min = 0.0;
  t.command_max = 1.0;
  t.servo_rate = rate;
  t.angle_min = -0.8;
  t.angle_max = 0.8;
  return t;
}

/// Z-Y-X rotation matrix written out element by element.
inline mvp::Mat3 euler_matrix(double roll, double pitch, double yaw) {
  const double cr = std::cos(roll), sr = std::sin(roll);
  const double cp = std::cos(pitch), sp = std::sin(pitch);
  const double cy = std::cos(yaw), sy = std::sin(yaw);
  mvp::Mat3 r;
  r << cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr,
       sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr,
       -sp, cp * sr, cp * cr;
  return r;
}

}  // namespace testing_support
