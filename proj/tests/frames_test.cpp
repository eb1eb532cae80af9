#include "mvp/frames.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

using namespace mvp;
using testing_support::Gen;

TEST(Attitude, MatchesElementwiseEulerMatrix) {
  Gen g(11);
  for (int i = 0; i < 200; ++i) {
    const Vec3 e = g.euler();
    const Mat3 expected = testing_support::euler_matrix(e.x(), e.y(), e.z());
    EXPECT_LT((Attitude::from_euler(e.x(), e.y(), e.z()).matrix() - expected).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Attitude, EulerRoundTripAwayFromGimbal) {
  Gen g(12);
  for (int i = 0; i < 200; ++i) {
    const Vec3 e = g.euler(1.5);
    const Vec3 back = Attitude::from_euler(e.x(), e.y(), e.z()).euler();
    EXPECT_NEAR(wrap_angle(back.x() - e.x()), 0.0, 1e-9);
    EXPECT_NEAR(back.y(), e.y(), 1e-9);
    EXPECT_NEAR(wrap_angle(back.z() - e.z()), 0.0, 1e-9);
  }
}

TEST(Attitude, YawQuarterTurnMapsBodyXToEarthY) {
  const Vec3 v = Attitude::from_euler(0, 0, kPi / 2).rotate(Vec3::UnitX());
  EXPECT_NEAR(v.x(), 0.0, 1e-15);
  EXPECT_NEAR(v.y(), 1.0, 1e-15);
}

TEST(EulerRateJacobian, KnownEntriesAtSixtyDegreesPitch) {
  const Mat3 j = euler_rate_jacobian(0.0, kPi / 3);
  EXPECT_DOUBLE_EQ(j(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(j(0, 1), 0.0);
  EXPECT_NEAR(j(0, 2), std::tan(kPi / 3), 1e-12);
  EXPECT_NEAR(j(2, 2), 2.0, 1e-12);
}

// Finite-difference oracle: propagate the attitude by a small body rotation
// and difference the Euler angles.
TEST(EulerRateJacobian, MatchesFiniteDifferenceOfEulerAngles) {
  Gen g(13);
  const double h = 1e-6;
  for (int i = 0; i < 100; ++i) {
    const Vec3 e = g.euler(1.3);
    const Vec3 w = g.vec3(-1.0, 1.0);
    const Attitude a = Attitude::from_euler(e.x(), e.y(), e.z());
    const Eigen::Quaterniond dq(Eigen::AngleAxisd(w.norm() * h, w.normalized()));
    const Vec3 e2 = Attitude(a.quaternion() * dq).euler();
    Vec3 rate;
    for (int k = 0; k < 3; ++k) rate(k) = wrap_angle(e2(k) - e(k)) / h;
    EXPECT_LT((euler_rate_jacobian(e.x(), e.y()) * w - rate).norm(), 1e-4);
  }
}

TEST(EulerRateJacobian, ThrowsGimbalLockAtVerticalPitch) {
  EXPECT_THROW(euler_rate_jacobian(0.0, kPi / 2), GimbalLock);
  EXPECT_THROW(euler_rate_jacobian(0.3, -kPi / 2), GimbalLock);
  EXPECT_NO_THROW(euler_rate_jacobian(0.0, kPi / 2 - 1e-3));
}

TEST(WrapAngle, PropertyRangeAndEquivalence) {
  Gen g(14);
  for (int i = 0; i < 1000; ++i) {
    const double a = g.uniform(-50.0, 50.0);
    const double w = wrap_angle(a);
    EXPECT_GT(w, -kPi);
    EXPECT_LE(w, kPi);
    const double turns = (a - w) / (2 * kPi);
    EXPECT_NEAR(turns, std::round(turns), 1e-9);
  }
  EXPECT_DOUBLE_EQ(wrap_angle(kPi), kPi);
  EXPECT_DOUBLE_EQ(wrap_angle(-kPi), kPi);
  EXPECT_NEAR(wrap_angle(3 * kPi / 2), -kPi / 2, 1e-12);
}

TEST(Transform, ComposeWithInverseIsIdentity) {
  Gen g(15);
  for (int i = 0; i < 100; ++i) {
    const Transform t = g.mount();
    const Transform id = compose(t, inverse(t));
    EXPECT_LT(id.translation.norm(), 1e-12);
    EXPECT_LT((id.rotation.matrix() - Mat3::Identity()).norm(), 1e-12);
    const Vec3 p = g.vec3(-5, 5);
    EXPECT_LT((transform_point(inverse(t), transform_point(t, p)) - p).norm(), 1e-12);
  }
}

TEST(Transform, ComposeAppliesInnerFirst) {
  const Transform a{Attitude::from_euler(0, 0, kPi / 2), Vec3(1, 0, 0)};
  const Transform b{Attitude(), Vec3(1, 0, 0)};
  // b moves +x, then a rotates that into +y and shifts by +x.
  const Vec3 p = transform_point(compose(a, b), Vec3::Zero());
  EXPECT_NEAR(p.x(), 1.0, 1e-15);
  EXPECT_NEAR(p.y(), 1.0, 1e-15);
}

TEST(Depth, PositiveDownInBothFrames) {
  EXPECT_DOUBLE_EQ(depth_of(Vec3(0, 0, -3), EarthFrame::kEnu), 3.0);
  EXPECT_DOUBLE_EQ(depth_of(Vec3(0, 0, 3), EarthFrame::kNed), 3.0);
  EXPECT_DOUBLE_EQ(z_from_depth(2.0, EarthFrame::kEnu), -2.0);
  EXPECT_DOUBLE_EQ(z_from_depth(2.0, EarthFrame::kNed), 2.0);
  EXPECT_EQ(earth_up(EarthFrame::kNed), Vec3(0, 0, -1));
}
