#include <quadctl/leg_model.hpp>

#include <gtest/gtest.h>

namespace quadctl {
namespace {

// Central finite differences of forward kinematics.
Mat2 numeric_jacobian(const LegParams& params, const Vec2& q, double h) {
  Mat2 jac;
  for (int j = 0; j < 2; ++j) {
    Vec2 qp = q;
    Vec2 qm = q;
    qp[j] += h;
    qm[j] -= h;
    jac.col(j) = (forward_kinematics(params, qp) - forward_kinematics(params, qm)) / (2.0 * h);
  }
  return jac;
}

TEST(ForwardKinematics, StraightLegPointsDown) {
  const LegParams params;
  const Vec2 x = forward_kinematics(params, Vec2(0.0, 0.0));
  EXPECT_NEAR(x[0], 0.0, 1e-15);
  EXPECT_NEAR(x[1], -0.32, 1e-15);
}

TEST(ForwardKinematics, FullyFoldedLegReturnsToHip) {
  const LegParams params;
  const Vec2 x = forward_kinematics(params, Vec2(0.0, kPi));
  EXPECT_NEAR(x.norm(), 0.0, 1e-15);
}

TEST(ForwardKinematics, MatchesHandTrig) {
  const LegParams params;
  // 0.16·(sin 0.3 + sin(-0.6)), -0.16·(cos 0.3 + cos(-0.6))
  const Vec2 x = forward_kinematics(params, Vec2(0.3, -0.9));
  EXPECT_NEAR(x[0], -0.043059562677391354, 1e-15);
  EXPECT_NEAR(x[1], -0.2849075366456455, 1e-15);
}

TEST(ForwardKinematics, PeriodicAndWithinReach) {
  const LegParams params;
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    const Vec2 q(rng.uniform(-20.0, 20.0), rng.uniform(-20.0, 20.0));
    const Vec2 x = forward_kinematics(params, q);
    EXPECT_LE(x.norm(), params.reach() + 1e-12);
    EXPECT_LT((forward_kinematics(params, q + Vec2(2.0 * kPi, 0.0)) - x).norm(), 1e-12);
    EXPECT_LT((forward_kinematics(params, q + Vec2(0.0, -2.0 * kPi)) - x).norm(), 1e-12);
  }
}

TEST(FootJacobian, FrozenFiniteDifferenceValues) {
  const LegParams params;
  // Central differences at h = 1e-6, computed offline.
  const Mat2 jac = foot_jacobian(params, Vec2(0.3, -0.9));
  EXPECT_NEAR(jac(0, 0), 0.2849075366427589, 1e-6);
  EXPECT_NEAR(jac(1, 0), -0.04305956266548172, 1e-6);
  EXPECT_NEAR(jac(0, 1), 0.1320536983928644, 1e-6);
  EXPECT_NEAR(jac(1, 1), -0.09034279577213589, 1e-6);
}

TEST(FootJacobian, MatchesFiniteDifferencesAtRandomConfigurations) {
  const LegParams params;
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    const Vec2 q(rng.uniform(-2.0 * kPi, 2.0 * kPi), rng.uniform(-2.0 * kPi, 2.0 * kPi));
    const Mat2 err = foot_jacobian(params, q) - numeric_jacobian(params, q, 1e-6);
    ASSERT_LT(err.cwiseAbs().maxCoeff(), 1e-6) << "q = " << q.transpose();
  }
}

TEST(FootJacobian, FirstOrderPrediction) {
  const LegParams params;
  const Vec2 q(0.4, 1.1);
  for (double h : {1e-2, 1e-3, 1e-4}) {
    const Vec2 dq(h, -0.5 * h);
    const Vec2 predicted = foot_jacobian(params, q) * dq;
    const Vec2 actual = forward_kinematics(params, q + dq) - forward_kinematics(params, q);
    EXPECT_LT((predicted - actual).norm(), 0.5 * h * h);
  }
}

TEST(FootJacobian, SingularAtStraightAndFoldedKnee) {
  const LegParams params;
  EXPECT_NEAR(foot_jacobian(params, Vec2(0.7, 0.0)).determinant(), 0.0, 1e-15);
  EXPECT_NEAR(foot_jacobian(params, Vec2(-1.2, kPi)).determinant(), 0.0, 1e-15);
  EXPECT_GT(std::abs(foot_jacobian(params, Vec2(0.0, 1.0)).determinant()), 1e-3);
}

TEST(InverseKinematics, RecoversFootPosition) {
  const LegParams params;
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const Vec2 q(rng.uniform(-1.5, 1.5), rng.uniform(0.1, 3.0));
    const Vec2 x = forward_kinematics(params, q);
    const Vec2 q_ik = inverse_kinematics(params, x, 1.0);
    EXPECT_LT((forward_kinematics(params, q_ik) - x).norm(), 1e-12);
    EXPECT_NEAR(q_ik[1], q[1], 1e-9);
  }
  EXPECT_THROW(inverse_kinematics(params, Vec2(0.0, -0.33)), SingularConfiguration);
}

TEST(Actuator, TorqueFromCurrent) {
  const LegParams params;
  EXPECT_DOUBLE_EQ(torque_from_current(params, 12.0), 2.7);
  EXPECT_DOUBLE_EQ(torque_from_current(params, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(torque_from_current(params, 1.0), 0.225);
  EXPECT_DOUBLE_EQ(torque_from_current(params, -30.0), -2.7);
}

TEST(Actuator, CurrentFromTorque) {
  const LegParams params;
  EXPECT_NEAR(current_from_torque(params, 2.7), 12.0, 1e-12);
  EXPECT_DOUBLE_EQ(current_from_torque(params, 0.0), 0.0);
  // 5 / 0.225 = 22.2 A exceeds the 12 A limit.
  EXPECT_DOUBLE_EQ(current_from_torque(params, 5.0), 12.0);
  EXPECT_DOUBLE_EQ(current_from_torque(params, -5.0), -12.0);
}

TEST(Actuator, RoundTripInsideLimits) {
  const LegParams params;
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    const double current = rng.uniform(-12.0, 12.0);
    EXPECT_NEAR(current_from_torque(params, torque_from_current(params, current)), current, 1e-12);
    const double torque = rng.uniform(-2.7, 2.7);
    EXPECT_NEAR(torque_from_current(params, current_from_torque(params, torque)), torque, 1e-12);
  }
}

TEST(MaxVerticalForce, MomentArmOracleAtHalfExtension) {
  const LegParams params;
  // Symmetric posture at 0.16 m: half knee angle 60°, moment arm L·sin 60°.
  EXPECT_NEAR(max_vertical_force(params, 0.16), 19.48557158514987, 1e-9);
}

TEST(MaxVerticalForce, MatchesMomentArmAcrossHeights) {
  const LegParams params;
  for (double h = 0.02; h < 0.315; h += 0.01) {
    const double half_knee = std::acos(h / params.reach());
    const double expected = params.max_torque() / (params.segment_length * std::sin(half_knee));
    EXPECT_NEAR(max_vertical_force(params, h), expected, 1e-9 * expected);
  }
}

TEST(MaxVerticalForce, FallsWithCompression) {
  const LegParams params;
  double previous = max_vertical_force(params, 0.31);
  for (double h = 0.30; h > 0.05; h -= 0.01) {
    const double f = max_vertical_force(params, h);
    EXPECT_LT(f, previous);
    previous = f;
  }
}

TEST(MaxVerticalForce, SingularAtFullExtension) {
  const LegParams params;
  EXPECT_THROW(max_vertical_force(params, 0.32), SingularConfiguration);
  EXPECT_THROW(max_vertical_force(params, 0.0), std::invalid_argument);
  EXPECT_GT(max_vertical_force(params, 0.3199), 200.0);
}

TEST(MaxVerticalForce, ScalesLinearlyWithTorqueLimit) {
  LegParams params;
  LegParams doubled;
  doubled.max_current = 2.0 * params.max_current;
  for (double h : {0.08, 0.16, 0.24, 0.30}) {
    EXPECT_NEAR(max_vertical_force(doubled, h), 2.0 * max_vertical_force(params, h), 1e-9);
  }
}

TEST(DimensionlessStiffness, ReportedValues) {
  EXPECT_NEAR(dimensionless_stiffness(5250.0, 0.3, 10.0, 9.81), 16.05, 0.01);
  EXPECT_NEAR(dimensionless_stiffness(16300.0, 1.0, 75.0, 9.81), 22.15, 0.01);
  EXPECT_EQ(dimensionless_stiffness(0.0, 0.3, 10.0, 9.81), 0.0);
  EXPECT_THROW(dimensionless_stiffness(-1.0, 0.3, 10.0, 9.81), std::invalid_argument);
  EXPECT_THROW(dimensionless_stiffness(100.0, 0.3, 0.0, 9.81), std::invalid_argument);
}

TEST(LegParams, Validation) {
  LegParams params;
  EXPECT_NO_THROW(params.validate());
  EXPECT_DOUBLE_EQ(params.max_torque(), 2.7);
  params.gear_ratio = 0.0;
  EXPECT_THROW(params.validate(), std::invalid_argument);
}

}  // namespace
}  // namespace quadctl
