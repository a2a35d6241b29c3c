#include <quadctl/quadruped_run.hpp>

#include <gtest/gtest.h>

namespace quadctl {
namespace {

BaseState tumbling(Rng& rng) {
  BaseState s;
  s.com_position = Vec3(0.1, -0.2, 0.5);
  s.com_velocity = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
  s.orientation = Quat(rng.normal(), rng.normal(), rng.normal(), rng.normal()).normalized();
  s.angular_momentum = Vec3(rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05));
  return s;
}

double rotational_energy(const CentroidalBody& body, const BaseState& s) {
  return 0.5 * s.angular_momentum.dot(angular_velocity(body, s));
}

TEST(Centroidal, WeightCancellingForceConservesMomentum) {
  const CentroidalBody body;
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    BaseState s = tumbling(rng);
    const BaseState s0 = s;
    for (int k = 0; k < 1000; ++k) {
      s = step_centroidal(body, s, {{s.com_position, Vec3(0.0, 0.0, body.mass * kGravity)}}, 1e-4);
    }
    EXPECT_LT((s.com_velocity - s0.com_velocity).norm(), 1e-9);
    EXPECT_LT((s.angular_momentum - s0.angular_momentum).norm(), 1e-9);
    EXPECT_LT((s.com_position - (s0.com_position + 0.1 * s0.com_velocity)).norm(), 1e-9);
    EXPECT_NEAR(s.orientation.norm(), 1.0, 1e-12);
  }
}

TEST(Centroidal, TorqueFreeTumblingKeepsEnergy) {
  // |k| is conserved exactly; the rotational energy up to the integrator's
  // first-order drift.
  const CentroidalBody body;
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    BaseState s = tumbling(rng);
    const double e0 = rotational_energy(body, s);
    for (int k = 0; k < 10000; ++k) {
      s = step_centroidal(body, s, {{s.com_position, Vec3(0.0, 0.0, body.mass * kGravity)}}, 1e-4);
    }
    EXPECT_NEAR(rotational_energy(body, s), e0, 2e-2 * e0);
  }
}

TEST(Centroidal, PureCoupleChangesOnlyAngularMomentum) {
  const CentroidalBody body;
  BaseState s;
  s.com_position = Vec3(0.0, 0.0, 0.3);
  const Vec3 f(0.0, 0.0, 2.0);
  const std::vector<AppliedForce> couple{{s.com_position + Vec3(0.1, 0.0, 0.0), f},
                                         {s.com_position - Vec3(0.1, 0.0, 0.0), -f},
                                         {s.com_position, Vec3(0.0, 0.0, body.mass * kGravity)}};
  const BaseState n = step_centroidal(body, s, couple, 1e-3);
  EXPECT_EQ(n.com_velocity.norm(), 0.0);
  EXPECT_NEAR((n.angular_momentum - Vec3(0.0, -0.4e-3, 0.0)).norm(), 0.0, 1e-15);
  // Pitching nose-down about +y.
  EXPECT_LT(n.orientation.y(), 0.0);
}

TEST(Centroidal, RejectsBadTimeStep) {
  EXPECT_THROW(step_centroidal({}, {}, {}, 0.0), std::invalid_argument);
  EXPECT_THROW(step_centroidal({}, {}, {}, 2e-3), std::invalid_argument);
}

TEST(Terrain, HeightFields) {
  EXPECT_EQ(HeightField::flat().height(3.0, -1.0), 0.0);
  const HeightField step = HeightField::step(0.1, 0.05);
  EXPECT_EQ(step.height(0.09, 0.0), 0.0);
  EXPECT_EQ(step.height(0.1, 0.0), 0.05);
  const HeightField plank = HeightField::seesaw(Vec2(0.0, 0.0), 0.1, 0.05);
  EXPECT_NEAR(plank.height(0.2, 0.0), 0.05 + std::tan(0.1) * 0.2, 1e-15);
  EXPECT_EQ(plank.height(0.5, 0.0), 0.0);
  EXPECT_NEAR(plank.height(-0.29, 0.0), 0.05 - std::tan(0.1) * 0.29, 1e-15);
  EXPECT_EQ(plank.height(0.0, 0.31), 0.0);
}

QuadrupedSim standing_sim(const QuadrupedSimParams& p = {}, double leg = 0.24) {
  BaseState b;
  b.com_position = Vec3(0.0, 0.0, leg);
  return QuadrupedSim(p, b, standing_joints(p.model, leg));
}

std::array<Vec2, kNumLegs> knee_torques(const QuadrupedModel& model, double leg, double per_leg_force) {
  auto tau = zero_array<Vec2, kNumLegs>();
  for (int i = 0; i < kNumLegs; ++i) {
    const Vec2 q = symmetric_posture(model.leg, leg, model.knee_bend[i]);
    // τ = J_aᵀ F with F pushing the base up.
    tau[i] = actuated_jacobian(model, q).transpose() * Vec3(0.0, 0.0, per_leg_force);
  }
  return tau;
}

TEST(QuadrupedSim, StartsWithFeetPlanted) {
  QuadrupedSim sim = standing_sim();
  for (const auto& f : sim.feet()) {
    EXPECT_TRUE(f.stance);
    EXPECT_NEAR(f.anchor.z(), 0.0, 1e-12);
  }
}

TEST(QuadrupedSim, StaticTorquesCarryTheWeight) {
  const QuadrupedSimParams p;
  QuadrupedSim sim = standing_sim(p);
  const auto tau = knee_torques(p.model, 0.24, p.model.weight() / 4.0);
  sim.step(tau, 1e-4);
  EXPECT_NEAR(sim.total_force().z(), p.model.weight(), 1e-9);
  EXPECT_NEAR(sim.total_force().head<2>().norm(), 0.0, 1e-9);
  for (int k = 0; k < 999; ++k) sim.step(tau, 1e-4);
  EXPECT_LT((sim.state().base.com_position - Vec3(0.0, 0.0, 0.24)).norm(), 1e-6);
}

TEST(QuadrupedSim, ZeroTorqueLetsTheBodyFall) {
  QuadrupedSim sim = standing_sim();
  for (int k = 0; k < 100; ++k) sim.step(zero_array<Vec2, kNumLegs>(), 1e-4);
  const double t = sim.time();
  EXPECT_NEAR(sim.state().base.com_position.z(), 0.24 - 0.5 * kGravity * t * t, 1e-4);
}

TEST(QuadrupedSim, FeetNeverPullOnTheGround) {
  const QuadrupedSimParams p;
  QuadrupedSim sim = standing_sim(p);
  Rng rng(8);
  auto tau = zero_array<Vec2, kNumLegs>();
  for (int k = 0; k < 2000; ++k) {
    if (k % 10 == 0) {
      for (auto& t : tau) t = Vec2(rng.uniform(-1, 1), rng.uniform(-2.7, 2.7));
    }
    sim.step(tau, 1e-4);
    for (const auto& f : sim.feet()) {
      EXPECT_GE(f.force.z(), 0.0);
      EXPECT_LE(f.force.head<2>().norm(), p.ground.friction * f.force.z() + 1e-9);
      if (!f.stance) {
        EXPECT_EQ(f.force.norm(), 0.0);
      }
    }
  }
}

TEST(QuadrupedSim, PullingLegLiftsOff) {
  const QuadrupedSimParams p;
  QuadrupedSim sim = standing_sim(p);
  auto tau = knee_torques(p.model, 0.24, p.model.weight() / 4.0);
  tau[0] = -tau[0];
  sim.step(tau, 1e-4);
  EXPECT_FALSE(sim.feet()[0].stance);
  EXPECT_EQ(sim.liftoffs(), 1);
  EXPECT_TRUE(sim.feet()[1].stance);
}

TEST(QuadrupedSim, SensorsFollowTheLoad) {
  const QuadrupedSimParams p;
  QuadrupedSim sim = standing_sim(p);
  const auto tau = knee_torques(p.model, 0.24, p.model.weight() / 4.0);
  for (int k = 0; k < 200; ++k) sim.step(tau, 1e-4);
  for (int i = 0; i < kNumLegs; ++i) {
    EXPECT_TRUE(sim.sensed_contact()[i]);
    EXPECT_NEAR(sim.sensor_voltages()[i], p.sensor.static_voltage(p.model.weight() / 4.0), 0.05);
  }
}

TEST(QuadrupedSim, RejectsBadTimeStep) {
  QuadrupedSim sim = standing_sim();
  EXPECT_THROW(sim.step(zero_array<Vec2, kNumLegs>(), 0.0), std::invalid_argument);
  EXPECT_THROW(sim.step(zero_array<Vec2, kNumLegs>(), 5e-3), std::invalid_argument);
}

TEST(ClosedLoop, StandHoldsPositionAndAttitude) {
  const QuadrupedModel model;
  const auto g = stand_plan(model);
  QuadrupedRunSettings s;
  const auto r = run_quadruped(g.plan, s);
  EXPECT_EQ(r.trace.size(), 5000u);
  EXPECT_LT(r.max_com_error, 1e-3);
  EXPECT_LT(r.max_orientation_error, 0.5 * kPi / 180.0);
  EXPECT_EQ(r.saturated_ticks, 0);
  EXPECT_EQ(r.allocation_failures, 0);
  EXPECT_TRUE(r.flights.empty());
}

TEST(ClosedLoop, StandIsBitIdenticalAcrossRuns) {
  const QuadrupedModel model;
  const auto plan = stand_plan(model, {1.0, 1e-3, 0.24}).plan;
  QuadrupedRunSettings s;
  s.duration = 1.0;
  s.channel = ChannelModel::wifi();
  const auto a = run_quadruped(plan, s);
  const auto b = run_quadruped(plan, s);
  ASSERT_EQ(a.trace.size(), b.trace.size());
  for (std::size_t k = 0; k < a.trace.size(); ++k) {
    EXPECT_EQ(a.trace[k].com, b.trace[k].com);
    EXPECT_EQ(a.trace[k].torque[2], b.trace[k].torque[2]);
  }
}

TEST(ClosedLoop, SinusoidIsTracked) {
  const QuadrupedModel model;
  const auto g = sinusoid_plan(model);
  EXPECT_TRUE(g.warnings.empty());
  QuadrupedRunSettings s;
  const auto r = run_quadruped(g.plan, s);
  EXPECT_LT(r.com_rmse, 1e-3);
  EXPECT_LT(r.max_com_error, 2e-3);
  EXPECT_TRUE(r.upright);
}

TEST(ClosedLoop, SoftGroundFrictionStillStands) {
  const QuadrupedModel model;
  const auto g = stand_plan(model, {2.0, 1e-3, 0.24});
  QuadrupedRunSettings s;
  s.duration = 2.0;
  s.sim.ground.friction = 0.2;
  const auto r = run_quadruped(g.plan, s);
  EXPECT_LT(r.max_com_error, 1e-3);
}

TEST(ClosedLoop, JumpApexMatchesBallisticPrediction) {
  const QuadrupedModel model;
  const auto g = jump_plan(model);
  EXPECT_TRUE(g.warnings.empty());
  QuadrupedRunSettings s;
  s.duration = 0.0;
  const auto r = run_quadruped(g.plan, s);
  const FlightRecord* f = r.highest_flight();
  ASSERT_NE(f, nullptr);
  EXPECT_GT(f->liftoff_velocity, 2.0);
  EXPECT_LT(f->apex_error(), 0.05);
  EXPECT_LE(r.max_commanded_torque, 2.7);
  EXPECT_FALSE(r.crashed);
  EXPECT_TRUE(r.upright);
  EXPECT_LT(r.final_com_error, 0.01);
}

TEST(ClosedLoop, OverweightBodyCrashes) {
  // 3 kg per leg is beyond the knee torque limit at any leg length: the plan
  // warns and the body sinks onto the ground.
  QuadrupedRunSettings s;
  s.sim.model.mass = 12.0;
  s.duration = 1.0;
  const auto g = stand_plan(s.sim.model, {1.0, 1e-3, 0.24});
  EXPECT_FALSE(g.warnings.empty());
  const auto r = run_quadruped(g.plan, s);
  EXPECT_TRUE(r.crashed);
  EXPECT_GT(r.saturated_ticks, 0);
  EXPECT_LE(r.max_commanded_torque, 2.7);
}

}  // namespace
}  // namespace quadctl
