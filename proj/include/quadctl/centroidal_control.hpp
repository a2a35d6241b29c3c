#pragma once

// Whole-body controller on the centroidal model: a PD wrench about the CoM,
// contact force allocation by QP, and per-leg torques combining the
// allocated force with a leg-length impedance.
//
// Frames: world is z-up. Each leg moves in the base x-z plane; its hip sits
// at hip_offset in the base frame. The leg vector l points from the foot to
// the base origin, expressed in the base frame.

#include <quadctl/leg_model.hpp>
#include <quadctl/qp.hpp>
#include <quadctl/rotation.hpp>

#include <array>
#include <vector>

namespace quadctl {

inline constexpr int kNumLegs = 4;

struct QuadrupedModel {
  LegParams leg;
  double mass = 2.2;  // kg
  Mat3 locked_inertia = Eigen::Vector3d(0.02, 0.033, 0.05).asDiagonal();  // kg·m², base frame
  std::array<Vec3, kNumLegs> hip_offsets{Vec3(0.19, 0.11, 0.0), Vec3(0.19, -0.11, 0.0),
                                         Vec3(-0.19, 0.11, 0.0), Vec3(-0.19, -0.11, 0.0)};
  std::array<double, kNumLegs> knee_bend{1.0, 1.0, 1.0, 1.0};
  /// CoM position in the base frame. Zero places the CoM at the base origin.
  Vec3 com_offset = Vec3::Zero();

  double weight() const { return mass * kGravity; }
};

inline const std::array<const char*, kNumLegs> kLegNames{"FL", "FR", "HL", "HR"};

/// Foot position in the base frame.
inline Vec3 foot_in_base(const QuadrupedModel& model, int leg, const Vec2& q) {
  const Vec2 x = forward_kinematics(model.leg, q);
  return model.hip_offsets[leg] + Vec3(x[0], 0.0, x[1]);
}

/// l = base origin − foot, base frame.
inline Vec3 leg_vector(const QuadrupedModel& model, int leg, const Vec2& q) { return -foot_in_base(model, leg, q); }

/// ∂l/∂q, 3×2.
inline Eigen::Matrix<double, 3, 2> actuated_jacobian(const QuadrupedModel& model, const Vec2& q) {
  const Mat2 j = foot_jacobian(model.leg, q);
  Eigen::Matrix<double, 3, 2> ja;
  ja.row(0) = -j.row(0);
  ja.row(1).setZero();
  ja.row(2) = -j.row(1);
  return ja;
}

/// Joint angles placing the foot at base-frame position `foot` (y ignored).
inline Vec2 leg_inverse_kinematics(const QuadrupedModel& model, int leg, const Vec3& foot) {
  const Vec3 rel = foot - model.hip_offsets[leg];
  return inverse_kinematics(model.leg, Vec2(rel.x(), rel.z()), model.knee_bend[leg]);
}

struct BaseState {
  Vec3 com_position = Vec3::Zero();        // m, world
  Vec3 com_velocity = Vec3::Zero();        // m/s
  Quat orientation = Quat::Identity();     // base to world
  Vec3 angular_momentum = Vec3::Zero();    // kg·m²/s about the CoM, world
};

struct FootReference {
  Vec3 leg_vector = Vec3::Zero();    // l_ref, m, base frame
  Vec3 leg_velocity = Vec3::Zero();  // l̇_ref, m/s
  bool contact = false;
  /// Swing phase with touchdown imminent; admits sensed contact early.
  bool late_swing = false;
};

struct PlanSample {
  double time = 0.0;
  Vec3 com_position = Vec3::Zero();
  Vec3 com_velocity = Vec3::Zero();
  Quat orientation = Quat::Identity();
  Vec3 angular_momentum = Vec3::Zero();
  Vec6 wrench = Vec6::Zero();  // (force N, torque N·m), world
  std::array<FootReference, kNumLegs> feet{};
};

struct WrenchGains {
  Mat3 com_stiffness = Mat3::Zero();          // K_c, N/m
  Mat3 com_damping = Mat3::Zero();            // D_c, N·s/m
  Mat3 orientation_stiffness = Mat3::Zero();  // K_b, N·m/rad
  Mat3 momentum_damping = Mat3::Zero();       // D_b, 1/s

  static WrenchGains diagonal(const Vec3& kc, const Vec3& dc, const Vec3& kb, const Vec3& db) {
    return {kc.asDiagonal(), dc.asDiagonal(), kb.asDiagonal(), db.asDiagonal()};
  }

  static WrenchGains defaults() {
    return diagonal(Vec3(200.0, 200.0, 300.0), Vec3(30.0, 30.0, 40.0), Vec3(20.0, 20.0, 20.0),
                    Vec3(40.0, 40.0, 40.0));
  }

  void validate() const {
    for (const Mat3* m : {&com_stiffness, &com_damping, &orientation_stiffness, &momentum_damping}) {
      if ((*m - m->transpose()).cwiseAbs().maxCoeff() > 1e-9 || Eigen::LLT<Mat3>(*m).info() != Eigen::Success) {
        throw std::invalid_argument("WrenchGains: gain matrices must be symmetric positive definite");
      }
    }
  }
};

inline Vec6 desired_com_wrench(const BaseState& state, const PlanSample& ref, const WrenchGains& gains) {
  Vec6 w = ref.wrench;
  w.head<3>() += gains.com_stiffness * (ref.com_position - state.com_position) +
                 gains.com_damping * (ref.com_velocity - state.com_velocity);
  w.tail<3>() += gains.orientation_stiffness * quat_boxminus(ref.orientation, state.orientation) +
                 gains.momentum_damping * (ref.angular_momentum - state.angular_momentum);
  return w;
}

enum class FrictionConstraints {
  printed,            // F_x ≤ μF_z + ζ₁, F_y ≤ μF_z + ζ₂
  printed_unilateral, // printed plus F_z ≥ 0
  symmetric,          // |F_x| ≤ μF_z + ζ₁, |F_y| ≤ μF_z + ζ₂, F_z ≥ 0
};

struct AllocationSettings {
  double friction_coefficient = 0.8;
  double slack_weight = 1e6;  // α
  FrictionConstraints friction = FrictionConstraints::printed_unilateral;
};

struct ContactForceSolution {
  std::vector<Vec3> forces;  // one per contact, world frame
  Vec6 wrench_slack = Vec6::Zero();
  double friction_slack_x = 0.0;
  double friction_slack_y = 0.0;
  QpStatus status = QpStatus::optimal;
  int iterations = 0;
  double objective = 0.0;

  /// Σ(F_i; r_i × F_i) + η.
  Vec6 reconstructed_wrench(const std::vector<Vec3>& lever_arms) const {
    Vec6 w = wrench_slack;
    for (std::size_t i = 0; i < forces.size(); ++i) {
      w.head<3>() += forces[i];
      w.tail<3>() += lever_arms[i].cross(forces[i]);
    }
    return w;
  }
};

/// Builds the allocation QP. Variables: (F_1 … F_n, η, ζ₁, ζ₂). Lever arms
/// run from the CoM to each contact foot, world frame.
inline QpProblem allocation_problem(const Vec6& wrench, const std::vector<Vec3>& lever_arms,
                                    const AllocationSettings& s) {
  if (!(s.friction_coefficient > 0.0)) throw std::invalid_argument("allocate_forces: μ must be positive");
  if (!(s.slack_weight > 0.0)) throw std::invalid_argument("allocate_forces: α must be positive");
  const int nc = static_cast<int>(lever_arms.size());
  const int n = 3 * nc + 8;
  const int eta = 3 * nc;
  const int zeta = eta + 6;

  VecX h_diag = VecX::Constant(n, 2.0);
  h_diag.tail(8).setConstant(2.0 * s.slack_weight);
  QpProblem p(h_diag.asDiagonal().toDenseMatrix(), VecX::Zero(n));

  p.eq_matrix = MatX::Zero(6, n);
  for (int i = 0; i < nc; ++i) {
    p.eq_matrix.block<3, 3>(0, 3 * i).setIdentity();
    p.eq_matrix.block<3, 3>(3, 3 * i) = skew(lever_arms[i]);
  }
  p.eq_matrix.block<6, 6>(0, eta).setIdentity();
  p.eq_vector = wrench;

  const int per_foot = s.friction == FrictionConstraints::printed ? 2
                       : s.friction == FrictionConstraints::printed_unilateral ? 3 : 5;
  p.ineq_matrix = MatX::Zero(per_foot * nc, n);
  p.ineq_vector = VecX::Zero(per_foot * nc);
  const double mu = s.friction_coefficient;
  for (int i = 0; i < nc; ++i) {
    const int r = per_foot * i;
    const int f = 3 * i;
    p.ineq_matrix(r, f) = 1.0;
    p.ineq_matrix(r, f + 2) = -mu;
    p.ineq_matrix(r, zeta) = -1.0;
    p.ineq_matrix(r + 1, f + 1) = 1.0;
    p.ineq_matrix(r + 1, f + 2) = -mu;
    p.ineq_matrix(r + 1, zeta + 1) = -1.0;
    if (per_foot >= 3) p.ineq_matrix(r + 2, f + 2) = -1.0;
    if (per_foot == 5) {
      p.ineq_matrix(r + 3, f) = -1.0;
      p.ineq_matrix(r + 3, f + 2) = -mu;
      p.ineq_matrix(r + 3, zeta) = -1.0;
      p.ineq_matrix(r + 4, f + 1) = -1.0;
      p.ineq_matrix(r + 4, f + 2) = -mu;
      p.ineq_matrix(r + 4, zeta + 1) = -1.0;
    }
  }
  return p;
}

inline ContactForceSolution unpack_allocation(const QpSolution& qp, int num_contacts) {
  ContactForceSolution out;
  out.status = qp.status;
  out.iterations = qp.iterations;
  out.objective = qp.objective;
  for (int i = 0; i < num_contacts; ++i) out.forces.push_back(qp.z.segment<3>(3 * i));
  out.wrench_slack = qp.z.segment<6>(3 * num_contacts);
  out.friction_slack_x = qp.z[3 * num_contacts + 6];
  out.friction_slack_y = qp.z[3 * num_contacts + 7];
  return out;
}

inline ContactForceSolution allocate_forces(const Vec6& wrench, const std::vector<Vec3>& lever_arms,
                                            const AllocationSettings& settings, QpSolver& solver) {
  const QpProblem p = allocation_problem(wrench, lever_arms, settings);
  return unpack_allocation(solver.solve(p), static_cast<int>(lever_arms.size()));
}

inline ContactForceSolution allocate_forces(const Vec6& wrench, const std::vector<Vec3>& lever_arms,
                                            const AllocationSettings& settings = {}) {
  QpSolver solver;
  return allocate_forces(wrench, lever_arms, settings, solver);
}

struct LegImpedance {
  Mat3 stiffness = Vec3(150.0, 150.0, 150.0).asDiagonal().toDenseMatrix();  // N/m
  Mat3 damping = Vec3(4.0, 4.0, 4.0).asDiagonal().toDenseMatrix();          // N·s/m
};

/// τ = J_aᵀ(F + K(l_ref − l) + D(l̇_ref − l̇)), clamped. `force` is the
/// ground reaction wanted on the robot, base frame.
inline Vec2 leg_torques(const QuadrupedModel& model, int leg, const JointState& joints, const Vec3& force,
                        const FootReference& ref, const LegImpedance& impedance) {
  const auto ja = actuated_jacobian(model, joints.q);
  const Vec3 l = leg_vector(model, leg, joints.q);
  const Vec3 ld = ja * joints.qd;
  const Vec3 f = force + impedance.stiffness * (ref.leg_vector - l) + impedance.damping * (ref.leg_velocity - ld);
  return clamp_torques(model.leg, ja.transpose() * f);
}

enum class ContactRule {
  plan_and_sensor,              // planned AND sensed
  plan_and_sensor_early_touch,  // as above, plus sensed contact during late swing
  plan_only,
  sensor_only,
};

inline bool contact_active(ContactRule rule, const FootReference& ref, bool sensed) {
  switch (rule) {
    case ContactRule::plan_and_sensor: return ref.contact && sensed;
    case ContactRule::plan_and_sensor_early_touch: return sensed && (ref.contact || ref.late_swing);
    case ContactRule::plan_only: return ref.contact;
    case ContactRule::sensor_only: return sensed;
  }
  return false;
}

struct RobotState {
  double time = 0.0;
  BaseState base;
  std::array<JointState, kNumLegs> legs{};
};

struct ControllerConfig {
  WrenchGains wrench = WrenchGains::defaults();
  LegImpedance leg;
  AllocationSettings allocation;
  ContactRule contact_rule = ContactRule::plan_and_sensor_early_touch;
  double plan_time_tolerance = 5e-4;  // s
};

struct ControlOutput {
  std::array<Vec2, kNumLegs> torques = zero_array<Vec2, kNumLegs>();
  std::array<bool, kNumLegs> contact{};
  std::array<Vec3, kNumLegs> forces = zero_array<Vec3, kNumLegs>();  // world frame, zero for swing legs
  Vec6 wrench = Vec6::Zero();
  ContactForceSolution allocation;
};

/// CoM-to-foot lever arm in the world frame.
inline Vec3 lever_arm(const QuadrupedModel& model, const BaseState& base, int leg, const Vec2& q) {
  return base.orientation * (foot_in_base(model, leg, q) - model.com_offset);
}

class CentroidalController {
 public:
  CentroidalController(QuadrupedModel model, ControllerConfig config)
      : model_(std::move(model)), config_(std::move(config)) {
    config_.wrench.validate();
  }

  const QuadrupedModel& model() const { return model_; }
  const ControllerConfig& config() const { return config_; }

  ControlOutput step(const RobotState& state, const PlanSample& ref, const std::array<bool, kNumLegs>& sensed) {
    if (!(std::abs(ref.time - state.time) <= config_.plan_time_tolerance)) {
      throw StalePlan("control_step: plan sample at t=" + std::to_string(ref.time) +
                      " does not match state time " + std::to_string(state.time));
    }
    ControlOutput out;
    out.wrench = desired_com_wrench(state.base, ref, config_.wrench);

    std::vector<Vec3> arms;
    std::array<int, kNumLegs> slot{};
    for (int i = 0; i < kNumLegs; ++i) {
      out.contact[i] = contact_active(config_.contact_rule, ref.feet[i], sensed[i]);
      slot[i] = -1;
      if (out.contact[i]) {
        slot[i] = static_cast<int>(arms.size());
        arms.push_back(lever_arm(model_, state.base, i, state.legs[i].q));
      }
    }
    out.allocation = allocate_forces(out.wrench, arms, config_.allocation, solver_);
    if (out.allocation.status != QpStatus::optimal) {
      throw Error(std::string("control_step: force allocation returned ") + to_string(out.allocation.status));
    }

    const Mat3 world_to_base = state.base.orientation.toRotationMatrix().transpose();
    for (int i = 0; i < kNumLegs; ++i) {
      out.forces[i] = slot[i] >= 0 ? out.allocation.forces[slot[i]] : Vec3::Zero();
      out.torques[i] = leg_torques(model_, i, state.legs[i], world_to_base * out.forces[i], ref.feet[i], config_.leg);
    }
    return out;
  }

 private:
  QuadrupedModel model_;
  ControllerConfig config_;
  QpSolver solver_;
};

inline ControlOutput control_step(const QuadrupedModel& model, const ControllerConfig& config,
                                  const RobotState& state, const PlanSample& ref,
                                  const std::array<bool, kNumLegs>& sensed) {
  CentroidalController controller(model, config);
  return controller.step(state, ref, sensed);
}

}  // namespace quadctl
