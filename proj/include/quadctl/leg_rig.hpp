#pragma once

// Single leg on a vertical slider. Generalized coordinates s = (y, q_hip,
// q_knee) with y the hip height; point masses at the hip, along the thigh,
// along the shank and at the foot; reflected rotor inertia on each joint;
// penalty ground contact at the foot. Semi-implicit Euler.

#include <quadctl/leg_model.hpp>

#include <array>
#include <functional>
#include <optional>
#include <string>

namespace quadctl {

// Tangential contact is a spring-damper to a sticking anchor that slides
// whenever the spring force would exceed the Coulomb limit.
struct GroundContact {
  double stiffness = 5e4;              // N/m
  double damping = 50.0;               // N·s/m
  double friction = 1.0;               // μ
  double tangential_stiffness = 5e4;   // N/m
  double tangential_damping = 50.0;    // N·s/m
};

struct LegRigParams {
  LegParams leg;
  double carried_mass = 6.0 / kGravity;  // kg, everything on the slider including the leg
  double thigh_mass = 0.15;              // kg, knee motor included
  double thigh_com = 0.25;               // fraction of segment length from the hip
  double shank_mass = 0.03;
  double shank_com = 0.5;
  double foot_mass = 0.01;
  double rotor_inertia = 6e-6;           // kg·m², motor side
  double friction_velocity = 0.05;       // rad/s, tanh regularization of joint Coulomb friction
  double foot_offset = 0.0;              // m, contact point below the kinematic foot
  GroundContact ground;
  double gravity = kGravity;

  double hip_mass() const { return carried_mass - thigh_mass - shank_mass - foot_mass; }
  double reflected_inertia() const { return rotor_inertia * leg.gear_ratio * leg.gear_ratio; }

  void validate() const {
    leg.validate();
    if (!(hip_mass() > 0.0)) throw std::invalid_argument("LegRigParams: link masses exceed carried mass");
    if (thigh_mass < 0.0 || shank_mass < 0.0 || !(foot_mass > 0.0) || rotor_inertia < 0.0) {
      throw std::invalid_argument("LegRigParams: masses and inertia must be nonnegative (foot mass positive)");
    }
  }
};

enum class ModelPreset { ideal, friction, flexible, hardware };

inline const char* to_string(ModelPreset p) {
  switch (p) {
    case ModelPreset::ideal: return "ideal";
    case ModelPreset::friction: return "friction";
    case ModelPreset::flexible: return "flexible";
    case ModelPreset::hardware: return "hardware";
  }
  return "?";
}

inline ModelPreset parse_preset(const std::string& name) {
  if (name == "ideal") return ModelPreset::ideal;
  if (name == "friction") return ModelPreset::friction;
  if (name == "flexible") return ModelPreset::flexible;
  if (name == "hardware") return ModelPreset::hardware;
  throw std::invalid_argument("unknown model preset '" + name + "'");
}

inline constexpr double kPresetJointFriction = 0.05;         // N·m
inline constexpr double kPresetTransmissionStiffness = 16.0; // N·m/rad

inline LegRigParams rig_preset(ModelPreset preset) {
  LegRigParams p;
  if (preset == ModelPreset::friction || preset == ModelPreset::hardware) {
    p.leg.joint_friction_coulomb = kPresetJointFriction;
  }
  if (preset == ModelPreset::flexible || preset == ModelPreset::hardware) {
    p.leg.transmission_stiffness = kPresetTransmissionStiffness;
  }
  return p;
}

struct LegRigState {
  double time = 0.0;
  double slider_height = 0.3;   // m, hip above ground datum
  double slider_velocity = 0.0; // m/s
  JointState joints;
  double ground_height = 0.0;
  std::optional<double> anchor;  // m, horizontal stick point while in contact
};

/// How the slider moves during a step.
struct SliderDrive {
  enum class Mode { free, prescribed } mode = Mode::free;
  double velocity = 0.0;      // used when prescribed
  double acceleration = 0.0;  // used when prescribed
};

struct ContactForce {
  double normal = 0.0;      // N, on the foot, ≥ 0
  double tangential = 0.0;  // N
  bool in_contact = false;
};

namespace detail {

struct PointMass {
  double mass;
  double c1;  // along thigh
  double c2;  // along shank
};

}  // namespace detail

class LegRig {
 public:
  explicit LegRig(LegRigParams params = {}) : params_(std::move(params)) {
    params_.validate();
    const double l = params_.leg.segment_length;
    masses_ = {{{params_.hip_mass(), 0.0, 0.0},
                {params_.thigh_mass, params_.thigh_com * l, 0.0},
                {params_.shank_mass, l, params_.shank_com * l},
                {params_.foot_mass, l, l}}};
  }

  const LegRigParams& params() const { return params_; }

  /// Foot contact point in the rig frame (x horizontal, z up).
  Vec2 foot_position(const LegRigState& s) const {
    const Vec2 x = forward_kinematics(params_.leg, s.joints.q);
    return {x[0], s.slider_height + x[1] - params_.foot_offset};
  }

  Vec2 foot_velocity(const LegRigState& s) const {
    return foot_jacobian(params_.leg, s.joints.q) * s.joints.qd + Vec2(0.0, s.slider_velocity);
  }

  /// Hip height minus kinematic foot height.
  double leg_length(const LegRigState& s) const { return -forward_kinematics(params_.leg, s.joints.q)[1]; }

  ContactForce contact_force(const LegRigState& s) const {
    ContactForce f;
    const Vec2 p = foot_position(s);
    const double penetration = s.ground_height - p[1];
    if (penetration <= 0.0) return f;
    const Vec2 v = foot_velocity(s);
    const GroundContact& g = params_.ground;
    f.normal = std::max(0.0, g.stiffness * penetration - g.damping * v[1]);
    f.in_contact = f.normal > 0.0;
    const double anchor = s.anchor.value_or(p[0]);
    const double limit = g.friction * f.normal;
    f.tangential = std::clamp(-g.tangential_stiffness * (p[0] - anchor) - g.tangential_damping * v[0], -limit, limit);
    return f;
  }

  /// System centre of mass height and vertical velocity.
  Vec2 com_vertical(const LegRigState& s) const {
    double m = 0.0, z = 0.0, zd = 0.0;
    for (const auto& pm : masses_) {
      const auto [pos, jac] = point_kinematics(pm, s.joints.q);
      const Eigen::Vector3d sd(s.slider_velocity, s.joints.qd[0], s.joints.qd[1]);
      m += pm.mass;
      z += pm.mass * (s.slider_height + pos[1]);
      zd += pm.mass * (jac.row(1).dot(sd));
    }
    return {z / m, zd / m};
  }

  double energy(const LegRigState& s) const {
    const Eigen::Vector3d sd(s.slider_velocity, s.joints.qd[0], s.joints.qd[1]);
    double kinetic = 0.5 * sd.dot(mass_matrix(s.joints.q) * sd);
    double potential = 0.0;
    for (const auto& pm : masses_) {
      potential += pm.mass * params_.gravity * (s.slider_height + point_kinematics(pm, s.joints.q).first[1]);
    }
    const double penetration = s.ground_height - foot_position(s)[1];
    if (penetration > 0.0) potential += 0.5 * params_.ground.stiffness * penetration * penetration;
    return kinetic + potential;
  }

  /// Torques actually applied at the joints (after the current limit).
  Vec2 applied_torque() const { return applied_; }

  /// Joint state as seen by the motor encoders. With a flexible
  /// transmission the motor side leads the link by τ/k.
  JointState measured_joints(const LegRigState& s) const {
    JointState m = s.joints;
    if (!params_.leg.rigid_transmission()) m.q += applied_ / params_.leg.transmission_stiffness;
    return m;
  }

  /// Advances one step of length dt with joint torques held constant.
  LegRigState step(const LegRigState& s, const Vec2& torque, double dt, const SliderDrive& drive = {}) {
    if (!(dt > 0.0) || dt > 1e-3) throw std::invalid_argument("LegRig::step: dt must lie in (0, 1 ms]");
    applied_ = clamp_torques(params_.leg, torque);
    const Eigen::Vector3d sd(s.slider_velocity, s.joints.qd[0], s.joints.qd[1]);
    const Eigen::Matrix3d m = mass_matrix(s.joints.q);
    Eigen::Vector3d rhs = Eigen::Vector3d::Zero();

    for (const auto& pm : masses_) {
      const auto [pos, jac] = point_kinematics(pm, s.joints.q);
      (void)pos;
      const Vec2 bias = point_bias(pm, s.joints);
      rhs += pm.mass * jac.transpose() * (Vec2(0.0, -params_.gravity) - bias);
    }
    rhs[1] += applied_[0];
    rhs[2] += applied_[1];
    const double tc = params_.leg.joint_friction_coulomb;
    if (tc > 0.0) {
      rhs[1] -= tc * std::tanh(s.joints.qd[0] / params_.friction_velocity);
      rhs[2] -= tc * std::tanh(s.joints.qd[1] / params_.friction_velocity);
    }
    last_contact_ = contact_force(s);
    if (last_contact_.in_contact) {
      const auto foot_jac = point_kinematics(masses_[3], s.joints.q).second;
      rhs += foot_jac.transpose() * Vec2(last_contact_.tangential, last_contact_.normal);
    }

    Eigen::Vector3d acc;
    if (drive.mode == SliderDrive::Mode::free) {
      acc = m.ldlt().solve(rhs);
    } else {
      acc[0] = drive.acceleration;
      const Vec2 rq = rhs.tail<2>() - m.block<2, 1>(1, 0) * drive.acceleration;
      acc.tail<2>() = m.block<2, 2>(1, 1).ldlt().solve(rq);
    }

    LegRigState n = s;
    n.time = s.time + dt;
    n.slider_velocity = drive.mode == SliderDrive::Mode::free ? s.slider_velocity + dt * acc[0] : drive.velocity;
    n.joints.qd = s.joints.qd + dt * acc.tail<2>();
    n.slider_height = s.slider_height + dt * n.slider_velocity;
    n.joints.q = s.joints.q + dt * n.joints.qd;
    update_anchor(n);
    if (!std::isfinite(n.slider_height) || !n.joints.q.allFinite() || !n.joints.qd.allFinite() ||
        !std::isfinite(n.slider_velocity)) {
      throw SimulationDiverged("LegRig::step: non-finite state at t=" + std::to_string(n.time));
    }
    return n;
  }

  /// Contact force evaluated at the start of the last step.
  const ContactForce& last_contact() const { return last_contact_; }

  Eigen::Matrix3d mass_matrix(const Vec2& q) const {
    Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
    for (const auto& pm : masses_) {
      const auto jac = point_kinematics(pm, q).second;
      m += pm.mass * jac.transpose() * jac;
    }
    m(1, 1) += params_.reflected_inertia();
    m(2, 2) += params_.reflected_inertia();
    return m;
  }

 private:
  // Anchor follows the foot while sliding so that the spring stays at the
  // friction limit; cleared on lift-off.
  void update_anchor(LegRigState& s) const {
    const Vec2 p = foot_position(s);
    if (p[1] >= s.ground_height) {
      s.anchor.reset();
      return;
    }
    if (!s.anchor) {
      s.anchor = p[0];
      return;
    }
    const GroundContact& g = params_.ground;
    const double normal = std::max(0.0, g.stiffness * (s.ground_height - p[1]) - g.damping * foot_velocity(s)[1]);
    const double reach = g.friction * normal / g.tangential_stiffness;
    s.anchor = std::clamp(*s.anchor, p[0] - reach, p[0] + reach);
  }

  using PointJacobian = Eigen::Matrix<double, 2, 3>;

  /// Position relative to the hip and ∂p/∂(y, q1, q2).
  static std::pair<Vec2, PointJacobian> point_kinematics(const detail::PointMass& pm, const Vec2& q) {
    const double phi1 = q[0];
    const double phi2 = q[0] + q[1];
    const Vec2 u1(std::sin(phi1), -std::cos(phi1));
    const Vec2 u2(std::sin(phi2), -std::cos(phi2));
    const Vec2 du1(std::cos(phi1), std::sin(phi1));
    const Vec2 du2(std::cos(phi2), std::sin(phi2));
    PointJacobian jac;
    jac.col(0) = Vec2(0.0, 1.0);
    jac.col(1) = pm.c1 * du1 + pm.c2 * du2;
    jac.col(2) = pm.c2 * du2;
    return {pm.c1 * u1 + pm.c2 * u2, jac};
  }

  /// J̇·ṡ for a point mass.
  static Vec2 point_bias(const detail::PointMass& pm, const JointState& j) {
    const double phi1 = j.q[0];
    const double phi2 = j.q[0] + j.q[1];
    const double w1 = j.qd[0];
    const double w2 = j.qd[0] + j.qd[1];
    return -pm.c1 * w1 * w1 * Vec2(std::sin(phi1), -std::cos(phi1)) -
           pm.c2 * w2 * w2 * Vec2(std::sin(phi2), -std::cos(phi2));
  }

  LegRigParams params_;
  std::array<detail::PointMass, 4> masses_{};
  Vec2 applied_ = Vec2::Zero();
  ContactForce last_contact_;
};

inline LegRigState step_leg(LegRig& rig, const LegRigState& state, const Vec2& torque, double dt,
                            const SliderDrive& drive = {}) {
  return rig.step(state, torque, dt, drive);
}

inline constexpr double kPhysicsDt = 1e-4;  // s
inline constexpr double kControlDt = 1e-3;  // s
inline constexpr int kSubsteps = 10;

/// State with the leg in the symmetric posture at `leg_length`, hip at
/// `hip_height`, at rest.
inline LegRigState rig_state_at(const LegRigParams& params, double hip_height, double leg_length) {
  LegRigState s;
  s.slider_height = hip_height;
  s.joints.q = symmetric_posture(params.leg, leg_length);
  return s;
}

}  // namespace quadctl
