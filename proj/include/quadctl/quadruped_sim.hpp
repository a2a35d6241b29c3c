#pragma once

// Quadruped test model: a centroidal rigid body with locked inertia and four
// massless planar legs. Stance feet are pinned to ground anchors and push
// on the body with the force their joint torques produce; swing legs are
// integrated as decoupled joint inertias. A foot sensor stream runs per leg.

#include <quadctl/centroidal_control.hpp>
#include <quadctl/contact.hpp>

#include <vector>

namespace quadctl {

struct CentroidalBody {
  double mass = 2.2;  // kg
  Mat3 locked_inertia = Eigen::Vector3d(0.02, 0.033, 0.05).asDiagonal();  // kg·m², base frame
  double gravity = kGravity;
};

struct AppliedForce {
  Vec3 point = Vec3::Zero();  // m, world
  Vec3 force = Vec3::Zero();  // N, world
};

/// ω = (R I Rᵀ)⁻¹ k.
inline Vec3 angular_velocity(const CentroidalBody& body, const BaseState& s) {
  const Mat3 r = s.orientation.toRotationMatrix();
  return r * body.locked_inertia.ldlt().solve(r.transpose() * s.angular_momentum);
}

/// Semi-implicit Euler on the centroidal dynamics: m·ẍ = ΣF − m·g·e_z,
/// k̇ = Σ (p_i − x_c) × F_i, orientation advanced by exp(ω·dt).
inline BaseState step_centroidal(const CentroidalBody& body, const BaseState& s,
                                 const std::vector<AppliedForce>& forces, double dt) {
  if (!(dt > 0.0) || dt > 1e-3) throw std::invalid_argument("step_centroidal: dt must lie in (0, 1 ms]");
  Vec3 f = Vec3(0.0, 0.0, -body.mass * body.gravity);
  Vec3 torque = Vec3::Zero();
  for (const AppliedForce& a : forces) {
    f += a.force;
    torque += (a.point - s.com_position).cross(a.force);
  }
  BaseState n = s;
  n.com_velocity = s.com_velocity + dt * f / body.mass;
  n.com_position = s.com_position + dt * n.com_velocity;
  n.angular_momentum = s.angular_momentum + dt * torque;
  n.orientation = quat_boxplus(s.orientation, dt * angular_velocity(body, n));
  return n;
}

// ------------------------------------------------------------------ terrain

/// Ground height as a function of the horizontal position.
struct HeightField {
  enum class Kind { flat, step, seesaw } kind = Kind::flat;
  double step_x = 0.0;        // m, edge position (step)
  double step_height = 0.0;   // m
  Vec2 plank_center = Vec2::Zero();  // m, pivot (seesaw)
  double plank_half_length = 0.3;    // m, along x
  double plank_half_width = 0.3;     // m, along y
  double plank_height = 0.0;         // m, pivot height
  double plank_pitch = 0.0;          // rad, rising towards +x

  static HeightField flat() { return {}; }
  static HeightField step(double x, double height) {
    HeightField h;
    h.kind = Kind::step;
    h.step_x = x;
    h.step_height = height;
    return h;
  }
  static HeightField seesaw(const Vec2& center, double pitch, double pivot_height = 0.0) {
    HeightField h;
    h.kind = Kind::seesaw;
    h.plank_center = center;
    h.plank_pitch = pitch;
    h.plank_height = pivot_height;
    return h;
  }

  double height(double x, double y) const {
    switch (kind) {
      case Kind::flat: return 0.0;
      case Kind::step: return x >= step_x ? step_height : 0.0;
      case Kind::seesaw: {
        const double dx = x - plank_center.x();
        if (std::abs(dx) > plank_half_length || std::abs(y - plank_center.y()) > plank_half_width) return 0.0;
        return std::max(0.0, plank_height + std::tan(plank_pitch) * dx);
      }
    }
    return 0.0;
  }
};

struct GroundModel {
  double friction = 0.8;  // μ
  HeightField terrain;
};

inline const char* to_string(HeightField::Kind k) {
  switch (k) {
    case HeightField::Kind::flat: return "flat";
    case HeightField::Kind::step: return "step";
    case HeightField::Kind::seesaw: return "seesaw";
  }
  return "?";
}

// --------------------------------------------------------------- quadruped

struct QuadrupedSimParams {
  QuadrupedModel model;
  GroundModel ground;
  double lateral_stiffness = 2e4;  // N/m, stance leg out-of-plane compliance
  double lateral_damping = 100.0;  // N·s/m
  double swing_inertia = 5e-4;     // kg·m², link inertia per joint, reflected rotor added
  double rotor_inertia = 6e-6;     // kg·m², motor side
  SensorModel sensor;
  std::uint64_t seed = 0;

  CentroidalBody body() const { return {model.mass, model.locked_inertia, kGravity}; }
  double joint_inertia() const { return swing_inertia + rotor_inertia * model.leg.gear_ratio * model.leg.gear_ratio; }
};

struct FootStatus {
  bool stance = false;
  Vec3 anchor = Vec3::Zero();  // m, world, valid in stance
  Vec3 force = Vec3::Zero();   // N, ground reaction on the robot, world
  bool slipping = false;       // tangential force clipped to the friction cone
  double lateral_error = 0.0;  // m, out-of-plane offset of the anchor (base frame)
};

class QuadrupedSim {
 public:
  /// Starts at rest with every foot pinned where its joint angles put it on
  /// the terrain (feet above ground start in swing).
  QuadrupedSim(QuadrupedSimParams params, const BaseState& base, const std::array<Vec2, kNumLegs>& q)
      : params_(std::move(params)), body_(params_.body()) {
    state_.base = base;
    for (int i = 0; i < kNumLegs; ++i) {
      sensors_.emplace_back(params_.sensor, params_.seed + 7919u * static_cast<std::uint64_t>(i + 1));
      detectors_.push_back(make_sensor_detector(params_.sensor));
      state_.legs[i].q = q[i];
      const Vec3 p = foot_world(i, q[i]);
      const double ground = params_.ground.terrain.height(p.x(), p.y());
      if (p.z() <= ground + 1e-9) {
        feet_[i].stance = true;
        feet_[i].anchor = Vec3(p.x(), p.y(), ground);
        lateral_prev_[i] = lateral_error(i);
      }
    }
  }

  const QuadrupedSimParams& params() const { return params_; }
  const RobotState& state() const { return state_; }
  const std::array<FootStatus, kNumLegs>& feet() const { return feet_; }
  double time() const { return state_.time; }

  /// Comparator outputs of the foot sensors.
  std::array<bool, kNumLegs> sensed_contact() const {
    std::array<bool, kNumLegs> out{};
    for (int i = 0; i < kNumLegs; ++i) out[i] = detectors_[i].state();
    return out;
  }

  std::array<double, kNumLegs> sensor_voltages() const { return voltages_; }

  /// Pre-loads sensors with a static force per foot (e.g. the standing load).
  void settle_sensors(const std::array<double, kNumLegs>& normal_forces) {
    for (int i = 0; i < kNumLegs; ++i) {
      sensors_[i].settle(normal_forces[i]);
      voltages_[i] = params_.sensor.static_voltage(normal_forces[i]);
      detectors_[i].update(state_.time, voltages_[i]);
    }
  }

  Vec3 foot_world(int leg, const Vec2& q) const {
    const Vec3 base_origin = state_.base.com_position - state_.base.orientation * params_.model.com_offset;
    return base_origin + state_.base.orientation * foot_in_base(params_.model, leg, q);
  }

  int slip_events() const { return slip_events_; }
  int liftoffs() const { return liftoffs_; }
  int touchdowns() const { return touchdowns_; }

  /// Total ground reaction on the robot, world.
  Vec3 total_force() const {
    Vec3 f = Vec3::Zero();
    for (const auto& ft : feet_) f += ft.force;
    return f;
  }

  /// One physics step with joint torques held (clamped to the actuator limit).
  void step(const std::array<Vec2, kNumLegs>& torques, double dt) {
    if (!(dt > 0.0) || dt > 1e-3) throw std::invalid_argument("QuadrupedSim::step: dt must lie in (0, 1 ms]");
    const QuadrupedModel& model = params_.model;
    const Mat3 rot = state_.base.orientation.toRotationMatrix();
    std::vector<AppliedForce> applied;
    for (int i = 0; i < kNumLegs; ++i) {
      const Vec2 tau = clamp_torques(model.leg, torques[i]);
      FootStatus& foot = feet_[i];
      foot.slipping = false;
      foot.force.setZero();
      if (foot.stance) {
        const Vec3 world_foot = foot.anchor;
        if (!stance_force(i, tau, rot, dt)) {
          lift_off(i);
        } else {
          applied.push_back({world_foot, foot.force});
        }
      }
    }
    state_.base = step_centroidal(body_, state_.base, applied, dt);
    state_.time += dt;

    const double inertia = params_.joint_inertia();
    for (int i = 0; i < kNumLegs; ++i) {
      FootStatus& foot = feet_[i];
      JointState& j = state_.legs[i];
      if (foot.stance) {
        // Kinematic leg: joints follow the body over the fixed anchor.
        try {
          const Vec2 q = pinned_joints(i);
          j.qd = (q - j.q) / dt;
          j.q = q;
        } catch (const SingularConfiguration&) {
          lift_off(i);
        }
      } else {
        const Vec2 tau = clamp_torques(model.leg, torques[i]);
        j.qd += dt * tau / inertia;
        j.q += dt * j.qd;
        const Vec3 p = foot_world(i, j.q);
        const double ground = params_.ground.terrain.height(p.x(), p.y());
        if (p.z() <= ground) {
          foot.stance = true;
          foot.anchor = Vec3(p.x(), p.y(), ground);
          lateral_prev_[i] = lateral_error(i);
          ++touchdowns_;
        }
      }
      voltages_[i] = sensors_[i].update(std::max(0.0, foot.force.z()), dt);
      detectors_[i].update(state_.time, voltages_[i]);
    }
    if (!state_.base.com_position.allFinite() || !state_.base.angular_momentum.allFinite()) {
      throw SimulationDiverged("QuadrupedSim: non-finite base state at t=" + std::to_string(state_.time));
    }
  }

  /// One control period of substeps.
  void advance(const std::array<Vec2, kNumLegs>& torques, int substeps = 10, double dt = 1e-4) {
    for (int k = 0; k < substeps; ++k) step(torques, dt);
  }

 private:
  double lateral_error(int leg) const {
    const Vec3 base_origin = state_.base.com_position - state_.base.orientation * params_.model.com_offset;
    const Vec3 anchor_base = state_.base.orientation.inverse() * (feet_[leg].anchor - base_origin);
    return anchor_base.y() - params_.model.hip_offsets[leg].y();
  }

  /// Joint angles reaching the anchor in the leg plane. Throws when out of reach.
  Vec2 pinned_joints(int leg) const {
    const Vec3 base_origin = state_.base.com_position - state_.base.orientation * params_.model.com_offset;
    const Vec3 anchor_base = state_.base.orientation.inverse() * (feet_[leg].anchor - base_origin);
    return leg_inverse_kinematics(params_.model, leg, anchor_base);
  }

  /// Ground reaction from the held torques. Returns false when the foot
  /// must leave the ground (pulling, or the anchor out of reach).
  bool stance_force(int leg, const Vec2& tau, const Mat3& rot, double dt) {
    FootStatus& foot = feet_[leg];
    Vec2 q;
    try {
      q = pinned_joints(leg);
    } catch (const SingularConfiguration&) {
      return false;
    }
    const Mat2 jac = foot_jacobian(params_.model.leg, q);
    if (std::abs(jac.determinant()) < 1e-6) return false;
    // τ = J_aᵀ F with J_a = −embed(J): F_xz = −J⁻ᵀ τ.
    const Vec2 fxz = -jac.transpose().partialPivLu().solve(tau);
    const double e = lateral_error(leg);
    const double fy = params_.lateral_stiffness * e + params_.lateral_damping * (e - lateral_prev_[leg]) / dt;
    lateral_prev_[leg] = e;
    foot.lateral_error = e;
    Vec3 f = rot * Vec3(fxz[0], fy, fxz[1]);
    if (f.z() < 0.0) return false;
    const double limit = params_.ground.friction * f.z();
    const double tangential = f.head<2>().norm();
    if (tangential > limit) {
      f.head<2>() *= limit / tangential;
      foot.slipping = true;
      ++slip_events_;
    }
    foot.force = f;
    return true;
  }

  void lift_off(int leg) {
    feet_[leg].stance = false;
    feet_[leg].force.setZero();
    ++liftoffs_;
  }

  QuadrupedSimParams params_;
  CentroidalBody body_;
  RobotState state_;
  std::array<FootStatus, kNumLegs> feet_{};
  std::array<double, kNumLegs> lateral_prev_{};
  std::array<double, kNumLegs> voltages_{};
  std::vector<SensorStream> sensors_;
  std::vector<ThresholdDetector> detectors_;
  int slip_events_ = 0;
  int liftoffs_ = 0;
  int touchdowns_ = 0;
};

/// Joint angles for a symmetric stance at the given leg length.
inline std::array<Vec2, kNumLegs> standing_joints(const QuadrupedModel& model, double leg_length) {
  std::array<Vec2, kNumLegs> q = zero_array<Vec2, kNumLegs>();
  for (int i = 0; i < kNumLegs; ++i) q[i] = symmetric_posture(model.leg, leg_length, model.knee_bend[i]);
  return q;
}

}  // namespace quadctl
