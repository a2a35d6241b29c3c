#pragma once

// Planar two-segment leg: kinematics, Jacobian and the current-controlled
// actuator model.
//
// Angle convention: q = (hip, knee) = (0, 0) is the straight leg pointing
// down. The knee angle is measured between the two segments. Foot positions
// are (forward, up) relative to the hip.

#include <quadctl/common.hpp>

#include <stdexcept>

namespace quadctl {

struct LegParams {
  double segment_length = 0.160;          // m
  double gear_ratio = 9.0;                // -
  double torque_constant = 0.025;         // N·m/A, motor side
  double max_current = 12.0;              // A
  double joint_friction_coulomb = 0.0;    // N·m
  double transmission_stiffness = kInf;   // N·m/rad, kInf = rigid

  /// Joint torque per ampere of motor current.
  double torque_per_amp() const { return torque_constant * gear_ratio; }
  double max_torque() const { return torque_per_amp() * max_current; }
  double reach() const { return 2.0 * segment_length; }
  bool rigid_transmission() const { return !std::isfinite(transmission_stiffness); }

  void validate() const {
    if (!(segment_length > 0.0) || !(gear_ratio > 0.0) || !(torque_constant > 0.0) ||
        !(max_current > 0.0) || !(transmission_stiffness > 0.0) || joint_friction_coulomb < 0.0) {
      throw std::invalid_argument("LegParams: lengths, gear ratio, torque constant, current limit "
                                  "and transmission stiffness must be strictly positive");
    }
  }
};

struct JointState {
  Vec2 q = Vec2::Zero();   // rad, multi-turn
  Vec2 qd = Vec2::Zero();  // rad/s
};

struct FootState {
  Vec2 x = Vec2::Zero();   // m, relative to hip
  Vec2 xd = Vec2::Zero();  // m/s
};

namespace detail {
// Planar unit vector of a segment at absolute angle theta from straight down.
inline Vec2 segment_dir(double theta) { return {std::sin(theta), -std::cos(theta)}; }
inline Vec2 segment_dir_derivative(double theta) { return {std::cos(theta), std::sin(theta)}; }
}  // namespace detail

inline Vec2 forward_kinematics(const LegParams& params, const Vec2& q) {
  const double l = params.segment_length;
  return l * (detail::segment_dir(q[0]) + detail::segment_dir(q[0] + q[1]));
}

inline Vec2 knee_position(const LegParams& params, const Vec2& q) {
  return params.segment_length * detail::segment_dir(q[0]);
}

/// d(foot position)/d(q). det(J) = L² sin(q_knee).
inline Mat2 foot_jacobian(const LegParams& params, const Vec2& q) {
  const double l = params.segment_length;
  const Vec2 thigh = detail::segment_dir_derivative(q[0]);
  const Vec2 shank = detail::segment_dir_derivative(q[0] + q[1]);
  Mat2 jac;
  jac.col(0) = l * (thigh + shank);
  jac.col(1) = l * shank;
  return jac;
}

inline FootState foot_state(const LegParams& params, const JointState& joints) {
  return {forward_kinematics(params, joints.q), foot_jacobian(params, joints.q) * joints.qd};
}

/// Joint angles placing the foot at x. `bend` selects the knee branch
/// (+1: positive knee angle). Throws SingularConfiguration when x is out of
/// reach.
inline Vec2 inverse_kinematics(const LegParams& params, const Vec2& x, double bend = 1.0) {
  const double l = params.segment_length;
  const double r = x.norm();
  if (r > 2.0 * l) throw SingularConfiguration("inverse_kinematics: foot target out of reach");
  const double half_knee = std::acos(std::clamp(r / (2.0 * l), -1.0, 1.0));
  const double knee = (bend >= 0.0 ? 2.0 : -2.0) * half_knee;
  const double direction = std::atan2(x[0], -x[1]);
  return {direction - 0.5 * knee, knee};
}

/// Posture with the foot directly beneath the hip at distance leg_height.
inline Vec2 symmetric_posture(const LegParams& params, double leg_height, double bend = 1.0) {
  return inverse_kinematics(params, Vec2(0.0, -leg_height), bend);
}

inline double torque_from_current(const LegParams& params, double current) {
  return clamp_abs(params.torque_per_amp() * current, params.max_torque());
}

inline double current_from_torque(const LegParams& params, double torque) {
  return clamp_abs(torque / params.torque_per_amp(), params.max_current);
}

inline Vec2 clamp_torques(const LegParams& params, const Vec2& tau) {
  const double limit = params.max_torque();
  return {clamp_abs(tau[0], limit), clamp_abs(tau[1], limit)};
}

/// Largest vertical foot force available in the symmetric posture at the given
/// hip-to-foot distance, with the knee at its torque limit. Grows without
/// bound towards full extension, where SingularConfiguration is thrown.
inline double max_vertical_force(const LegParams& params, double leg_height) {
  if (!(leg_height > 0.0)) throw std::invalid_argument("max_vertical_force: leg_height must be positive");
  if (leg_height >= params.reach() * (1.0 - 1e-12)) {
    throw SingularConfiguration("max_vertical_force: leg fully extended, force unbounded");
  }
  const Vec2 q = symmetric_posture(params, leg_height);
  const Mat2 jt = foot_jacobian(params, q).transpose();
  const Vec2 force = jt.partialPivLu().solve(Vec2(0.0, params.max_torque()));
  return std::abs(force[1]);
}

/// k·l0/(m·g). Zero stiffness maps to zero.
inline double dimensionless_stiffness(double stiffness, double rest_length, double mass,
                                      double gravity = kGravity) {
  if (stiffness < 0.0 || !(rest_length > 0.0) || !(mass > 0.0) || !(gravity > 0.0)) {
    throw std::invalid_argument("dimensionless_stiffness: arguments must be positive");
  }
  return stiffness * rest_length / (mass * gravity);
}

}  // namespace quadctl
