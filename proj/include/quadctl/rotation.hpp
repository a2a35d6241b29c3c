#pragma once

#include <quadctl/common.hpp>

namespace quadctl {

/// Rotation vector (axis·angle, angle in [0, π]) of a unit quaternion.
inline Vec3 quat_log(const Quat& q_in) {
  Quat q = q_in.normalized();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  const Vec3 v = q.vec();
  const double s = v.norm();
  const double w = q.w();
  // 2·atan2(s, w)/s, with its series near s = 0.
  double scale;
  if (s > 1e-8) {
    scale = 2.0 * std::atan2(s, w) / s;
  } else {
    scale = 2.0 / w * (1.0 - s * s / (3.0 * w * w));
  }
  return scale * v;
}

inline Quat quat_exp(const Vec3& rotation) {
  const double angle = rotation.norm();
  const double half = 0.5 * angle;
  const double sinc_half = angle > 1e-8 ? std::sin(half) / angle : 0.5 - angle * angle / 48.0;
  Quat q;
  q.w() = std::cos(half);
  q.vec() = sinc_half * rotation;
  return q;
}

/// q_ref ⊟ q: rotation vector (world frame) of the correction q_ref·q⁻¹.
inline Vec3 quat_boxminus(const Quat& q_ref, const Quat& q) {
  return quat_log(q_ref * q.conjugate());
}

/// Inverse of quat_boxminus: exp(delta)·q.
inline Quat quat_boxplus(const Quat& q, const Vec3& delta) { return (quat_exp(delta) * q).normalized(); }

inline double rotation_angle(const Quat& a, const Quat& b) { return quat_boxminus(a, b).norm(); }

}  // namespace quadctl
