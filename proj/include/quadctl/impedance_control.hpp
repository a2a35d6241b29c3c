#pragma once

// Foot-space spring-damper control of the two-segment leg, and the joint
// position controller used for jumping.

#include <quadctl/leg_model.hpp>

#include <stdexcept>

namespace quadctl {

struct ImpedanceGains {
  Mat2 stiffness = Mat2::Zero();  // N/m
  Mat2 damping = Mat2::Zero();    // N·s/m
  Vec2 setpoint = Vec2::Zero();   // m, foot relative to hip

  static ImpedanceGains isotropic(double k, double d, const Vec2& setpoint) {
    return {k * Mat2::Identity(), d * Mat2::Identity(), setpoint};
  }

  /// Throws std::invalid_argument unless both matrices are symmetric PSD.
  void validate(double tol = 1e-9) const {
    for (const Mat2* m : {&stiffness, &damping}) {
      if ((*m - m->transpose()).cwiseAbs().maxCoeff() > tol) {
        throw std::invalid_argument("ImpedanceGains: matrices must be symmetric");
      }
      Eigen::SelfAdjointEigenSolver<Mat2> eig(*m);
      if (eig.eigenvalues().minCoeff() < -tol) {
        throw std::invalid_argument("ImpedanceGains: matrices must be positive semi-definite");
      }
    }
  }
};

struct JointGains {
  Vec2 kp = Vec2::Zero();       // N·m/rad
  Vec2 kd = Vec2::Zero();       // N·m·s/rad
  Vec2 q_des = Vec2::Zero();    // rad
  Vec2 qd_des = Vec2::Zero();   // rad/s
};

/// Cartesian impedance with an externally supplied foot velocity (e.g. a
/// filtered estimate). Torques are clamped per joint to the actuator limit.
inline Vec2 cartesian_impedance_torques(const LegParams& params, const Vec2& q,
                                        const Vec2& foot_velocity, const ImpedanceGains& gains) {
  const Mat2 jac = foot_jacobian(params, q);
  const Vec2 x = forward_kinematics(params, q);
  const Vec2 force = gains.stiffness * (gains.setpoint - x) - gains.damping * foot_velocity;
  return clamp_torques(params, jac.transpose() * force);
}

inline Vec2 cartesian_impedance_torques(const LegParams& params, const JointState& joints,
                                        const ImpedanceGains& gains) {
  return cartesian_impedance_torques(params, joints.q, foot_jacobian(params, joints.q) * joints.qd,
                                     gains);
}

inline Vec2 joint_pd_torques(const LegParams& params, const JointState& joints, const JointGains& gains) {
  const Vec2 tau = gains.kp.cwiseProduct(gains.q_des - joints.q) +
                   gains.kd.cwiseProduct(gains.qd_des - joints.qd);
  return clamp_torques(params, tau);
}

/// First-order low-pass for velocity signals, discretized exactly for a
/// fixed sample period.
template <int N>
class LowPassFilter {
 public:
  using Vector = Eigen::Matrix<double, N, 1>;

  LowPassFilter(double cutoff_hz, double sample_period)
      : alpha_(1.0 - std::exp(-2.0 * kPi * cutoff_hz * sample_period)) {
    if (!(cutoff_hz > 0.0) || !(sample_period > 0.0)) {
      throw std::invalid_argument("LowPassFilter: cutoff and period must be positive");
    }
  }

  const Vector& update(const Vector& raw) {
    if (!primed_) {
      value_ = raw;
      primed_ = true;
    } else {
      value_ += alpha_ * (raw - value_);
    }
    return value_;
  }

  void reset(const Vector& value) {
    value_ = value;
    primed_ = true;
  }

  const Vector& value() const { return value_; }
  double alpha() const { return alpha_; }

 private:
  double alpha_;
  Vector value_ = Vector::Zero();
  bool primed_ = false;
};

inline constexpr double kDefaultVelocityCutoffHz = 100.0;

}  // namespace quadctl
