#pragma once

// Test-stand experiments on the single-leg rig: quasi-static stiffness
// sweep, drop test, periodic jumping and the contact-detection benchmark.

#include <quadctl/contact.hpp>
#include <quadctl/impedance_control.hpp>
#include <quadctl/leg_rig.hpp>

#include <limits>
#include <optional>
#include <vector>

namespace quadctl {

/// Least squares y ≈ X·β; X has one column per regressor.
inline VecX least_squares(const MatX& x, const VecX& y) { return x.colPivHouseholderQr().solve(y); }

// ---------------------------------------------------------------- quasi-static

struct QuasiStaticSettings {
  std::vector<double> stiffness;  // N/m; empty selects 20, 40, …, 360
  double rest_length = 0.2;       // m, spring setpoint leg length
  double speed = 0.01;            // m/s, slider descent
  double max_compression = 0.1;   // m of slider travel
  double settle_time = 0.3;       // s before the descent starts
  double fit_start = 0.002;       // m, compression below this is not fitted

  std::vector<double> stiffness_values() const {
    if (!stiffness.empty()) return stiffness;
    std::vector<double> k;
    for (int i = 1; i <= 18; ++i) k.push_back(20.0 * i);
    return k;
  }
};

struct StiffnessTrace {
  double commanded = 0.0;
  double regressed = 0.0;    // N/m
  double intercept = 0.0;    // N
  int fit_samples = 0;
  int saturated_samples = 0;
  double envelope_error = 0.0;  // max relative deviation from the force envelope over saturated samples
  std::vector<double> compression;  // m
  std::vector<double> leg_length;   // m
  std::vector<double> force;        // N
  std::vector<char> saturated;
};

inline StiffnessTrace quasi_static_run(const LegRigParams& params, double stiffness, const QuasiStaticSettings& s) {
  LegRig rig(params);
  LegRigState state = rig_state_at(params, s.rest_length + params.foot_offset, s.rest_length);
  const auto gains = ImpedanceGains::isotropic(stiffness, 0.0, Vec2(0.0, -s.rest_length));
  const double tau_max = params.leg.max_torque();
  const double start_height = state.slider_height;

  StiffnessTrace trace;
  trace.commanded = stiffness;
  SliderDrive drive{SliderDrive::Mode::prescribed, 0.0, 0.0};
  while (start_height - state.slider_height < s.max_compression) {
    const JointState meas = rig.measured_joints(state);
    const Mat2 jac = foot_jacobian(params.leg, meas.q);
    const Vec2 raw = jac.transpose() * (gains.stiffness * (gains.setpoint - forward_kinematics(params.leg, meas.q)) -
                                        gains.damping * (jac * meas.qd));
    const Vec2 tau = clamp_torques(params.leg, raw);
    const bool moving = state.time >= s.settle_time;
    drive.velocity = moving ? -s.speed : 0.0;
    if (moving) {
      const double length = rig.leg_length(state);
      trace.compression.push_back(s.rest_length - length);
      trace.leg_length.push_back(length);
      trace.force.push_back(rig.contact_force(state).normal);
      trace.saturated.push_back(std::abs(raw[0]) >= tau_max || std::abs(raw[1]) >= tau_max);
    }
    for (int k = 0; k < kSubsteps; ++k) state = rig.step(state, tau, kPhysicsDt, drive);
  }

  std::vector<int> fit;
  for (std::size_t i = 0; i < trace.force.size(); ++i) {
    if (trace.saturated[i]) {
      ++trace.saturated_samples;
    } else if (trace.compression[i] >= s.fit_start) {
      fit.push_back(static_cast<int>(i));
    }
  }
  trace.fit_samples = static_cast<int>(fit.size());
  if (fit.size() >= 2) {
    MatX x(fit.size(), 2);
    VecX y(fit.size());
    for (std::size_t r = 0; r < fit.size(); ++r) {
      x(r, 0) = trace.compression[fit[r]];
      x(r, 1) = 1.0;
      y[r] = trace.force[fit[r]];
    }
    const VecX beta = least_squares(x, y);
    trace.regressed = beta[0];
    trace.intercept = beta[1];
  }
  // Saturated samples against the envelope, with the gravity offset removed.
  for (std::size_t i = 0; i < trace.force.size(); ++i) {
    if (!trace.saturated[i]) continue;
    const double envelope = max_vertical_force(params.leg, trace.leg_length[i]);
    const double err = std::abs(trace.force[i] - trace.intercept - envelope) / envelope;
    trace.envelope_error = std::max(trace.envelope_error, err);
  }
  return trace;
}

inline std::vector<StiffnessTrace> quasi_static_probe(const LegRigParams& params, const QuasiStaticSettings& s = {}) {
  std::vector<StiffnessTrace> out;
  for (double k : s.stiffness_values()) out.push_back(quasi_static_run(params, k, s));
  return out;
}

// ------------------------------------------------------------------------ drop

struct DropSettings {
  double hip_height = 0.24;     // m at release
  double rest_length = 0.2;     // m, spring setpoint
  double stiffness = 150.0;     // N/m
  double damping = 0.5;         // N·s/m
  double duration = 10.0;       // s
  double settle_window = 2.0;   // s at the end averaged for the settle force
  double fit_window = 1.0;      // s after first touchdown used for regression
  double ringing_window = 0.02; // s after each touchdown excluded from the fit
  int hysteresis_bins = 8;
};

struct DropSample {
  double time = 0.0;
  double hip_height = 0.0;
  double compression = 0.0;       // m, rest_length − leg length
  double compression_rate = 0.0;  // m/s
  double force = 0.0;             // N, ground normal
  bool contact = false;
  bool saturated = false;         // a joint torque demand hit the current limit
};

struct HysteresisBin {
  double compression = 0.0;
  double loading = 0.0;    // mean force while compressing
  double unloading = 0.0;  // mean force while extending
  int loading_count = 0;
  int unloading_count = 0;
};

struct DropResult {
  std::vector<DropSample> trace;
  double settle_force = 0.0;
  double regressed_stiffness = 0.0;
  double regressed_damping = 0.0;
  double intercept = 0.0;
  int fit_samples = 0;
  int touchdowns = 0;
  std::optional<double> first_touchdown;
  std::vector<HysteresisBin> hysteresis;  // first stance

  /// Bins where both directions have data and loading exceeds unloading.
  int hysteresis_bins_loading_above() const {
    int n = 0;
    for (const auto& b : hysteresis) {
      if (b.loading_count > 0 && b.unloading_count > 0 && b.loading > b.unloading) ++n;
    }
    return n;
  }
  int hysteresis_bins_compared() const {
    int n = 0;
    for (const auto& b : hysteresis) {
      if (b.loading_count > 0 && b.unloading_count > 0) ++n;
    }
    return n;
  }
};

inline DropResult drop_experiment(const LegRigParams& params, const DropSettings& s = {}) {
  LegRig rig(params);
  LegRigState state = rig_state_at(params, s.hip_height, s.rest_length);
  const auto gains = ImpedanceGains::isotropic(s.stiffness, s.damping, Vec2(0.0, -s.rest_length));
  DropResult result;
  std::vector<double> touchdown_times;
  double last_contact = -kInf;
  const int ticks = static_cast<int>(std::round(s.duration / kControlDt));
  for (int tick = 0; tick < ticks; ++tick) {
    const JointState meas = rig.measured_joints(state);
    const Mat2 jac = foot_jacobian(params.leg, meas.q);
    const Vec2 raw = jac.transpose() * (gains.stiffness * (gains.setpoint - forward_kinematics(params.leg, meas.q)) -
                                        gains.damping * (jac * meas.qd));
    const Vec2 tau = clamp_torques(params.leg, raw);

    DropSample sample;
    sample.saturated = raw.cwiseAbs().maxCoeff() >= params.leg.max_torque();
    sample.time = state.time;
    sample.hip_height = state.slider_height;
    sample.compression = s.rest_length - rig.leg_length(state);
    sample.compression_rate = (foot_jacobian(params.leg, state.joints.q) * state.joints.qd)[1];
    const ContactForce cf = rig.contact_force(state);
    sample.force = cf.normal;
    sample.contact = cf.in_contact;
    // Touchdown: contact after at least ringing_window in the air, so impact
    // chatter of the foot does not count as a new stance.
    if (sample.contact) {
      if (state.time - last_contact > s.ringing_window) touchdown_times.push_back(state.time);
      last_contact = state.time;
    }
    result.trace.push_back(sample);

    for (int k = 0; k < kSubsteps; ++k) state = rig.step(state, tau, kPhysicsDt);
  }
  result.touchdowns = static_cast<int>(touchdown_times.size());
  if (!touchdown_times.empty()) result.first_touchdown = touchdown_times.front();

  double sum = 0.0;
  int n = 0;
  for (const auto& x : result.trace) {
    if (x.time >= s.duration - s.settle_window) {
      sum += x.force;
      ++n;
    }
  }
  result.settle_force = n > 0 ? sum / n : 0.0;

  if (!result.first_touchdown) return result;
  const double t0 = *result.first_touchdown;
  auto after_touchdown = [&](double t) {
    double last = -kInf;
    for (double td : touchdown_times) {
      if (td <= t) last = td;
    }
    return t - last;
  };
  std::vector<const DropSample*> fit;
  for (const auto& x : result.trace) {
    if (!x.contact || x.saturated || x.time > t0 + s.fit_window || after_touchdown(x.time) < s.ringing_window) {
      continue;
    }
    fit.push_back(&x);
  }
  result.fit_samples = static_cast<int>(fit.size());
  if (fit.size() >= 3) {
    MatX x(fit.size(), 3);
    VecX y(fit.size());
    for (std::size_t r = 0; r < fit.size(); ++r) {
      x(r, 0) = fit[r]->compression;
      x(r, 1) = fit[r]->compression_rate;
      x(r, 2) = 1.0;
      y[r] = fit[r]->force;
    }
    const VecX beta = least_squares(x, y);
    result.regressed_stiffness = beta[0];
    result.regressed_damping = beta[1];
    result.intercept = beta[2];
  }

  // Hysteresis over the first stance, ringing excluded.
  const double t1 = touchdown_times.size() > 1 ? touchdown_times[1] : kInf;
  std::vector<const DropSample*> stance;
  for (const auto& x : result.trace) {
    if (x.time >= t0 + s.ringing_window && x.time < t1 && x.contact) stance.push_back(&x);
  }
  if (!stance.empty()) {
    double lo = kInf, hi = -kInf;
    for (const auto* x : stance) {
      lo = std::min(lo, x->compression);
      hi = std::max(hi, x->compression);
    }
    const int bins = s.hysteresis_bins;
    result.hysteresis.resize(bins);
    const double width = (hi - lo) / bins;
    for (int b = 0; b < bins; ++b) result.hysteresis[b].compression = lo + (b + 0.5) * width;
    if (width > 0.0) {
      for (const auto* x : stance) {
        const int b = std::min(bins - 1, static_cast<int>((x->compression - lo) / width));
        auto& bin = result.hysteresis[b];
        if (x->compression_rate > 0.0) {
          bin.loading += x->force;
          ++bin.loading_count;
        } else if (x->compression_rate < 0.0) {
          bin.unloading += x->force;
          ++bin.unloading_count;
        }
      }
      for (auto& bin : result.hysteresis) {
        if (bin.loading_count > 0) bin.loading /= bin.loading_count;
        if (bin.unloading_count > 0) bin.unloading /= bin.unloading_count;
      }
    }
  }
  return result;
}

// ------------------------------------------------------------------------ jump

struct JumpSettings {
  double stand_length = 0.2;   // m
  double crouch_length = 0.15;
  double push_length = 0.31;
  double flight_length = 0.2;
  double amplitude = 1.0;      // scales every phase target's offset from stand_length
  double settle_time = 0.5;    // s at stand before the first cycle
  double period = 1.2;         // s
  double crouch_time = 0.3;    // s into the cycle the push starts
  double push_time = 0.12;     // s
  double liftoff_window = 0.05;  // s after the push in which a lift-off still counts as a jump
  int cycles = 3;
  Vec2 kp = Vec2(20.0, 20.0);  // N·m/rad
  Vec2 kd = Vec2(0.3, 0.3);    // N·m·s/rad
};

struct JumpFlight {
  double liftoff_time = 0.0;
  double liftoff_com_height = 0.0;
  double liftoff_com_velocity = 0.0;
  double predicted_com_apex = 0.0;
  double com_apex = 0.0;
  double hip_apex = 0.0;
  bool powered = false;       // lift-off during the push phase (not a landing bounce)
  bool reached_apex = false;  // CoM velocity turned non-positive before touchdown

  /// Relative error of the observed CoM rise against v²/2g.
  double ballistic_error() const {
    const double predicted = predicted_com_apex - liftoff_com_height;
    return predicted > 0.0 ? std::abs((com_apex - liftoff_com_height) - predicted) / predicted : 0.0;
  }
};

struct JumpResult {
  std::vector<JumpFlight> flights;
  double max_hip_height = 0.0;     // over the whole run after settling
  double standing_hip_height = 0.0;
  int saturated_commands = 0;      // control ticks where the PD demand exceeded the current limit
  double max_applied_torque = 0.0;
  std::vector<double> time, hip_height, com_height, force;

  /// Highest hip apex over powered jumps; standing height if none.
  double jump_apex() const {
    double best = standing_hip_height;
    for (const auto& f : flights) {
      if (f.powered) best = std::max(best, f.hip_apex);
    }
    return best;
  }
};

inline JumpResult jump_experiment(const LegRigParams& params, const JumpSettings& s = {}) {
  LegRig rig(params);
  LegRigState state = rig_state_at(params, s.stand_length + params.foot_offset + 0.002, s.stand_length);
  auto target = [&](double length) { return s.stand_length + s.amplitude * (length - s.stand_length); };
  auto desired_length = [&](double t) {
    if (t < s.settle_time) return s.stand_length;
    const double phase = std::fmod(t - s.settle_time, s.period);
    const int cycle = static_cast<int>((t - s.settle_time) / s.period);
    if (cycle >= s.cycles) return s.stand_length;
    if (phase < s.crouch_time) return target(s.crouch_length);
    if (phase < s.crouch_time + s.push_time) return target(s.push_length);
    return target(s.flight_length);
  };

  JumpResult result;
  const double end = s.settle_time + s.period * (s.cycles + 0.5);
  const double tau_max = params.leg.max_torque();
  bool in_flight = false;
  JumpFlight flight;
  int ticks = static_cast<int>(std::round(end / kControlDt));
  for (int tick = 0; tick < ticks; ++tick) {
    const double t = state.time;
    JointGains gains;
    gains.kp = s.kp;
    gains.kd = s.kd;
    gains.q_des = symmetric_posture(params.leg, desired_length(t));
    const JointState meas = rig.measured_joints(state);
    const Vec2 raw = gains.kp.cwiseProduct(gains.q_des - meas.q) - gains.kd.cwiseProduct(meas.qd);
    if (raw.cwiseAbs().maxCoeff() > tau_max) ++result.saturated_commands;
    const Vec2 tau = joint_pd_torques(params.leg, meas, gains);
    result.max_applied_torque = std::max(result.max_applied_torque, tau.cwiseAbs().maxCoeff());

    for (int k = 0; k < kSubsteps; ++k) {
      const bool contact = rig.contact_force(state).in_contact;
      const Vec2 com = rig.com_vertical(state);
      if (state.time > s.settle_time) {
        if (!contact && !in_flight) {
          in_flight = true;
          flight = JumpFlight{};
          const double phase = std::fmod(state.time - s.settle_time, s.period);
          const int cycle = static_cast<int>((state.time - s.settle_time) / s.period);
          flight.powered = cycle < s.cycles && phase >= s.crouch_time &&
                           phase <= s.crouch_time + s.push_time + s.liftoff_window;
          flight.liftoff_time = state.time;
          flight.liftoff_com_height = com[0];
          flight.liftoff_com_velocity = com[1];
          flight.predicted_com_apex = com[0] + std::max(0.0, com[1]) * std::max(0.0, com[1]) / (2.0 * params.gravity);
          flight.com_apex = com[0];
          flight.hip_apex = state.slider_height;
        } else if (in_flight && contact) {
          in_flight = false;
          if (flight.liftoff_com_velocity > 0.0) result.flights.push_back(flight);
        } else if (in_flight) {
          if (com[1] <= 0.0) flight.reached_apex = true;
          flight.com_apex = std::max(flight.com_apex, com[0]);
          flight.hip_apex = std::max(flight.hip_apex, state.slider_height);
        }
        result.max_hip_height = std::max(result.max_hip_height, state.slider_height);
      } else {
        result.standing_hip_height = state.slider_height;
      }
      state = rig.step(state, tau, kPhysicsDt);
    }
    result.time.push_back(state.time);
    result.hip_height.push_back(state.slider_height);
    result.com_height.push_back(rig.com_vertical(state)[0]);
    result.force.push_back(rig.contact_force(state).normal);
  }
  return result;
}

// ------------------------------------------------------------- contact bench

struct ContactBenchSettings {
  std::vector<double> lengths{0.20, 0.30};       // m, desired leg length
  std::vector<double> stiffness{75.0, 150.0, 300.0};
  double damping = 0.5;            // N·s/m
  double clearance = 0.05;         // m, foot above ground at release
  double ramp_offset = 0.05;       // m, leg length change during the hold
  double ramp_time = 0.15;         // s
  double hold_time = 0.4;          // s before release
  double post_contact_time = 0.15; // s recorded after touchdown
  double current_noise = 0.02;     // A, std of measured current
  double threshold_margin = 0.1;   // N added to the largest pre-contact estimate
  SensorModel sensor;
  std::uint64_t seed = 1;
};

struct ContactBenchTrace {
  double length = 0.0;
  double stiffness = 0.0;
  std::optional<double> truth_time;
  std::optional<double> sensor_time;
  std::optional<double> current_time;
  double max_swing_estimate = -kInf;  // N, largest normal estimate before touchdown
  bool sensor_false_positive = false;
  bool current_false_positive = false;
  int unusable_estimates = 0;  // control ticks with a refused or ill-conditioned estimate
  std::vector<ContactTraceRow> rows;

  std::optional<double> sensor_delay() const {
    if (!truth_time || !sensor_time) return std::nullopt;
    return *sensor_time - *truth_time;
  }
  std::optional<double> current_delay() const {
    if (!truth_time || !current_time) return std::nullopt;
    return *current_time - *truth_time;
  }
};

struct ContactBenchResult {
  std::vector<ContactBenchTrace> traces;
  double threshold = 0.0;  // N, shared by every trace
};

namespace detail {

/// Simulates one drop and records sensor voltages and force estimates.
/// Detection with the current threshold is applied afterwards.
inline ContactBenchTrace contact_drop(const LegRigParams& params, double length, double stiffness,
                                      const ContactBenchSettings& s, std::uint64_t seed) {
  LegRig rig(params);
  const double start_length = length - s.ramp_offset;
  LegRigState state = rig_state_at(params, length + s.clearance + params.foot_offset, start_length);
  SensorStream sensor(s.sensor, seed);
  Rng noise(seed ^ 0x9e3779b97f4a7c15ULL);
  ThresholdDetector sensor_det = make_sensor_detector(s.sensor);

  ContactBenchTrace trace;
  trace.length = length;
  trace.stiffness = stiffness;
  double end_time = kInf;
  double voltage = 0.0;
  while (state.time < end_time) {
    const double t = state.time;
    const double ramp = std::clamp(t / s.ramp_time, 0.0, 1.0);
    const double l_des = start_length + s.ramp_offset * 0.5 * (1.0 - std::cos(kPi * ramp));
    const auto gains = ImpedanceGains::isotropic(stiffness, s.damping, Vec2(0.0, -l_des));
    const JointState meas = rig.measured_joints(state);
    const Vec2 tau = cartesian_impedance_torques(params.leg, meas, gains);

    // Measured current through an ideal current loop plus sensor noise.
    Vec2 tau_measured;
    for (int j = 0; j < 2; ++j) {
      const double current = current_from_torque(params.leg, tau[j]) + s.current_noise * noise.normal();
      tau_measured[j] = params.leg.torque_per_amp() * current;
    }
    // Near-straight knees give no usable estimate: refused or flagged
    // ill-conditioned samples are dropped (NaN) rather than thresholded.
    double estimate = std::numeric_limits<double>::quiet_NaN();
    try {
      const ForceEstimate est = estimate_foot_force(params.leg, meas.q, tau_measured);
      if (est.ill_conditioned) {
        ++trace.unusable_estimates;
      } else {
        estimate = est.normal();
      }
    } catch (const SingularConfiguration&) {
      ++trace.unusable_estimates;
    }

    const SliderDrive drive = t < s.hold_time ? SliderDrive{SliderDrive::Mode::prescribed, 0.0, 0.0} : SliderDrive{};
    for (int k = 0; k < kSubsteps; ++k) {
      const ContactForce cf = rig.contact_force(state);
      voltage = sensor.update(cf.normal, kPhysicsDt);
      const bool sensed = sensor_det.update(state.time, voltage);
      if (cf.in_contact && !trace.truth_time) {
        trace.truth_time = state.time;
        end_time = state.time + s.post_contact_time;
      }
      if (sensed && !trace.sensor_time) {
        trace.sensor_time = state.time;
        if (!trace.truth_time) trace.sensor_false_positive = true;
      }
      ContactTraceRow row;
      row.time = state.time;
      row.true_force = cf.normal;
      row.sensor_voltage = voltage;
      row.estimated_force = estimate;
      row.truth = cf.in_contact;
      row.sensor = sensed;
      trace.rows.push_back(row);
      state = rig.step(state, tau, kPhysicsDt, drive);
    }
    if (!trace.truth_time && std::isfinite(estimate)) {
      trace.max_swing_estimate = std::max(trace.max_swing_estimate, estimate);
    }
    if (state.time > s.hold_time + 2.0 && !trace.truth_time) {
      throw Error("contact bench: leg never touched down");
    }
  }
  return trace;
}

}  // namespace detail

/// Runs the (length × stiffness) grid. The current-based threshold is
/// chosen once for all traces as the largest pre-contact estimate plus a
/// margin, so that no trace produces a false positive.
inline ContactBenchResult contact_bench(const LegRigParams& params, const ContactBenchSettings& s = {}) {
  ContactBenchResult result;
  std::uint64_t seed = s.seed;
  for (double length : s.lengths) {
    for (double k : s.stiffness) result.traces.push_back(detail::contact_drop(params, length, k, s, seed++));
  }
  double swing_max = -kInf;
  for (const auto& t : result.traces) swing_max = std::max(swing_max, t.max_swing_estimate);
  result.threshold = std::max(0.0, swing_max) + s.threshold_margin;

  for (auto& trace : result.traces) {
    ThresholdDetector det = make_current_detector(result.threshold);
    // The estimate is held over each control period; evaluate it once per tick.
    double last_tick = -kInf;
    for (auto& row : trace.rows) {
      if (row.time - last_tick >= kControlDt - 1e-9) {
        last_tick = row.time;
        if (std::isfinite(row.estimated_force)) det.update(row.time, row.estimated_force);
      }
      row.current = det.state();
      if (det.state() && !trace.current_time) {
        trace.current_time = row.time;
        if (!trace.truth_time || row.time < *trace.truth_time) trace.current_false_positive = true;
      }
    }
  }
  return result;
}

}  // namespace quadctl
