#pragma once

// Closed-loop runs of the centroidal controller on the quadruped model,
// either with direct state access or through the lossy bus (command frames
// up, command-triggered sensor frames down, freshness gates on both ends).

#include <quadctl/bus.hpp>
#include <quadctl/plan.hpp>
#include <quadctl/quadruped_sim.hpp>

#include <map>

namespace quadctl {

struct QuadrupedRunSettings {
  double duration = 5.0;  // s; 0 runs to the end of the plan
  QuadrupedSimParams sim;
  ControllerConfig controller;
  std::optional<ChannelModel> channel;  // none: controller reads the simulator directly
  double safe_stop_timeout = 0.01;      // s without fresh frames before zero torque
  std::uint64_t seed = 1;
  std::uint16_t session = 0x5a17;
  double crash_height = 0.05;  // m, CoM height that ends the run as a crash
  bool record_trace = true;
};

struct QuadrupedTraceRow {
  double time = 0.0;
  Vec3 com = Vec3::Zero();
  Vec3 com_ref = Vec3::Zero();
  double orientation_error = 0.0;  // rad
  std::array<double, kNumLegs> normal_force{};
  std::array<bool, kNumLegs> stance{};
  std::array<bool, kNumLegs> controller_contact{};
  std::array<Vec2, kNumLegs> torque = zero_array<Vec2, kNumLegs>();
  bool safe_stop = false;
};

struct FlightRecord {
  double liftoff_time = 0.0;
  double liftoff_height = 0.0;    // CoM
  double liftoff_velocity = 0.0;  // CoM, vertical
  double predicted_apex = 0.0;
  double apex = 0.0;
  double touchdown_time = kInf;

  /// Relative to the predicted apex height.
  double apex_error() const { return std::abs(apex - predicted_apex) / predicted_apex; }
};

struct QuadrupedRunResult {
  std::vector<QuadrupedTraceRow> trace;
  double max_com_error = 0.0;          // m, max ‖x_c − x_c_ref‖
  double final_com_error = 0.0;        // m
  double max_orientation_error = 0.0;  // rad
  double com_rmse = 0.0;               // m
  double max_commanded_torque = 0.0;   // N·m, as sent to the joints
  int saturated_ticks = 0;             // control ticks with a joint at the current limit
  int safe_stop_ticks = 0;             // controller side
  int robot_safe_stop_ticks = 0;       // robot side, at physics rate
  int allocation_failures = 0;
  int slip_events = 0;
  double max_com_height = 0.0;
  bool upright = true;                 // tilt stayed below 45°
  bool crashed = false;                // CoM fell below crash_height; the run stopped there
  std::vector<FlightRecord> flights;
  ChannelStats uplink, downlink;

  /// Flight with the highest apex, if any.
  const FlightRecord* highest_flight() const {
    const FlightRecord* best = nullptr;
    for (const auto& f : flights) {
      if (!best || f.apex > best->apex) best = &f;
    }
    return best;
  }
};

namespace detail {

/// Robot-side state snapshot kept for each echoed command index; stands in
/// for the base-state estimate that travels with the sensor frame.
struct Snapshot {
  BaseState base;
};

}  // namespace detail

inline QuadrupedRunResult run_quadruped(const Plan& plan, const QuadrupedRunSettings& s) {
  if (plan.empty()) throw std::invalid_argument("run_quadruped: empty plan");
  const QuadrupedModel& model = s.sim.model;
  const double duration = s.duration > 0.0 ? s.duration : plan.end_time() - plan.start_time();
  const double tau_max = model.leg.max_torque();
  const double ctrl_dt = 1e-3;
  const int substeps = 10;
  const double phys_dt = ctrl_dt / substeps;

  // Initial pose from the first sample; feet follow from the leg vectors.
  const PlanSample first = plan.at(plan.start_time());
  BaseState base0;
  base0.com_position = first.com_position;
  base0.com_velocity = first.com_velocity;
  base0.orientation = first.orientation;
  base0.angular_momentum = first.angular_momentum;
  std::array<Vec2, kNumLegs> q0 = zero_array<Vec2, kNumLegs>();
  for (int i = 0; i < kNumLegs; ++i) q0[i] = leg_inverse_kinematics(model, i, -first.feet[i].leg_vector);

  QuadrupedSimParams sim_params = s.sim;
  sim_params.seed = s.seed;
  QuadrupedSim sim(sim_params, base0, q0);
  int initial_stance = 0;
  for (const auto& f : sim.feet()) initial_stance += f.stance ? 1 : 0;
  std::array<double, kNumLegs> preload{};
  for (int i = 0; i < kNumLegs; ++i) {
    preload[i] = sim.feet()[i].stance && initial_stance > 0 ? model.weight() / initial_stance : 0.0;
  }
  sim.settle_sensors(preload);

  CentroidalController controller(model, s.controller);
  QuadrupedRunResult result;

  // Bus plumbing (only used with a channel).
  const bool bus = s.channel.has_value();
  LossyChannel uplink(bus ? *s.channel : ChannelModel{}, s.seed * 2 + 11);
  LossyChannel downlink(bus ? *s.channel : ChannelModel{}, s.seed * 2 + 12);
  FreshnessGate controller_gate(s.safe_stop_timeout);
  FreshnessGate robot_gate(s.safe_stop_timeout);
  std::map<std::uint32_t, detail::Snapshot> snapshots;
  RobotState controller_view = sim.state();
  std::vector<ThresholdDetector> remote_detectors;
  for (int i = 0; i < kNumLegs; ++i) {
    remote_detectors.push_back(make_sensor_detector(s.sim.sensor));
    remote_detectors.back().update(0.0, s.sim.sensor.static_voltage(preload[i]));
  }
  std::array<Vec2, kNumLegs> robot_torques = zero_array<Vec2, kNumLegs>();
  std::uint32_t command_index = 0;
  if (bus) {
    controller_gate.offer(0, 0.0);
    robot_gate.offer(0, 0.0);
  }

  auto make_sensor_frame = [&](std::uint32_t index) {
    SensorFrame f;
    f.session = s.session;
    f.index = index;
    f.timestamp_us = static_cast<std::uint64_t>(std::llround(sim.time() * 1e6));
    for (int i = 0; i < kNumLegs; ++i) {
      const JointState& j = sim.state().legs[i];
      for (int k = 0; k < 2; ++k) {
        JointSensor js;
        js.position = joint_angle_to_counts(j.q[k], model.leg.gear_ratio);
        js.velocity = joint_angle_to_counts(j.qd[k], model.leg.gear_ratio);
        js.current_raw = current_to_raw(current_from_torque(model.leg, robot_torques[i][k]));
        f.joints.push_back(js);
      }
      f.foot_adc.push_back(voltage_to_adc(sim.sensor_voltages()[i], s.sim.sensor.voltage_max));
    }
    return f;
  };

  bool in_flight = false;
  FlightRecord flight;
  double sq_sum = 0.0;
  const int ticks = static_cast<int>(std::round(duration / ctrl_dt));
  for (int tick = 0; tick < ticks; ++tick) {
    const double t = plan.start_time() + tick * ctrl_dt;
    const PlanSample ref = plan.at(t, s.controller.plan_time_tolerance);

    // ---- controller
    std::array<Vec2, kNumLegs> torques = zero_array<Vec2, kNumLegs>();
    bool safe_stop = false;
    std::array<bool, kNumLegs> contact{};
    if (bus) {
      for (Bytes& bytes : downlink.deliver(t)) {
        const auto d = decode_sensor(bytes, s.session);
        if (!d.ok() || !controller_gate.offer(d.frame.index, t)) continue;
        const auto snap = snapshots.find(d.frame.index);
        if (snap != snapshots.end()) controller_view.base = snap->second.base;
        for (int i = 0; i < kNumLegs; ++i) {
          for (int k = 0; k < 2; ++k) {
            const JointSensor& js = d.frame.joints[2 * i + k];
            controller_view.legs[i].q[k] = counts_to_joint_angle(js.position, model.leg.gear_ratio);
            controller_view.legs[i].qd[k] = counts_to_joint_angle(js.velocity, model.leg.gear_ratio);
          }
          remote_detectors[i].update(t, adc_to_voltage(d.frame.foot_adc[i], s.sim.sensor.voltage_max));
        }
        snapshots.erase(snapshots.begin(), snapshots.upper_bound(d.frame.index));
      }
      safe_stop = controller_gate.stale(t);
    } else {
      controller_view = sim.state();
    }
    controller_view.time = t;
    std::array<bool, kNumLegs> sensed{};
    if (bus) {
      for (int i = 0; i < kNumLegs; ++i) sensed[i] = remote_detectors[i].state();
    } else {
      sensed = sim.sensed_contact();
    }

    if (safe_stop) {
      ++result.safe_stop_ticks;
    } else {
      try {
        const ControlOutput out = controller.step(controller_view, ref, sensed);
        torques = out.torques;
        contact = out.contact;
      } catch (const StalePlan&) {
        throw;
      } catch (const Error&) {
        ++result.allocation_failures;
      }
    }
    bool saturated = false;
    for (const Vec2& tq : torques) {
      result.max_commanded_torque = std::max(result.max_commanded_torque, tq.cwiseAbs().maxCoeff());
      if (tq.cwiseAbs().maxCoeff() >= tau_max - 1e-12) saturated = true;
    }
    if (saturated) ++result.saturated_ticks;

    if (bus) {
      CommandFrame cmd;
      cmd.session = s.session;
      cmd.index = ++command_index;
      for (int i = 0; i < kNumLegs; ++i) {
        for (int k = 0; k < 2; ++k) {
          cmd.joints.push_back({current_to_raw(current_from_torque(model.leg, torques[i][k])),
                                static_cast<std::uint8_t>(safe_stop ? 0 : kFlagEnable)});
        }
      }
      uplink.send(t, encode(cmd));
    } else {
      robot_torques = torques;
    }

    // ---- robot
    for (int k = 0; k < substeps; ++k) {
      const double now = t + k * phys_dt;
      if (bus) {
        for (Bytes& bytes : uplink.deliver(now)) {
          const auto d = decode_command(bytes, s.session);
          if (!d.ok() || !robot_gate.offer(d.frame.index, now)) continue;
          for (int i = 0; i < kNumLegs; ++i) {
            for (int j = 0; j < 2; ++j) {
              const JointCommand& jc = d.frame.joints[2 * i + j];
              robot_torques[i][j] =
                  (jc.flags & kFlagEnable) ? torque_from_current(model.leg, raw_to_current(jc.current_raw)) : 0.0;
            }
          }
          snapshots[d.frame.index] = {sim.state().base};
          downlink.send(now, encode(make_sensor_frame(d.frame.index)));
        }
        if (robot_gate.stale(now)) {
          robot_torques = zero_array<Vec2, kNumLegs>();
          ++result.robot_safe_stop_ticks;
        }
      }
      sim.step(robot_torques, phys_dt);

      // Flight bookkeeping on the true state.
      bool any_stance = false;
      for (const auto& f : sim.feet()) any_stance = any_stance || f.stance;
      const BaseState& b = sim.state().base;
      if (!any_stance && !in_flight) {
        in_flight = true;
        flight = FlightRecord{};
        flight.liftoff_time = sim.time();
        flight.liftoff_height = b.com_position.z();
        flight.liftoff_velocity = b.com_velocity.z();
        flight.predicted_apex = flight.liftoff_height + std::pow(std::max(0.0, flight.liftoff_velocity), 2) /
                                                            (2.0 * s.sim.body().gravity);
        flight.apex = flight.liftoff_height;
      } else if (in_flight) {
        flight.apex = std::max(flight.apex, b.com_position.z());
        if (any_stance) {
          in_flight = false;
          flight.touchdown_time = sim.time();
          result.flights.push_back(flight);
        }
      }
    }

    // ---- metrics
    const BaseState& b = sim.state().base;
    const PlanSample ref_next = plan.at(sim.time(), s.controller.plan_time_tolerance + ctrl_dt);
    const double err = (b.com_position - ref_next.com_position).norm();
    const double rot = rotation_angle(ref_next.orientation, b.orientation);
    result.max_com_error = std::max(result.max_com_error, err);
    result.final_com_error = err;
    result.max_orientation_error = std::max(result.max_orientation_error, rot);
    result.max_com_height = std::max(result.max_com_height, b.com_position.z());
    const Vec3 up = b.orientation * Vec3::UnitZ();
    if (up.z() < std::cos(kPi / 4.0)) result.upright = false;
    sq_sum += err * err;
    if (s.record_trace) {
      QuadrupedTraceRow row;
      row.time = sim.time();
      row.com = b.com_position;
      row.com_ref = ref_next.com_position;
      row.orientation_error = rot;
      for (int i = 0; i < kNumLegs; ++i) {
        row.normal_force[i] = sim.feet()[i].force.z();
        row.stance[i] = sim.feet()[i].stance;
        row.torque[i] = torques[i];
      }
      row.controller_contact = contact;
      row.safe_stop = safe_stop;
      result.trace.push_back(row);
    }
    if (b.com_position.z() - s.sim.ground.terrain.height(b.com_position.x(), b.com_position.y()) < s.crash_height) {
      result.crashed = true;
      break;
    }
  }
  if (in_flight) result.flights.push_back(flight);
  const int done = result.crashed ? static_cast<int>(std::round((sim.time() - plan.start_time()) / ctrl_dt)) : ticks;
  result.com_rmse = done > 0 ? std::sqrt(sq_sum / done) : 0.0;
  result.slip_events = sim.slip_events();
  result.uplink = uplink.stats();
  result.downlink = downlink.stats();
  return result;
}

inline void write_quadruped_trace_csv(std::ostream& out, const std::vector<QuadrupedTraceRow>& rows) {
  out << "time,com_x,com_y,com_z,comref_x,comref_y,comref_z,orientation_error";
  for (const char* leg : kLegNames) {
    const std::string f(leg);
    out << ",fz_" << f << ",stance_" << f << ",contact_" << f << ",tau_hip_" << f << ",tau_knee_" << f;
  }
  out << ",safe_stop\n";
  for (const auto& r : rows) {
    out << r.time << ',' << r.com.x() << ',' << r.com.y() << ',' << r.com.z() << ',' << r.com_ref.x() << ','
        << r.com_ref.y() << ',' << r.com_ref.z() << ',' << r.orientation_error;
    for (int i = 0; i < kNumLegs; ++i) {
      out << ',' << r.normal_force[i] << ',' << int(r.stance[i]) << ',' << int(r.controller_contact[i]) << ','
          << r.torque[i][0] << ',' << r.torque[i][1];
    }
    out << ',' << int(r.safe_stop) << '\n';
  }
}

}  // namespace quadctl
