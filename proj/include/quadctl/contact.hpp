#pragma once

// Foot contact sensing: an analog switch-like sensor (force → aperture
// travel → voltage, first-order lag, noise), a hysteresis comparator on its
// voltage, and the competing estimate of foot force from motor currents.

#include <quadctl/leg_model.hpp>

#include <optional>
#include <ostream>
#include <vector>

namespace quadctl {

struct SensorModel {
  double trigger_force = 3.0;       // N
  double full_scale_force = 4.8;    // N at max_travel
  double max_travel = 0.002;        // m
  double voltage_max = 3.0;         // V, range is [0, voltage_max]
  double noise_std = 0.005;         // V
  double response_lag = 1e-3;       // s
  double map_exponent = 1.0;        // 1 = linear travel → voltage

  void validate() const {
    if (!(trigger_force > 0.0) || !(full_scale_force > 0.0) || !(max_travel > 0.0) || !(voltage_max > 0.0) ||
        noise_std < 0.0 || !(response_lag >= 0.0) || !(map_exponent > 0.0)) {
      throw std::invalid_argument("SensorModel: parameters must be positive");
    }
  }

  double travel(double normal_force) const {
    return max_travel * std::clamp(normal_force / full_scale_force, 0.0, 1.0);
  }

  /// Noise-free steady-state voltage.
  double static_voltage(double normal_force) const {
    return voltage_max * std::pow(travel(normal_force) / max_travel, map_exponent);
  }
};

/// Stateful sensor output for one foot.
class SensorStream {
 public:
  explicit SensorStream(SensorModel model = {}, std::uint64_t seed = 0) : model_(model), rng_(seed) {
    model_.validate();
  }

  /// Advances by dt under the given normal force and returns the voltage.
  double update(double normal_force, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("SensorStream::update: dt must be positive");
    const double target = model_.static_voltage(normal_force);
    const double blend = model_.response_lag > 0.0 ? 1.0 - std::exp(-dt / model_.response_lag) : 1.0;
    filtered_ += blend * (target - filtered_);
    const double noise = model_.noise_std > 0.0 ? model_.noise_std * rng_.normal() : 0.0;
    return std::clamp(filtered_ + noise, 0.0, model_.voltage_max);
  }

  /// Sets the internal state to the steady state under `normal_force`.
  void settle(double normal_force) { filtered_ = model_.static_voltage(normal_force); }

  const SensorModel& model() const { return model_; }

 private:
  SensorModel model_;
  Rng rng_;
  double filtered_ = 0.0;
};

inline double sensor_voltage(SensorStream& stream, double normal_force, double dt) {
  return stream.update(normal_force, dt);
}

enum class ContactSource { sensor, current_estimate, ground_truth };

inline const char* to_string(ContactSource s) {
  switch (s) {
    case ContactSource::sensor: return "sensor";
    case ContactSource::current_estimate: return "current_estimate";
    case ContactSource::ground_truth: return "ground_truth";
  }
  return "?";
}

struct ContactEvent {
  double time = 0.0;
  ContactSource source = ContactSource::sensor;
  bool rising = true;
};

/// Comparator with separate rising and falling levels; records edges.
class ThresholdDetector {
 public:
  ThresholdDetector(double rising_level, double falling_level, ContactSource source)
      : rising_(rising_level), falling_(falling_level), source_(source) {
    if (falling_level > rising_level) throw std::invalid_argument("ThresholdDetector: falling level above rising level");
  }

  bool update(double time, double value) {
    if (!state_ && value >= rising_) {
      state_ = true;
      events_.push_back({time, source_, true});
    } else if (state_ && value < falling_) {
      state_ = false;
      events_.push_back({time, source_, false});
    }
    return state_;
  }

  bool state() const { return state_; }
  const std::vector<ContactEvent>& events() const { return events_; }
  void reset() {
    state_ = false;
    events_.clear();
  }

 private:
  double rising_;
  double falling_;
  ContactSource source_;
  bool state_ = false;
  std::vector<ContactEvent> events_;
};

/// Sensor comparator: rises at threshold_fraction of the voltage range and
/// falls at threshold_fraction − hysteresis_fraction.
inline ThresholdDetector make_sensor_detector(const SensorModel& model, double threshold_fraction = 0.5,
                                              double hysteresis_fraction = 0.1) {
  return ThresholdDetector(threshold_fraction * model.voltage_max,
                           (threshold_fraction - hysteresis_fraction) * model.voltage_max, ContactSource::sensor);
}

/// Runs the sensor comparator over a sampled voltage stream.
inline std::vector<ContactEvent> detect_contact_sensor(const std::vector<double>& times,
                                                       const std::vector<double>& voltages,
                                                       const SensorModel& model, double threshold_fraction = 0.5,
                                                       double hysteresis_fraction = 0.1) {
  ThresholdDetector det = make_sensor_detector(model, threshold_fraction, hysteresis_fraction);
  for (std::size_t i = 0; i < voltages.size(); ++i) det.update(times[i], voltages[i]);
  return det.events();
}

struct ForceEstimate {
  Vec2 force = Vec2::Zero();  // N, (Jᵀ)⁻¹τ in the hip frame
  double condition = 1.0;     // 2-norm condition number of J
  bool ill_conditioned = false;

  /// Component pushing down on the ground (hip frame z points up).
  double normal() const { return -force[1]; }
};

struct EstimatorSettings {
  double det_tolerance = 1e-4;      // m², below this the estimate is refused
  double condition_limit = 30.0;    // flagged above this
};

inline ForceEstimate estimate_foot_force(const LegParams& params, const Vec2& q, const Vec2& tau,
                                         const EstimatorSettings& settings = {}) {
  const Mat2 jac = foot_jacobian(params, q);
  const double det = jac.determinant();
  if (std::abs(det) < settings.det_tolerance) {
    throw SingularConfiguration("estimate_foot_force: |det J| = " + std::to_string(std::abs(det)) +
                                " below tolerance");
  }
  ForceEstimate out;
  const Mat2 jt = jac.transpose();
  out.force = jt.inverse() * tau;
  const Eigen::JacobiSVD<Mat2> svd(jac);
  out.condition = svd.singularValues()[0] / svd.singularValues()[1];
  out.ill_conditioned = out.condition > settings.condition_limit;
  return out;
}

/// Comparator on the estimated normal force.
inline ThresholdDetector make_current_detector(double threshold) {
  return ThresholdDetector(threshold, threshold, ContactSource::current_estimate);
}

inline std::vector<ContactEvent> detect_contact_current(const std::vector<double>& times,
                                                        const std::vector<double>& normal_forces,
                                                        double threshold) {
  ThresholdDetector det = make_current_detector(threshold);
  for (std::size_t i = 0; i < normal_forces.size(); ++i) det.update(times[i], normal_forces[i]);
  return det.events();
}

/// First rising event at or after `after`, if any.
inline std::optional<double> first_rising_after(const std::vector<ContactEvent>& events, double after) {
  for (const ContactEvent& e : events) {
    if (e.rising && e.time >= after) return e.time;
  }
  return std::nullopt;
}

/// One sample of a detection trace.
struct ContactTraceRow {
  double time = 0.0;
  double true_force = 0.0;      // N
  double sensor_voltage = 0.0;  // V
  double estimated_force = 0.0; // N
  bool truth = false;
  bool sensor = false;
  bool current = false;
};

inline void write_contact_trace_csv(std::ostream& out, const std::vector<ContactTraceRow>& rows) {
  out << "time,true_force,sensor_voltage,estimated_force,contact_truth,contact_sensor,contact_current\n";
  for (const auto& r : rows) {
    out << r.time << ',' << r.true_force << ',' << r.sensor_voltage << ',' << r.estimated_force << ','
        << int(r.truth) << ',' << int(r.sensor) << ',' << int(r.current) << '\n';
  }
}

}  // namespace quadctl
