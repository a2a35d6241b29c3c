#pragma once

// Reference plans for the centroidal controller: a time-indexed sequence of
// PlanSample, CSV serialization, built-in generators (stand, sinusoidal CoM,
// vertical jump) and a single-producer single-consumer handoff.

#include <quadctl/centroidal_control.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace quadctl {

class Plan {
 public:
  Plan() = default;

  /// Samples must be strictly increasing in time with unit quaternions.
  explicit Plan(std::vector<PlanSample> samples) : samples_(std::move(samples)) {
    for (std::size_t i = 0; i < samples_.size(); ++i) {
      const PlanSample& s = samples_[i];
      if (i > 0 && !(s.time > samples_[i - 1].time)) {
        throw std::invalid_argument("Plan: sample times must be strictly increasing (index " + std::to_string(i) + ")");
      }
      if (std::abs(s.orientation.norm() - 1.0) > 1e-6) {
        throw std::invalid_argument("Plan: non-unit reference quaternion at index " + std::to_string(i));
      }
    }
  }

  bool empty() const { return samples_.empty(); }
  std::size_t size() const { return samples_.size(); }
  const std::vector<PlanSample>& samples() const { return samples_; }
  double start_time() const { return samples_.front().time; }
  double end_time() const { return samples_.back().time; }

  /// Sample for control time t: the nearest sample when within `tolerance`.
  /// Past the end the final sample is held (with its time set to t).
  /// Throws StalePlan when no sample is close enough.
  PlanSample at(double t, double tolerance = 5e-4) const {
    if (samples_.empty()) throw StalePlan("Plan::at: empty plan");
    if (t > end_time() + tolerance) {
      PlanSample held = samples_.back();
      held.time = t;
      for (auto& f : held.feet) f.leg_velocity.setZero();
      return held;
    }
    auto it = std::lower_bound(samples_.begin(), samples_.end(), t,
                               [](const PlanSample& s, double v) { return s.time < v; });
    const PlanSample* best = nullptr;
    if (it != samples_.end()) best = &*it;
    if (it != samples_.begin()) {
      const PlanSample* prev = &*(it - 1);
      if (!best || std::abs(prev->time - t) <= std::abs(best->time - t)) best = prev;
    }
    if (!best || std::abs(best->time - t) > tolerance) {
      throw StalePlan("Plan::at: no sample within " + std::to_string(tolerance) + " s of t=" + std::to_string(t));
    }
    return *best;
  }

 private:
  std::vector<PlanSample> samples_;
};

/// Fills leg velocities by central differences of the leg vectors and marks
/// swing samples followed by contact within `lookahead` as late swing.
inline void finalize_plan(std::vector<PlanSample>& samples, double lookahead = 0.1) {
  const std::size_t n = samples.size();
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t a = k > 0 ? k - 1 : k;
    const std::size_t b = k + 1 < n ? k + 1 : k;
    const double dt = samples[b].time - samples[a].time;
    for (int i = 0; i < kNumLegs; ++i) {
      samples[k].feet[i].leg_velocity =
          dt > 0.0 ? Vec3((samples[b].feet[i].leg_vector - samples[a].feet[i].leg_vector) / dt) : Vec3::Zero();
    }
  }
  for (int i = 0; i < kNumLegs; ++i) {
    double next_contact = kInf;
    for (std::size_t k = n; k-- > 0;) {
      FootReference& f = samples[k].feet[i];
      if (f.contact) {
        next_contact = samples[k].time;
        f.late_swing = false;
      } else {
        f.late_swing = next_contact - samples[k].time <= lookahead;
      }
    }
  }
}

// ------------------------------------------------------------------ CSV

inline std::string plan_csv_header() {
  std::string h = "time,com_x,com_y,com_z,comd_x,comd_y,comd_z,quat_w,quat_x,quat_y,quat_z,k_x,k_y,k_z,"
                  "w_fx,w_fy,w_fz,w_tx,w_ty,w_tz";
  for (const char* leg : kLegNames) {
    const std::string f(leg);
    h += ",l_" + f + "_x,l_" + f + "_y,l_" + f + "_z,contact_" + f;
  }
  return h;
}

inline constexpr int kPlanCsvColumns = 20 + 4 * kNumLegs;

namespace detail {

inline void put_number(std::string& out, double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, r.ptr);
}

}  // namespace detail

/// Writes the plan (leg velocities and late-swing flags are derived on read).
inline void write_plan_csv(std::ostream& out, const Plan& plan) {
  out << plan_csv_header() << '\n';
  std::string line;
  for (const PlanSample& s : plan.samples()) {
    line.clear();
    auto num = [&](double v) {
      if (!line.empty()) line += ',';
      detail::put_number(line, v);
    };
    num(s.time);
    for (int k = 0; k < 3; ++k) num(s.com_position[k]);
    for (int k = 0; k < 3; ++k) num(s.com_velocity[k]);
    num(s.orientation.w());
    num(s.orientation.x());
    num(s.orientation.y());
    num(s.orientation.z());
    for (int k = 0; k < 3; ++k) num(s.angular_momentum[k]);
    for (int k = 0; k < 6; ++k) num(s.wrench[k]);
    for (const FootReference& f : s.feet) {
      for (int k = 0; k < 3; ++k) num(f.leg_vector[k]);
      line += f.contact ? ",1" : ",0";
    }
    out << line << '\n';
  }
}

/// Reads a plan CSV. Errors carry the 1-based line number.
inline Plan read_plan_csv(std::istream& in, double late_swing_lookahead = 0.1) {
  std::string line;
  int line_no = 0;
  if (!std::getline(in, line)) throw ConfigError("plan CSV: empty input", 1);
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != plan_csv_header()) throw ConfigError("plan CSV: unexpected header", line_no);

  std::vector<PlanSample> samples;
  std::vector<double> v;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    v.clear();
    const char* p = line.data();
    const char* end = p + line.size();
    while (true) {
      double x = 0.0;
      const auto r = std::from_chars(p, end, x);
      if (r.ec != std::errc()) throw ConfigError("plan CSV: malformed number in column " + std::to_string(v.size() + 1), line_no);
      v.push_back(x);
      p = r.ptr;
      if (p == end) break;
      if (*p != ',') throw ConfigError("plan CSV: expected ',' after column " + std::to_string(v.size()), line_no);
      ++p;
    }
    if (static_cast<int>(v.size()) != kPlanCsvColumns) {
      throw ConfigError("plan CSV: expected " + std::to_string(kPlanCsvColumns) + " columns, got " +
                            std::to_string(v.size()),
                        line_no);
    }
    PlanSample s;
    s.time = v[0];
    s.com_position = Vec3(v[1], v[2], v[3]);
    s.com_velocity = Vec3(v[4], v[5], v[6]);
    s.orientation = Quat(v[7], v[8], v[9], v[10]);
    if (std::abs(s.orientation.norm() - 1.0) > 1e-6) throw ConfigError("plan CSV: non-unit quaternion", line_no);
    s.angular_momentum = Vec3(v[11], v[12], v[13]);
    for (int k = 0; k < 6; ++k) s.wrench[k] = v[14 + k];
    for (int i = 0; i < kNumLegs; ++i) {
      const int c = 20 + 4 * i;
      s.feet[i].leg_vector = Vec3(v[c], v[c + 1], v[c + 2]);
      if (v[c + 3] != 0.0 && v[c + 3] != 1.0) throw ConfigError("plan CSV: contact flag must be 0 or 1", line_no);
      s.feet[i].contact = v[c + 3] == 1.0;
    }
    if (!samples.empty() && !(s.time > samples.back().time)) {
      throw ConfigError("plan CSV: time must increase", line_no);
    }
    samples.push_back(s);
  }
  finalize_plan(samples, late_swing_lookahead);
  return Plan(std::move(samples));
}

// ------------------------------------------------------------ generators

struct PlanWarning {
  double time = 0.0;
  std::string message;
};

struct GeneratedPlan {
  Plan plan;
  std::vector<PlanWarning> warnings;
};

struct StandSettings {
  double duration = 5.0;      // s
  double dt = 1e-3;           // s, sample period
  double leg_length = 0.24;   // m, hip height above the feet
};

/// Foot world positions under the hips for a base at the given CoM.
inline std::array<Vec3, kNumLegs> stance_feet(const QuadrupedModel& model, const Vec3& com, double leg_length) {
  std::array<Vec3, kNumLegs> feet = zero_array<Vec3, kNumLegs>();
  const Vec3 base_origin = com - model.com_offset;
  for (int i = 0; i < kNumLegs; ++i) feet[i] = base_origin + model.hip_offsets[i] - Vec3(0.0, 0.0, leg_length);
  return feet;
}

namespace detail {

/// Sample with identity orientation, zero momentum, CoM state and the
/// wrench m·(a + g); stance legs reach the fixed feet.
inline PlanSample centroidal_sample(const QuadrupedModel& model, double t, const Vec3& com, const Vec3& vel,
                                    const Vec3& acc, bool flying, const std::array<Vec3, kNumLegs>& feet,
                                    double flight_leg_length) {
  PlanSample s;
  s.time = t;
  s.com_position = com;
  s.com_velocity = vel;
  if (!flying) s.wrench.head<3>() = model.mass * (acc + Vec3(0.0, 0.0, kGravity));
  const Vec3 base_origin = com - model.com_offset;
  for (int i = 0; i < kNumLegs; ++i) {
    FootReference& f = s.feet[i];
    f.contact = !flying;
    f.leg_vector = flying ? Vec3(-model.hip_offsets[i] + Vec3(0.0, 0.0, flight_leg_length))
                          : Vec3(base_origin - feet[i]);
  }
  return s;
}

inline void check_leg_force(const QuadrupedModel& model, const PlanSample& s, std::vector<PlanWarning>& warnings) {
  int stance = 0;
  for (const auto& f : s.feet) stance += f.contact ? 1 : 0;
  if (stance == 0) return;
  const double per_leg = s.wrench[2] / stance;
  for (const auto& f : s.feet) {
    if (!f.contact) continue;
    const double h = f.leg_vector.z();
    double limit = kInf;
    try {
      limit = max_vertical_force(model.leg, h);
    } catch (const SingularConfiguration&) {
    }
    if (per_leg > limit) {
      warnings.push_back({s.time, "required leg force " + std::to_string(per_leg) + " N exceeds " +
                                      std::to_string(limit) + " N at leg length " + std::to_string(h) + " m"});
      return;
    }
  }
}

}  // namespace detail

inline GeneratedPlan stand_plan(const QuadrupedModel& model, const StandSettings& s = {}) {
  const Vec3 com(0.0, 0.0, s.leg_length);
  const auto feet = stance_feet(model, com, s.leg_length);
  std::vector<PlanSample> samples;
  const int n = static_cast<int>(std::round(s.duration / s.dt));
  GeneratedPlan out;
  for (int k = 0; k <= n; ++k) {
    samples.push_back(detail::centroidal_sample(model, k * s.dt, com, Vec3::Zero(), Vec3::Zero(), false, feet, 0.0));
  }
  detail::check_leg_force(model, samples.front(), out.warnings);
  finalize_plan(samples);
  out.plan = Plan(std::move(samples));
  return out;
}

struct SinusoidSettings {
  double duration = 5.0;
  double dt = 1e-3;
  double leg_length = 0.24;
  Vec3 amplitude = Vec3(0.02, 0.0, 0.02);  // m
  double frequency = 0.5;                  // Hz
};

/// CoM oscillation about the stance pose with all feet planted.
inline GeneratedPlan sinusoid_plan(const QuadrupedModel& model, const SinusoidSettings& s = {}) {
  const Vec3 center(0.0, 0.0, s.leg_length);
  const auto feet = stance_feet(model, center, s.leg_length);
  const double w = 2.0 * kPi * s.frequency;
  std::vector<PlanSample> samples;
  GeneratedPlan out;
  const int n = static_cast<int>(std::round(s.duration / s.dt));
  for (int k = 0; k <= n; ++k) {
    const double t = k * s.dt;
    const Vec3 com = center + s.amplitude * std::sin(w * t);
    const Vec3 vel = s.amplitude * (w * std::cos(w * t));
    const Vec3 acc = s.amplitude * (-w * w * std::sin(w * t));
    samples.push_back(detail::centroidal_sample(model, t, com, vel, acc, false, feet, 0.0));
    detail::check_leg_force(model, samples.back(), out.warnings);
  }
  finalize_plan(samples);
  out.plan = Plan(std::move(samples));
  return out;
}

struct JumpPlanSettings {
  double dt = 1e-3;
  double stand_length = 0.24;   // m
  double crouch_length = 0.15;  // m
  double takeoff_length = 0.30; // m, also the landing length
  double apex_height = 0.65;    // m, CoM height at the top of the flight
  double landing_stroke = 0.15; // m, CoM travel to stop after touchdown
  double landing_extension = 0.015;  // m, legs held this much past the take-off length in flight
  double stand_time = 0.5;      // s before the crouch
  double crouch_time = 0.5;     // s
  double recover_time = 0.5;    // s back to the stand height
  double hold_time = 0.5;       // s at the end
};

struct JumpPhases {
  double crouch_start, push_start, takeoff, touchdown, stopped, recovered, end;
  double takeoff_velocity;
};

inline JumpPhases jump_phases(const JumpPlanSettings& s) {
  JumpPhases p{};
  const double v = std::sqrt(2.0 * kGravity * (s.apex_height - s.takeoff_length));
  const double push_acc = v * v / (2.0 * (s.takeoff_length - s.crouch_length));
  const double land_acc = v * v / (2.0 * s.landing_stroke);
  p.takeoff_velocity = v;
  p.crouch_start = s.stand_time;
  p.push_start = p.crouch_start + s.crouch_time;
  p.takeoff = p.push_start + v / push_acc;
  p.touchdown = p.takeoff + 2.0 * v / kGravity;
  p.stopped = p.touchdown + v / land_acc;
  p.recovered = p.stopped + s.recover_time;
  p.end = p.recovered + s.hold_time;
  return p;
}

/// Vertical jump: crouch, constant-acceleration push to the take-off length
/// with the velocity for the apex, ballistic flight (zero wrench) with the
/// legs held at the landing length, constant deceleration after touchdown,
/// then back to standing.
inline GeneratedPlan jump_plan(const QuadrupedModel& model, const JumpPlanSettings& s = {}) {
  if (!(s.crouch_length < s.takeoff_length) || !(s.takeoff_length < s.apex_height) || !(s.landing_stroke > 0.0) ||
      s.landing_extension < 0.0 || !(s.takeoff_length + s.landing_extension < model.leg.reach())) {
    throw std::invalid_argument("jump_plan: need crouch < takeoff < apex, a positive landing stroke and "
                                "flight legs within reach");
  }
  const JumpPhases ph = jump_phases(s);
  const double v = ph.takeoff_velocity;
  const double push_acc = v * v / (2.0 * (s.takeoff_length - s.crouch_length));
  const double land_acc = v * v / (2.0 * s.landing_stroke);
  const double land_bottom = s.takeoff_length - s.landing_stroke;
  const auto feet = stance_feet(model, Vec3(0.0, 0.0, s.stand_length), s.stand_length);

  // Cosine blend between heights: position, velocity, acceleration.
  auto blend = [](double from, double to, double tau, double duration) {
    const double x = std::clamp(tau / duration, 0.0, 1.0);
    const double w = kPi / duration;
    const double d = to - from;
    return Vec3(from + d * 0.5 * (1.0 - std::cos(kPi * x)), d * 0.5 * w * std::sin(kPi * x),
                d * 0.5 * w * w * std::cos(kPi * x));
  };

  GeneratedPlan out;
  std::vector<PlanSample> samples;
  const int n = static_cast<int>(std::round(ph.end / s.dt));
  for (int k = 0; k <= n; ++k) {
    const double t = k * s.dt;
    Vec3 z;  // height, vertical velocity, vertical acceleration
    bool flying = false;
    if (t < ph.crouch_start) {
      z = Vec3(s.stand_length, 0.0, 0.0);
    } else if (t < ph.push_start) {
      z = blend(s.stand_length, s.crouch_length, t - ph.crouch_start, s.crouch_time);
    } else if (t < ph.takeoff) {
      const double tau = t - ph.push_start;
      z = Vec3(s.crouch_length + 0.5 * push_acc * tau * tau, push_acc * tau, push_acc);
    } else if (t < ph.touchdown) {
      const double tau = t - ph.takeoff;
      z = Vec3(s.takeoff_length + v * tau - 0.5 * kGravity * tau * tau, v - kGravity * tau, -kGravity);
      flying = true;
    } else if (t < ph.stopped) {
      const double tau = t - ph.touchdown;
      z = Vec3(s.takeoff_length - v * tau + 0.5 * land_acc * tau * tau, -v + land_acc * tau, land_acc);
    } else if (t < ph.recovered) {
      z = blend(land_bottom, s.stand_length, t - ph.stopped, s.recover_time);
    } else {
      z = Vec3(s.stand_length, 0.0, 0.0);
    }
    samples.push_back(detail::centroidal_sample(model, t, Vec3(0.0, 0.0, z[0]), Vec3(0.0, 0.0, z[1]),
                                                Vec3(0.0, 0.0, z[2]), flying, feet,
                                                s.takeoff_length + s.landing_extension));
    detail::check_leg_force(model, samples.back(), out.warnings);
  }
  finalize_plan(samples);
  out.plan = Plan(std::move(samples));
  return out;
}

// ------------------------------------------------------------- handoff

/// Bounded lock-free single-producer single-consumer queue. One thread may
/// push, one other thread may pop.
template <typename T, std::size_t Capacity>
class SpscQueue {
  static_assert(Capacity >= 2 && (Capacity & (Capacity - 1)) == 0, "capacity must be a power of two");

 public:
  bool try_push(const T& value) {
    const std::size_t head = head_.load(std::memory_order_relaxed);
    if (head - tail_.load(std::memory_order_acquire) == Capacity) return false;
    slots_[head & (Capacity - 1)] = value;
    head_.store(head + 1, std::memory_order_release);
    return true;
  }

  bool try_pop(T& value) {
    const std::size_t tail = tail_.load(std::memory_order_relaxed);
    if (tail == head_.load(std::memory_order_acquire)) return false;
    value = slots_[tail & (Capacity - 1)];
    tail_.store(tail + 1, std::memory_order_release);
    return true;
  }

  std::size_t size() const { return head_.load(std::memory_order_acquire) - tail_.load(std::memory_order_acquire); }

 private:
  std::array<T, Capacity> slots_{};
  alignas(64) std::atomic<std::size_t> head_{0};
  alignas(64) std::atomic<std::size_t> tail_{0};
};

/// Plan samples stamped with the time they were published.
struct StampedSample {
  PlanSample sample;
  double published = 0.0;  // s, producer clock
};

/// Consumer side of the plan handoff: drains the queue and keeps the sample
/// matching the control time.
template <std::size_t Capacity>
class PlanReceiver {
 public:
  explicit PlanReceiver(SpscQueue<StampedSample, Capacity>& queue) : queue_(queue) {}

  /// Sample for time t within `tolerance`; throws StalePlan otherwise.
  PlanSample sample_for(double t, double tolerance = 5e-4) {
    StampedSample s;
    while ((!current_ || current_->sample.time < t - tolerance) && queue_.try_pop(s)) current_ = s;
    if (!current_ || std::abs(current_->sample.time - t) > tolerance) {
      throw StalePlan("PlanReceiver: no fresh sample for t=" + std::to_string(t));
    }
    return current_->sample;
  }

 private:
  SpscQueue<StampedSample, Capacity>& queue_;
  std::optional<StampedSample> current_;
};

}  // namespace quadctl
