#pragma once

// Full-state command and sensor frames, their little-endian wire codec with
// a CRC-32C trailer, a lossy FIFO channel model and the receiver-side
// freshness rule (newer index wins, stale after a timeout).
//
// CommandFrame bytes:
//   u8 type=1, u8 joint count, u16 session, u32 index,
//   per joint: i16 current (1/1024 A), u8 flags,
//   u32 CRC-32C over everything before it.
// SensorFrame bytes:
//   u8 type=2, u8 joint count, u8 foot count, u8 reserved=0, u16 session,
//   u32 index, u64 timestamp (µs),
//   per joint: i32 position (counts), i32 velocity (counts/s), i16 current,
//   per foot: u16 ADC (12-bit),
//   u32 CRC-32C.

#include <quadctl/common.hpp>

#include <boost/crc.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <vector>

namespace quadctl {

using Bytes = std::vector<std::uint8_t>;

/// CRC-32C (Castagnoli), reflected, init and final xor 0xFFFFFFFF.
inline std::uint32_t crc32c(std::span<const std::uint8_t> data) {
  boost::crc_optimal<32, 0x1EDC6F41, 0xFFFFFFFF, 0xFFFFFFFF, true, true> crc;
  crc.process_bytes(data.data(), data.size());
  return crc.checksum();
}

inline constexpr int kMaxJoints = 12;
inline constexpr int kMaxFeet = 4;
inline constexpr double kCurrentScale = 1024.0;  // LSB per ampere
inline constexpr double kEncoderCountsPerRev = 5000.0;
inline constexpr int kAdcMax = 4095;

inline constexpr std::uint8_t kFlagEnable = 0x01;
inline constexpr std::uint8_t kFlagPositionMode = 0x02;

/// Fixed-point current; throws std::out_of_range beyond the i16 range.
inline std::int16_t current_to_raw(double amps) {
  const double raw = std::round(amps * kCurrentScale);
  if (!(raw >= -32768.0 && raw <= 32767.0)) throw std::out_of_range("current_to_raw: current outside ±32 A");
  return static_cast<std::int16_t>(raw);
}
inline double raw_to_current(std::int16_t raw) { return raw / kCurrentScale; }

/// Joint angle ↔ motor encoder counts (encoder on the motor shaft).
inline std::int32_t joint_angle_to_counts(double q, double gear_ratio) {
  return static_cast<std::int32_t>(std::lround(q * gear_ratio * kEncoderCountsPerRev / (2.0 * kPi)));
}
inline double counts_to_joint_angle(std::int32_t counts, double gear_ratio) {
  return counts * 2.0 * kPi / (kEncoderCountsPerRev * gear_ratio);
}

inline std::uint16_t voltage_to_adc(double volts, double full_scale = 3.0) {
  return static_cast<std::uint16_t>(std::clamp(std::lround(volts / full_scale * kAdcMax), 0L, long(kAdcMax)));
}
inline double adc_to_voltage(std::uint16_t adc, double full_scale = 3.0) { return adc * full_scale / kAdcMax; }

struct JointCommand {
  std::int16_t current_raw = 0;
  std::uint8_t flags = 0;
  bool operator==(const JointCommand&) const = default;
};

struct CommandFrame {
  std::uint16_t session = 0;
  std::uint32_t index = 0;
  std::vector<JointCommand> joints;
  bool operator==(const CommandFrame&) const = default;
};

struct JointSensor {
  std::int32_t position = 0;  // counts
  std::int32_t velocity = 0;  // counts/s
  std::int16_t current_raw = 0;
  bool operator==(const JointSensor&) const = default;
};

struct SensorFrame {
  std::uint16_t session = 0;
  std::uint32_t index = 0;  // echo of the last command index
  std::uint64_t timestamp_us = 0;
  std::vector<JointSensor> joints;
  std::vector<std::uint16_t> foot_adc;
  bool operator==(const SensorFrame&) const = default;
};

enum class DecodeStatus { ok, truncated, bad_crc, bad_type, bad_length, bad_field, unknown_session };

inline const char* to_string(DecodeStatus s) {
  switch (s) {
    case DecodeStatus::ok: return "ok";
    case DecodeStatus::truncated: return "truncated";
    case DecodeStatus::bad_crc: return "bad_crc";
    case DecodeStatus::bad_type: return "bad_type";
    case DecodeStatus::bad_length: return "bad_length";
    case DecodeStatus::bad_field: return "bad_field";
    case DecodeStatus::unknown_session: return "unknown_session";
  }
  return "?";
}

template <typename Frame>
struct Decoded {
  DecodeStatus status = DecodeStatus::ok;
  Frame frame;
  bool ok() const { return status == DecodeStatus::ok; }
};

inline constexpr std::uint8_t kCommandType = 1;
inline constexpr std::uint8_t kSensorType = 2;
inline constexpr std::size_t kCommandHeader = 8;
inline constexpr std::size_t kCommandJointBytes = 3;
inline constexpr std::size_t kSensorHeader = 18;
inline constexpr std::size_t kSensorJointBytes = 10;
inline constexpr std::size_t kCrcBytes = 4;

namespace detail {

class Writer {
 public:
  explicit Writer(Bytes& out) : out_(out) {}
  template <typename T>
  void put(T v) {
    using U = std::make_unsigned_t<T>;
    U u = static_cast<U>(v);
    for (std::size_t i = 0; i < sizeof(T); ++i) out_.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
  }

 private:
  Bytes& out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}
  template <typename T>
  T get() {
    using U = std::make_unsigned_t<T>;
    U u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) u |= static_cast<U>(U(in_[pos_ + i]) << (8 * i));
    pos_ += sizeof(T);
    return static_cast<T>(u);
  }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

inline void append_crc(Bytes& out) {
  Writer(out).put<std::uint32_t>(crc32c(out));
}

inline bool crc_ok(std::span<const std::uint8_t> in) {
  const std::size_t body = in.size() - kCrcBytes;
  Reader r(in.subspan(body));
  return r.get<std::uint32_t>() == crc32c(in.first(body));
}

}  // namespace detail

inline Bytes encode(const CommandFrame& f) {
  if (f.joints.size() > kMaxJoints) throw std::invalid_argument("encode: more than 12 joints");
  Bytes out;
  out.reserve(kCommandHeader + kCommandJointBytes * f.joints.size() + kCrcBytes);
  detail::Writer w(out);
  w.put<std::uint8_t>(kCommandType);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(f.joints.size()));
  w.put<std::uint16_t>(f.session);
  w.put<std::uint32_t>(f.index);
  for (const JointCommand& j : f.joints) {
    w.put<std::int16_t>(j.current_raw);
    w.put<std::uint8_t>(j.flags);
  }
  detail::append_crc(out);
  return out;
}

inline Bytes encode(const SensorFrame& f) {
  if (f.joints.size() > kMaxJoints || f.foot_adc.size() > kMaxFeet) {
    throw std::invalid_argument("encode: more than 12 joints or 4 feet");
  }
  for (std::uint16_t adc : f.foot_adc) {
    if (adc > kAdcMax) throw std::invalid_argument("encode: ADC value above 12 bits");
  }
  Bytes out;
  detail::Writer w(out);
  w.put<std::uint8_t>(kSensorType);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(f.joints.size()));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(f.foot_adc.size()));
  w.put<std::uint8_t>(0);
  w.put<std::uint16_t>(f.session);
  w.put<std::uint32_t>(f.index);
  w.put<std::uint64_t>(f.timestamp_us);
  for (const JointSensor& j : f.joints) {
    w.put<std::int32_t>(j.position);
    w.put<std::int32_t>(j.velocity);
    w.put<std::int16_t>(j.current_raw);
  }
  for (std::uint16_t adc : f.foot_adc) w.put<std::uint16_t>(adc);
  detail::append_crc(out);
  return out;
}

/// Decodes a command frame; `session`, when given, must match.
inline Decoded<CommandFrame> decode_command(std::span<const std::uint8_t> in,
                                            std::optional<std::uint16_t> session = std::nullopt) {
  Decoded<CommandFrame> d;
  if (in.empty()) return {DecodeStatus::truncated, {}};
  if (in[0] != kCommandType) return {DecodeStatus::bad_type, {}};
  if (in.size() < kCommandHeader + kCrcBytes) return {DecodeStatus::truncated, {}};
  const std::size_t n = in[1];
  if (n > kMaxJoints) return {DecodeStatus::bad_field, {}};
  const std::size_t expected = kCommandHeader + kCommandJointBytes * n + kCrcBytes;
  if (in.size() < expected) return {DecodeStatus::truncated, {}};
  if (in.size() > expected) return {DecodeStatus::bad_length, {}};
  if (!detail::crc_ok(in)) return {DecodeStatus::bad_crc, {}};
  detail::Reader r(in);
  r.get<std::uint8_t>();
  r.get<std::uint8_t>();
  d.frame.session = r.get<std::uint16_t>();
  d.frame.index = r.get<std::uint32_t>();
  d.frame.joints.resize(n);
  for (JointCommand& j : d.frame.joints) {
    j.current_raw = r.get<std::int16_t>();
    j.flags = r.get<std::uint8_t>();
  }
  if (session && d.frame.session != *session) d.status = DecodeStatus::unknown_session;
  return d;
}

inline Decoded<SensorFrame> decode_sensor(std::span<const std::uint8_t> in,
                                          std::optional<std::uint16_t> session = std::nullopt) {
  Decoded<SensorFrame> d;
  if (in.empty()) return {DecodeStatus::truncated, {}};
  if (in[0] != kSensorType) return {DecodeStatus::bad_type, {}};
  if (in.size() < kSensorHeader + kCrcBytes) return {DecodeStatus::truncated, {}};
  const std::size_t nj = in[1];
  const std::size_t nf = in[2];
  if (nj > kMaxJoints || nf > kMaxFeet || in[3] != 0) return {DecodeStatus::bad_field, {}};
  const std::size_t expected = kSensorHeader + kSensorJointBytes * nj + 2 * nf + kCrcBytes;
  if (in.size() < expected) return {DecodeStatus::truncated, {}};
  if (in.size() > expected) return {DecodeStatus::bad_length, {}};
  if (!detail::crc_ok(in)) return {DecodeStatus::bad_crc, {}};
  detail::Reader r(in);
  r.get<std::uint32_t>();
  d.frame.session = r.get<std::uint16_t>();
  d.frame.index = r.get<std::uint32_t>();
  d.frame.timestamp_us = r.get<std::uint64_t>();
  d.frame.joints.resize(nj);
  for (JointSensor& j : d.frame.joints) {
    j.position = r.get<std::int32_t>();
    j.velocity = r.get<std::int32_t>();
    j.current_raw = r.get<std::int16_t>();
  }
  d.frame.foot_adc.resize(nf);
  for (std::uint16_t& adc : d.frame.foot_adc) {
    adc = r.get<std::uint16_t>();
    if (adc > kAdcMax) return {DecodeStatus::bad_field, {}};
  }
  if (session && d.frame.session != *session) d.status = DecodeStatus::unknown_session;
  return d;
}

// ----------------------------------------------------------------- channel

struct ChannelModel {
  double rtt_mean_us = 200.0;
  double rtt_jitter_us = 0.0;     // width of the uniform spread on the one-way delay
  double loss_probability = 0.0;  // per frame, independent
  bool reorder = false;

  /// Wired link: constant 200 µs round trip, no loss.
  static ChannelModel ethernet() { return {200.0, 0.0, 0.0, false}; }
  /// Multicast WiFi without acknowledgements: 1100 µs mean round trip, 4% loss.
  static ChannelModel wifi() { return {1100.0, 300.0, 0.04, false}; }

  void validate() const {
    if (!(rtt_mean_us >= 0.0) || !(rtt_jitter_us >= 0.0) || rtt_jitter_us > rtt_mean_us) {
      throw std::invalid_argument("ChannelModel: need 0 ≤ jitter ≤ rtt_mean");
    }
    if (!(loss_probability >= 0.0 && loss_probability < 1.0)) {
      throw std::invalid_argument("ChannelModel: loss probability must lie in [0, 1)");
    }
  }
};

struct ChannelStats {
  std::uint64_t sent = 0;
  std::uint64_t dropped = 0;
  std::uint64_t delivered = 0;
  double loss_rate() const { return sent ? double(dropped) / double(sent) : 0.0; }
};

/// One direction of a link. Frames are dropped independently or delivered
/// after rtt/2 ± jitter/2. Without reordering, delivery keeps send order.
class LossyChannel {
 public:
  explicit LossyChannel(ChannelModel model = {}, std::uint64_t seed = 0) : model_(model), rng_(seed) {
    model_.validate();
  }

  void send(double now, Bytes frame) {
    ++stats_.sent;
    if (model_.loss_probability > 0.0 && rng_.bernoulli(model_.loss_probability)) {
      ++stats_.dropped;
      return;
    }
    double delay = 0.5 * model_.rtt_mean_us * 1e-6;
    if (model_.rtt_jitter_us > 0.0) delay += rng_.uniform(-0.5, 0.5) * model_.rtt_jitter_us * 1e-6;
    double arrival = now + std::max(0.0, delay);
    if (!model_.reorder && !inflight_.empty()) arrival = std::max(arrival, inflight_.back().arrival);
    Pending p{arrival, std::move(frame)};
    if (model_.reorder) {
      auto it = std::upper_bound(inflight_.begin(), inflight_.end(), arrival,
                                 [](double t, const Pending& q) { return t < q.arrival; });
      inflight_.insert(it, std::move(p));
    } else {
      inflight_.push_back(std::move(p));
    }
  }

  /// Frames whose arrival time is ≤ now, in arrival order.
  std::vector<Bytes> deliver(double now) {
    std::vector<Bytes> out;
    while (!inflight_.empty() && inflight_.front().arrival <= now) {
      out.push_back(std::move(inflight_.front().bytes));
      inflight_.pop_front();
      ++stats_.delivered;
    }
    return out;
  }

  std::size_t in_flight() const { return inflight_.size(); }
  const ChannelStats& stats() const { return stats_; }
  const ChannelModel& model() const { return model_; }

 private:
  struct Pending {
    double arrival;
    Bytes bytes;
  };
  ChannelModel model_;
  Rng rng_;
  std::deque<Pending> inflight_;
  ChannelStats stats_;
};

/// Delivers the frames due within the next dt.
inline std::vector<Bytes> channel_step(LossyChannel& channel, double now, double dt) {
  return channel.deliver(now + dt);
}

// ---------------------------------------------------------------- freshness

/// Accepts only frames with a higher index than the last accepted one and
/// reports staleness once no frame was accepted for `timeout`.
class FreshnessGate {
 public:
  explicit FreshnessGate(double timeout = 0.01) : timeout_(timeout) {
    if (!(timeout > 0.0)) throw std::invalid_argument("FreshnessGate: timeout must be positive");
  }

  /// Returns true if the frame is newer and was accepted.
  bool offer(std::uint32_t index, double now) {
    if (last_index_ && index <= *last_index_) {
      ++rejected_;
      return false;
    }
    last_index_ = index;
    last_time_ = now;
    ++accepted_;
    return true;
  }

  /// True when nothing was accepted within the timeout (or ever).
  bool stale(double now) const { return !last_time_ || now - *last_time_ > timeout_ + 1e-12; }

  std::optional<std::uint32_t> last_index() const { return last_index_; }
  double age(double now) const { return last_time_ ? now - *last_time_ : kInf; }
  std::uint64_t accepted() const { return accepted_; }
  std::uint64_t rejected() const { return rejected_; }
  double timeout() const { return timeout_; }

 private:
  double timeout_;
  std::optional<std::uint32_t> last_index_;
  std::optional<double> last_time_;
  std::uint64_t accepted_ = 0;
  std::uint64_t rejected_ = 0;
};

}  // namespace quadctl
