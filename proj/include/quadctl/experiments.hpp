#pragma once

// Experiment runner: one entry point per scenario kind, each returning
// summary rows with pass bands and the CSV artifacts it produced.

#include <quadctl/bus.hpp>
#include <quadctl/leg_experiments.hpp>
#include <quadctl/plan.hpp>
#include <quadctl/quadruped_run.hpp>

#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace quadctl {

enum class ExperimentKind { quasi_static, drop, jump, contact_bench, stand, track_plan, comms_soak };

inline constexpr std::array<ExperimentKind, 7> kExperimentKinds{
    ExperimentKind::quasi_static, ExperimentKind::drop,       ExperimentKind::jump,      ExperimentKind::contact_bench,
    ExperimentKind::stand,        ExperimentKind::track_plan, ExperimentKind::comms_soak};

inline const char* to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::quasi_static: return "quasi_static";
    case ExperimentKind::drop: return "drop";
    case ExperimentKind::jump: return "jump";
    case ExperimentKind::contact_bench: return "contact_bench";
    case ExperimentKind::stand: return "stand";
    case ExperimentKind::track_plan: return "track_plan";
    case ExperimentKind::comms_soak: return "comms_soak";
  }
  return "?";
}

inline std::optional<ExperimentKind> parse_experiment_kind(const std::string& name) {
  for (ExperimentKind k : kExperimentKinds) {
    if (name == to_string(k)) return k;
  }
  return std::nullopt;
}

inline std::optional<ChannelModel> channel_preset(const std::string& name) {
  if (name == "ethernet") return ChannelModel::ethernet();
  if (name == "wifi") return ChannelModel::wifi();
  return std::nullopt;
}

inline bool is_model_preset(const std::string& name) {
  return name == "ideal" || name == "friction" || name == "flexible" || name == "hardware";
}

enum class PlanKind { stand, sinusoid, jump, file };

inline const char* to_string(PlanKind k) {
  switch (k) {
    case PlanKind::stand: return "stand";
    case PlanKind::sinusoid: return "sinusoid";
    case PlanKind::jump: return "jump";
    case PlanKind::file: return "file";
  }
  return "?";
}

struct PlanSource {
  PlanKind kind = PlanKind::jump;
  std::string file;  // plan CSV when kind == file
  StandSettings stand;
  SinusoidSettings sinusoid;
  JumpPlanSettings jump;
};

struct CommsSoakSettings {
  long frames = 1000000;     // frames pushed through the channel
  int fuzz_frames = 10000;   // codec round trips per frame type
  double rate = 1000.0;      // Hz
};

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::stand;
  std::string preset = "ideal";  // model preset, or a channel preset for the quadruped runs
  std::uint64_t seed = 1;
  std::string out;               // output directory, empty for none
  LegRigParams rig = rig_preset(ModelPreset::ideal);
  QuasiStaticSettings quasi_static;
  DropSettings drop;
  JumpSettings leg_jump;
  ContactBenchSettings contact_bench;
  QuadrupedRunSettings quadruped;
  StandSettings stand;
  PlanSource plan;
  CommsSoakSettings comms;
  ChannelModel comms_channel = ChannelModel::wifi();
};

struct SummaryRow {
  std::string metric;
  double value = 0.0;
  double lo = -kInf;  // pass band, inclusive
  double hi = kInf;
  bool informational = false;  // reported only; never fails

  bool pass() const { return informational || (value >= lo && value <= hi); }
};

struct ExperimentReport {
  std::string experiment;
  std::vector<SummaryRow> rows;
  std::map<std::string, std::string> files;  // name → CSV content

  bool passed() const {
    return std::all_of(rows.begin(), rows.end(), [](const SummaryRow& r) { return r.pass(); });
  }
  void check(std::string metric, double value, double lo, double hi) {
    rows.push_back({std::move(metric), value, lo, hi, false});
  }
  void info(std::string metric, double value) { rows.push_back({std::move(metric), value, -kInf, kInf, true}); }
};

namespace detail {

inline std::string fmt(double v) {
  std::string s;
  put_number(s, v);
  return s;
}

inline std::string band(const SummaryRow& r) {
  if (r.informational) return "-";
  if (std::isinf(r.lo) && std::isinf(r.hi)) return "any";
  if (std::isinf(r.lo)) return "<= " + fmt(r.hi);
  if (std::isinf(r.hi)) return ">= " + fmt(r.lo);
  if (r.lo == r.hi) return "== " + fmt(r.lo);
  return "[" + fmt(r.lo) + ", " + fmt(r.hi) + "]";
}

inline std::string stiffness_tag(double k) { return "K" + fmt(k); }

}  // namespace detail

inline void print_summary(std::ostream& out, const ExperimentReport& report) {
  std::size_t width = 6;
  for (const auto& r : report.rows) width = std::max(width, r.metric.size());
  out << report.experiment << '\n';
  for (const auto& r : report.rows) {
    out << "  " << std::left << std::setw(static_cast<int>(width)) << r.metric << "  " << std::setw(14)
        << detail::fmt(r.value) << "  " << std::setw(26) << detail::band(r) << "  "
        << (r.informational ? "info" : r.pass() ? "PASS" : "FAIL") << '\n';
  }
  out << (report.passed() ? "PASS" : "FAIL") << '\n';
}

inline std::string summary_csv(const ExperimentReport& report) {
  std::ostringstream out;
  out << "metric,value,lo,hi,status\n";
  for (const auto& r : report.rows) {
    out << r.metric << ',' << detail::fmt(r.value) << ',' << detail::fmt(r.lo) << ',' << detail::fmt(r.hi) << ','
        << (r.informational ? "info" : r.pass() ? "pass" : "fail") << '\n';
  }
  return out.str();
}

// ------------------------------------------------------------ leg rig

inline ExperimentReport run_quasi_static(const ExperimentSpec& spec) {
  ExperimentReport rep{"quasi_static", {}, {}};
  const auto traces = quasi_static_probe(spec.rig, spec.quasi_static);
  const bool ideal = spec.preset == "ideal";
  const bool flexible = !spec.rig.leg.rigid_transmission();
  double envelope = 0.0;
  int saturating = 0;
  std::ostringstream table, samples;
  table << "commanded,regressed,intercept,fit_samples,saturated_samples,envelope_error\n";
  samples << "commanded,compression,leg_length,force,saturated\n";
  for (const auto& t : traces) {
    const std::string tag = "regressed_" + detail::stiffness_tag(t.commanded);
    if (ideal) {
      rep.check(tag, t.regressed, 0.99 * t.commanded, 1.01 * t.commanded);
    } else if (flexible && t.commanded > 150.0) {
      rep.check(tag, t.regressed, -kInf, std::nextafter(t.commanded, 0.0));
    } else {
      rep.info(tag, t.regressed);
    }
    if (t.saturated_samples > 0) {
      ++saturating;
      envelope = std::max(envelope, t.envelope_error);
    }
    table << t.commanded << ',' << t.regressed << ',' << t.intercept << ',' << t.fit_samples << ','
          << t.saturated_samples << ',' << t.envelope_error << '\n';
    for (std::size_t i = 0; i < t.force.size(); ++i) {
      samples << t.commanded << ',' << t.compression[i] << ',' << t.leg_length[i] << ',' << t.force[i] << ','
              << int(t.saturated[i]) << '\n';
    }
  }
  rep.info("stiffness_values", static_cast<double>(traces.size()));
  rep.info("saturating_values", saturating);
  if (ideal) {
    rep.check("envelope_error_max", envelope, 0.0, 0.02);
  } else {
    rep.info("envelope_error_max", envelope);
  }
  rep.files["quasi_static_summary.csv"] = table.str();
  rep.files["quasi_static_trace.csv"] = samples.str();
  return rep;
}

inline ExperimentReport run_drop(const ExperimentSpec& spec) {
  ExperimentReport rep{"drop", {}, {}};
  const DropResult r = drop_experiment(spec.rig, spec.drop);
  const double weight = spec.rig.carried_mass * kGravity;
  rep.check("settle_force", r.settle_force, 0.98 * weight, 1.02 * weight);
  const double k = spec.drop.stiffness;
  if (spec.preset == "ideal") {
    rep.check("regressed_stiffness", r.regressed_stiffness, 0.95 * k, 1.05 * k);
  } else {
    rep.info("regressed_stiffness", r.regressed_stiffness);
  }
  rep.info("regressed_damping", r.regressed_damping);
  rep.info("touchdowns", r.touchdowns);
  const int compared = r.hysteresis_bins_compared();
  const int above = r.hysteresis_bins_loading_above();
  if (spec.rig.leg.joint_friction_coulomb > 0.0) {
    rep.check("hysteresis_bins_compared", compared, 1, kInf);
    rep.check("hysteresis_bins_loading_below", compared - above, 0, 0);
  } else {
    rep.info("hysteresis_bins_compared", compared);
    rep.info("hysteresis_bins_loading_above", above);
  }
  std::ostringstream trace, hyst;
  trace << "time,hip_height,compression,compression_rate,force,contact,saturated\n";
  for (const auto& s : r.trace) {
    trace << s.time << ',' << s.hip_height << ',' << s.compression << ',' << s.compression_rate << ',' << s.force
          << ',' << int(s.contact) << ',' << int(s.saturated) << '\n';
  }
  hyst << "compression,loading,unloading,loading_count,unloading_count\n";
  for (const auto& b : r.hysteresis) {
    hyst << b.compression << ',' << b.loading << ',' << b.unloading << ',' << b.loading_count << ','
         << b.unloading_count << '\n';
  }
  rep.files["drop_trace.csv"] = trace.str();
  rep.files["drop_hysteresis.csv"] = hyst.str();
  return rep;
}

inline ExperimentReport run_leg_jump(const ExperimentSpec& spec) {
  ExperimentReport rep{"jump", {}, {}};
  const JumpResult r = jump_experiment(spec.rig, spec.leg_jump);
  int powered = 0;
  double worst = 0.0;
  for (const auto& f : r.flights) {
    if (!f.powered || !f.reached_apex) continue;
    ++powered;
    worst = std::max(worst, f.ballistic_error());
  }
  rep.check("powered_flights", powered, 1, kInf);
  rep.check("ballistic_error_max", worst, 0.0, 0.05);
  rep.check("max_applied_torque", r.max_applied_torque, 0.0, spec.rig.leg.max_torque());
  rep.info("hip_apex", r.jump_apex());
  rep.info("standing_hip_height", r.standing_hip_height);
  rep.info("saturated_commands", r.saturated_commands);
  std::ostringstream trace, flights;
  trace << "time,hip_height,com_height,force\n";
  for (std::size_t i = 0; i < r.time.size(); ++i) {
    trace << r.time[i] << ',' << r.hip_height[i] << ',' << r.com_height[i] << ',' << r.force[i] << '\n';
  }
  flights << "liftoff_time,liftoff_com_height,liftoff_com_velocity,predicted_com_apex,com_apex,hip_apex,powered\n";
  for (const auto& f : r.flights) {
    flights << f.liftoff_time << ',' << f.liftoff_com_height << ',' << f.liftoff_com_velocity << ','
            << f.predicted_com_apex << ',' << f.com_apex << ',' << f.hip_apex << ',' << int(f.powered) << '\n';
  }
  rep.files["jump_trace.csv"] = trace.str();
  rep.files["jump_flights.csv"] = flights.str();
  return rep;
}

inline ExperimentReport run_contact_bench(const ExperimentSpec& spec) {
  ExperimentReport rep{"contact_bench", {}, {}};
  ContactBenchSettings s = spec.contact_bench;
  s.seed = spec.seed;
  const ContactBenchResult r = contact_bench(spec.rig, s);
  double sensor_sum = 0.0, current_sum = 0.0;
  int false_positives = 0;
  int current_missed = 0;
  std::ostringstream table;
  table << "length,stiffness,sensor_delay_ms,current_delay_ms,max_swing_estimate,unusable_estimates\n";
  for (const auto& t : r.traces) {
    const std::string tag = "L" + detail::fmt(t.length) + "_" + detail::stiffness_tag(t.stiffness);
    const double sd = t.sensor_delay().value_or(kInf);
    const double cd = t.current_delay().value_or(kInf);
    current_missed += t.current_delay() ? 0 : 1;
    rep.check("sensor_delay_ms_" + tag, 1e3 * sd, 0.0, 3.0);
    rep.check("current_minus_sensor_ms_" + tag, 1e3 * (cd - sd), std::nextafter(0.0, 1.0), kInf);
    sensor_sum += sd;
    current_sum += cd;
    false_positives += (t.sensor_false_positive ? 1 : 0) + (t.current_false_positive ? 1 : 0);
    table << t.length << ',' << t.stiffness << ',' << 1e3 * sd << ',' << 1e3 * cd << ',' << t.max_swing_estimate
          << ',' << t.unusable_estimates << '\n';
    std::ostringstream rows;
    write_contact_trace_csv(rows, t.rows);
    rep.files["contact_" + tag + ".csv"] = rows.str();
  }
  rep.check("aggregate_delay_ratio", current_sum / sensor_sum, 5.0, kInf);
  rep.check("false_positives", false_positives, 0, 0);
  rep.info("current_missed_traces", current_missed);
  rep.info("current_threshold_N", r.threshold);
  rep.info("mean_sensor_delay_ms", 1e3 * sensor_sum / r.traces.size());
  rep.info("mean_current_delay_ms", 1e3 * current_sum / r.traces.size());
  rep.files["contact_bench.csv"] = table.str();
  return rep;
}

// ---------------------------------------------------------- quadruped

inline Plan load_plan(const PlanSource& src, const QuadrupedModel& model, std::vector<PlanWarning>* warnings = nullptr) {
  GeneratedPlan g;
  switch (src.kind) {
    case PlanKind::stand: g = stand_plan(model, src.stand); break;
    case PlanKind::sinusoid: g = sinusoid_plan(model, src.sinusoid); break;
    case PlanKind::jump: g = jump_plan(model, src.jump); break;
    case PlanKind::file: {
      std::ifstream in(src.file);
      if (!in) throw ConfigError("cannot open plan file '" + src.file + "'");
      g.plan = read_plan_csv(in);
      break;
    }
  }
  if (warnings) *warnings = g.warnings;
  return g.plan;
}

inline QuadrupedRunSettings quadruped_settings(const ExperimentSpec& spec) {
  QuadrupedRunSettings s = spec.quadruped;
  s.seed = spec.seed;
  if (auto ch = channel_preset(spec.preset)) s.channel = *ch;
  return s;
}

inline void add_run_files(ExperimentReport& rep, const QuadrupedRunResult& r, const std::string& prefix) {
  std::ostringstream trace;
  write_quadruped_trace_csv(trace, r.trace);
  rep.files[prefix + "_trace.csv"] = trace.str();
}

inline ExperimentReport run_stand(const ExperimentSpec& spec) {
  ExperimentReport rep{"stand", {}, {}};
  const QuadrupedRunSettings s = quadruped_settings(spec);
  StandSettings st = spec.stand;
  st.duration = std::max(st.duration, s.duration);
  const GeneratedPlan g = stand_plan(s.sim.model, st);
  QuadrupedRunSettings run = s;
  run.duration = st.duration;
  const QuadrupedRunResult r = run_quadruped(g.plan, run);
  if (s.channel) {
    rep.check("com_drift_max_m", r.max_com_error, 0.0, 5e-3);
    rep.info("orientation_error_max_deg", r.max_orientation_error * 180.0 / kPi);
    rep.info("uplink_loss_rate", r.uplink.loss_rate());
    rep.info("downlink_loss_rate", r.downlink.loss_rate());
    rep.info("controller_safe_stop_ticks", r.safe_stop_ticks);
  } else {
    rep.check("com_drift_max_m", r.max_com_error, 0.0, 1e-3);
    rep.check("orientation_error_max_deg", r.max_orientation_error * 180.0 / kPi, 0.0, 0.5);
  }
  rep.check("crashed", r.crashed, 0, 0);
  rep.info("com_drift_final_m", r.final_com_error);
  rep.info("max_commanded_torque", r.max_commanded_torque);
  add_run_files(rep, r, "stand");
  return rep;
}

inline ExperimentReport run_track_plan(const ExperimentSpec& spec) {
  ExperimentReport rep{"track_plan", {}, {}};
  QuadrupedRunSettings s = quadruped_settings(spec);
  std::vector<PlanWarning> warnings;
  const Plan plan = load_plan(spec.plan, s.sim.model, &warnings);
  s.duration = 0.0;
  const QuadrupedRunResult r = run_quadruped(plan, s);
  const double tau_max = s.sim.model.leg.max_torque();
  int violations = 0;
  for (const auto& row : r.trace) {
    for (const Vec2& tau : row.torque) violations += (tau.cwiseAbs().maxCoeff() > tau_max) ? 1 : 0;
  }
  rep.check("torque_limit_violations", violations, 0, 0);
  rep.check("max_commanded_torque", r.max_commanded_torque, 0.0, tau_max);
  rep.check("crashed", r.crashed, 0, 0);
  const FlightRecord* f = r.highest_flight();
  const bool has_flight = std::any_of(plan.samples().begin(), plan.samples().end(), [](const PlanSample& p) {
    return std::none_of(p.feet.begin(), p.feet.end(), [](const FootReference& x) { return x.contact; });
  });
  if (has_flight) {
    rep.check("flights", static_cast<double>(r.flights.size()), 1, kInf);
    rep.check("apex_error_vs_ballistic", f ? f->apex_error() : kInf, 0.0, 0.05);
    if (f) {
      rep.info("apex_com_height", f->apex);
      rep.info("predicted_apex_com_height", f->predicted_apex);
      rep.info("liftoff_velocity", f->liftoff_velocity);
    }
  }
  rep.info("tracking_rmse_m", r.com_rmse);
  rep.info("com_error_max_m", r.max_com_error);
  rep.info("orientation_error_max_deg", r.max_orientation_error * 180.0 / kPi);
  rep.info("saturated_ticks", r.saturated_ticks);
  rep.info("plan_warnings", static_cast<double>(warnings.size()));
  std::ostringstream flights;
  flights << "liftoff_time,liftoff_height,liftoff_velocity,predicted_apex,apex,touchdown_time\n";
  for (const auto& x : r.flights) {
    flights << x.liftoff_time << ',' << x.liftoff_height << ',' << x.liftoff_velocity << ',' << x.predicted_apex
            << ',' << x.apex << ',' << x.touchdown_time << '\n';
  }
  rep.files["track_plan_flights.csv"] = flights.str();
  add_run_files(rep, r, "track_plan");
  std::ostringstream plan_csv;
  write_plan_csv(plan_csv, plan);
  rep.files["track_plan_plan.csv"] = plan_csv.str();
  return rep;
}

struct CommsSoakResult {
  ChannelStats stats;
  long order_violations = 0;
  long duplicates = 0;
  long delay_violations = 0;  // deliveries outside the configured delay band
  int fuzz_mismatches = 0;
  int corrupted_accepted = 0;
  int gate_violations = 0;
};

inline CommsSoakResult comms_soak(const ChannelModel& model, const CommsSoakSettings& s, std::uint64_t seed) {
  CommsSoakResult out;
  LossyChannel ch(model, seed);
  const double period = 1.0 / s.rate;
  const double lo = 0.5 * (model.rtt_mean_us - model.rtt_jitter_us) * 1e-6 - 1e-12;
  const double hi = 0.5 * (model.rtt_mean_us + model.rtt_jitter_us) * 1e-6 + 1e-12;
  std::vector<char> seen(static_cast<std::size_t>(s.frames) + 1, 0);
  std::uint32_t last = 0;
  CommandFrame cmd;
  cmd.session = 1;
  cmd.joints.resize(8);
  auto drain = [&](double now) {
    for (const Bytes& b : ch.deliver(now)) {
      const auto d = decode_command(b);
      if (!d.ok()) {
        ++out.corrupted_accepted;
        continue;
      }
      const std::uint32_t k = d.frame.index;
      if (k <= last) ++out.order_violations;
      last = std::max(last, k);
      if (seen[k]++) ++out.duplicates;
      const double sent = k * period;
      const double delay = now - sent;
      // Delivery is polled each period, so a frame may be seen up to one period late.
      if (delay < lo - period || delay > hi + period) ++out.delay_violations;
    }
  };
  for (long k = 1; k <= s.frames; ++k) {
    const double now = k * period;
    cmd.index = static_cast<std::uint32_t>(k);
    ch.send(now, encode(cmd));
    drain(now);
  }
  const long tail = static_cast<long>(std::ceil(hi / period)) + 1;
  for (long k = s.frames + 1; k <= s.frames + tail; ++k) drain(k * period);
  out.stats = ch.stats();
  if (out.stats.delivered + out.stats.dropped != out.stats.sent) ++out.duplicates;

  Rng rng(seed ^ 0x5bd1e995u);
  for (int i = 0; i < s.fuzz_frames; ++i) {
    CommandFrame c;
    c.session = static_cast<std::uint16_t>(rng.next_u64());
    c.index = static_cast<std::uint32_t>(rng.next_u64());
    c.joints.resize(rng.next_u64() % (kMaxJoints + 1));
    for (auto& j : c.joints) j = {static_cast<std::int16_t>(rng.next_u64()), static_cast<std::uint8_t>(rng.next_u64())};
    SensorFrame f;
    f.session = c.session;
    f.index = c.index;
    f.timestamp_us = rng.next_u64();
    f.joints.resize(rng.next_u64() % (kMaxJoints + 1));
    for (auto& j : f.joints) {
      j = {static_cast<std::int32_t>(rng.next_u64()), static_cast<std::int32_t>(rng.next_u64()),
           static_cast<std::int16_t>(rng.next_u64())};
    }
    f.foot_adc.resize(rng.next_u64() % (kMaxFeet + 1));
    for (auto& a : f.foot_adc) a = static_cast<std::uint16_t>(rng.next_u64() % (kAdcMax + 1));
    const Bytes bc = encode(c);
    const Bytes bs = encode(f);
    const auto dc = decode_command(bc);
    const auto ds = decode_sensor(bs);
    if (!dc.ok() || !(dc.frame == c)) ++out.fuzz_mismatches;
    if (!ds.ok() || !(ds.frame == f)) ++out.fuzz_mismatches;
    Bytes flipped = bs;
    const std::size_t bit = rng.next_u64() % (flipped.size() * 8);
    flipped[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
    if (decode_sensor(flipped).ok()) ++out.corrupted_accepted;
  }

  // Freshness rules: older and repeated indices are refused, and the gate goes
  // stale exactly after the timeout.
  FreshnessGate gate(0.01);
  const std::array<std::uint32_t, 6> order{3, 1, 3, 4, 2, 7};
  const std::array<bool, 6> accept{true, false, false, true, false, true};
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (gate.offer(order[i], 1e-3 * i) != accept[i]) ++out.gate_violations;
  }
  if (gate.stale(0.005 + 0.01)) ++out.gate_violations;
  if (!gate.stale(0.005 + 0.0101)) ++out.gate_violations;
  return out;
}

inline ExperimentReport run_comms_soak(const ExperimentSpec& spec) {
  ExperimentReport rep{"comms_soak", {}, {}};
  ChannelModel model = spec.comms_channel;
  if (auto ch = channel_preset(spec.preset)) model = *ch;
  const CommsSoakResult r = comms_soak(model, spec.comms, spec.seed);
  rep.check("frames_sent", static_cast<double>(r.stats.sent), static_cast<double>(spec.comms.frames),
            static_cast<double>(spec.comms.frames));
  rep.check("loss_rate", r.stats.loss_rate(), model.loss_probability - 0.001, model.loss_probability + 0.001);
  rep.check("order_violations", static_cast<double>(r.order_violations), 0, 0);
  rep.check("duplicates", static_cast<double>(r.duplicates), 0, 0);
  rep.check("delay_violations", static_cast<double>(r.delay_violations), 0, 0);
  rep.check("fuzz_mismatches", r.fuzz_mismatches, 0, 0);
  rep.check("corrupted_frames_accepted", r.corrupted_accepted, 0, 0);
  rep.check("freshness_rule_violations", r.gate_violations, 0, 0);

  // Closed-loop safe-stop: the link dies after 0.5 s of stand.
  const QuadrupedModel& qm = spec.quadruped.sim.model;
  QuadrupedRunSettings run = spec.quadruped;
  run.seed = spec.seed;
  run.duration = 0.6;
  run.channel = ChannelModel{model.rtt_mean_us, model.rtt_jitter_us, 0.999999999, model.reorder};
  const QuadrupedRunResult dead = run_quadruped(stand_plan(qm, {0.6, 1e-3, spec.stand.leg_length}).plan, run);
  int first_stop = -1;
  for (std::size_t k = 0; k < dead.trace.size(); ++k) {
    if (dead.trace[k].safe_stop) {
      first_stop = static_cast<int>(k);
      break;
    }
  }
  rep.check("safe_stop_after_ms", first_stop < 0 ? kInf : first_stop + 1.0, 10.0, 12.0);
  std::ostringstream stats;
  stats << "sent,delivered,dropped,loss_rate\n"
        << r.stats.sent << ',' << r.stats.delivered << ',' << r.stats.dropped << ',' << r.stats.loss_rate() << '\n';
  rep.files["comms_soak.csv"] = stats.str();
  return rep;
}

inline ExperimentReport run_experiment(const ExperimentSpec& spec) {
  ExperimentReport rep;
  switch (spec.kind) {
    case ExperimentKind::quasi_static: rep = run_quasi_static(spec); break;
    case ExperimentKind::drop: rep = run_drop(spec); break;
    case ExperimentKind::jump: rep = run_leg_jump(spec); break;
    case ExperimentKind::contact_bench: rep = run_contact_bench(spec); break;
    case ExperimentKind::stand: rep = run_stand(spec); break;
    case ExperimentKind::track_plan: rep = run_track_plan(spec); break;
    case ExperimentKind::comms_soak: rep = run_comms_soak(spec); break;
  }
  rep.experiment = std::string(to_string(spec.kind)) + " (preset " + spec.preset + ", seed " +
                   std::to_string(spec.seed) + ")";
  rep.files["summary.csv"] = summary_csv(rep);
  return rep;
}

}  // namespace quadctl
