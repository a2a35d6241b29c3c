#pragma once

// YAML scenario files. Every key is checked: unknown keys and values of the
// wrong type raise ConfigError with the 1-based line of the offending node.

#include <quadctl/experiments.hpp>

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <set>

namespace quadctl {

/// Values given on the command line; each one beats the config file.
struct CliOverrides {
  std::optional<std::string> experiment;
  std::optional<std::string> preset;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

namespace detail {

inline int yaml_line(const YAML::Node& n) { return n.Mark().line >= 0 ? n.Mark().line + 1 : -1; }

template <typename T>
const char* type_name() {
  if constexpr (std::is_same_v<T, bool>) return "a boolean";
  else if constexpr (std::is_integral_v<T>) return "an integer";
  else if constexpr (std::is_floating_point_v<T>) return "a number";
  else if constexpr (std::is_same_v<T, std::string>) return "a string";
  else return "a list of numbers";
}

class Section {
 public:
  Section(const YAML::Node& node, std::string path) : node_(node), path_(std::move(path)) {
    if (node_ && !node_.IsNull() && !node_.IsMap()) {
      throw ConfigError("'" + path_ + "' must be a mapping", yaml_line(node_));
    }
  }

  bool present() const { return node_ && node_.IsMap(); }
  const std::string& path() const { return path_; }

  YAML::Node child(const std::string& key) {
    used_.insert(key);
    if (!present()) return YAML::Node(YAML::NodeType::Undefined);
    const YAML::Node& n = node_;  // const lookup never inserts
    return n[key];
  }

  std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  Section section(const std::string& key) { return Section(child(key), qualified(key)); }

  template <typename T>
  bool get(const std::string& key, T& out) {
    const YAML::Node n = child(key);
    if (!n) return false;
    try {
      out = n.as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError("'" + qualified(key) + "' must be " + type_name<T>(), yaml_line(n));
    }
    return true;
  }

  template <int N>
  bool get_vec(const std::string& key, Eigen::Matrix<double, N, 1>& out) {
    std::vector<double> v;
    if (!get(key, v)) return false;
    if (static_cast<int>(v.size()) != N) {
      throw ConfigError("'" + qualified(key) + "' must have " + std::to_string(N) + " entries",
                        yaml_line(child(key)));
    }
    for (int i = 0; i < N; ++i) out[i] = v[i];
    return true;
  }

  bool get_diag(const std::string& key, Mat3& out) {
    Vec3 d = out.diagonal();
    if (!get_vec<3>(key, d)) return false;
    out = d.asDiagonal();
    return true;
  }

  template <typename Enum, typename Parse>
  bool get_enum(const std::string& key, Enum& out, Parse parse) {
    std::string name;
    if (!get(key, name)) return false;
    const std::optional<Enum> v = parse(name);
    if (!v) throw ConfigError("'" + qualified(key) + "': unknown value '" + name + "'", yaml_line(child(key)));
    out = *v;
    return true;
  }

  void finish() const {
    if (!present()) return;
    for (const auto& kv : node_) {
      const std::string key = kv.first.as<std::string>();
      if (!used_.count(key)) throw ConfigError("unknown key '" + qualified(key) + "'", yaml_line(kv.first));
    }
  }

 private:
  YAML::Node node_;
  std::string path_;
  std::set<std::string> used_;
};

inline std::optional<ContactRule> parse_contact_rule(const std::string& s) {
  if (s == "plan_and_sensor") return ContactRule::plan_and_sensor;
  if (s == "plan_and_sensor_early_touch") return ContactRule::plan_and_sensor_early_touch;
  if (s == "plan_only") return ContactRule::plan_only;
  if (s == "sensor_only") return ContactRule::sensor_only;
  return std::nullopt;
}

inline std::optional<FrictionConstraints> parse_friction_constraints(const std::string& s) {
  if (s == "printed") return FrictionConstraints::printed;
  if (s == "printed_unilateral") return FrictionConstraints::printed_unilateral;
  if (s == "symmetric") return FrictionConstraints::symmetric;
  return std::nullopt;
}

inline std::optional<HeightField::Kind> parse_terrain(const std::string& s) {
  if (s == "flat") return HeightField::Kind::flat;
  if (s == "step") return HeightField::Kind::step;
  if (s == "seesaw") return HeightField::Kind::seesaw;
  return std::nullopt;
}

inline std::optional<PlanKind> parse_plan_kind(const std::string& s) {
  for (PlanKind k : {PlanKind::stand, PlanKind::sinusoid, PlanKind::jump, PlanKind::file}) {
    if (s == to_string(k)) return k;
  }
  return std::nullopt;
}

inline void read_leg(Section& sec, LegParams& leg) {
  sec.get("segment_length", leg.segment_length);
  sec.get("gear_ratio", leg.gear_ratio);
  sec.get("torque_constant", leg.torque_constant);
  sec.get("max_current", leg.max_current);
  sec.get("joint_friction_coulomb", leg.joint_friction_coulomb);
  sec.get("transmission_stiffness", leg.transmission_stiffness);
}

inline void read_sensor(Section sec, SensorModel& m) {
  sec.get("trigger_force", m.trigger_force);
  sec.get("full_scale_force", m.full_scale_force);
  sec.get("max_travel", m.max_travel);
  sec.get("voltage_max", m.voltage_max);
  sec.get("noise_std", m.noise_std);
  sec.get("response_lag", m.response_lag);
  sec.get("map_exponent", m.map_exponent);
  sec.finish();
}

inline void read_rig(Section sec, LegRigParams& p) {
  read_leg(sec, p.leg);
  sec.get("carried_mass", p.carried_mass);
  sec.get("thigh_mass", p.thigh_mass);
  sec.get("thigh_com", p.thigh_com);
  sec.get("shank_mass", p.shank_mass);
  sec.get("shank_com", p.shank_com);
  sec.get("foot_mass", p.foot_mass);
  sec.get("rotor_inertia", p.rotor_inertia);
  sec.get("friction_velocity", p.friction_velocity);
  sec.get("foot_offset", p.foot_offset);
  Section g = sec.section("ground");
  g.get("stiffness", p.ground.stiffness);
  g.get("damping", p.ground.damping);
  g.get("friction", p.ground.friction);
  g.get("tangential_stiffness", p.ground.tangential_stiffness);
  g.get("tangential_damping", p.ground.tangential_damping);
  g.finish();
  sec.finish();
}

inline void read_quadruped(Section sec, QuadrupedRunSettings& s) {
  QuadrupedSimParams& p = s.sim;
  sec.get("mass", p.model.mass);
  sec.get_diag("locked_inertia", p.model.locked_inertia);
  sec.get_vec<3>("com_offset", p.model.com_offset);
  sec.get("max_current", p.model.leg.max_current);
  sec.get("friction", p.ground.friction);
  sec.get("lateral_stiffness", p.lateral_stiffness);
  sec.get("lateral_damping", p.lateral_damping);
  sec.get("swing_inertia", p.swing_inertia);
  sec.get("rotor_inertia", p.rotor_inertia);
  sec.get("duration", s.duration);
  sec.get("safe_stop_timeout", s.safe_stop_timeout);
  sec.get("crash_height", s.crash_height);
  sec.get("record_trace", s.record_trace);
  Section t = sec.section("terrain");
  HeightField& h = p.ground.terrain;
  t.get_enum("kind", h.kind, parse_terrain);
  t.get("step_x", h.step_x);
  t.get("step_height", h.step_height);
  t.get_vec<2>("plank_center", h.plank_center);
  t.get("plank_half_length", h.plank_half_length);
  t.get("plank_half_width", h.plank_half_width);
  t.get("plank_height", h.plank_height);
  t.get("plank_pitch", h.plank_pitch);
  t.finish();
  sec.finish();
}

inline void read_controller(Section sec, ControllerConfig& c) {
  sec.get_diag("com_stiffness", c.wrench.com_stiffness);
  sec.get_diag("com_damping", c.wrench.com_damping);
  sec.get_diag("orientation_stiffness", c.wrench.orientation_stiffness);
  sec.get_diag("momentum_damping", c.wrench.momentum_damping);
  sec.get_diag("leg_stiffness", c.leg.stiffness);
  sec.get_diag("leg_damping", c.leg.damping);
  sec.get("friction_coefficient", c.allocation.friction_coefficient);
  sec.get("slack_weight", c.allocation.slack_weight);
  sec.get_enum("friction_constraints", c.allocation.friction, parse_friction_constraints);
  sec.get_enum("contact_rule", c.contact_rule, parse_contact_rule);
  sec.get("plan_time_tolerance", c.plan_time_tolerance);
  sec.finish();
}

inline bool read_channel(Section sec, ChannelModel& m) {
  if (!sec.present()) return false;
  sec.get("rtt_mean_us", m.rtt_mean_us);
  sec.get("rtt_jitter_us", m.rtt_jitter_us);
  sec.get("loss_probability", m.loss_probability);
  sec.get("reorder", m.reorder);
  sec.finish();
  return true;
}

inline void read_plan(Section sec, PlanSource& p) {
  sec.get_enum("kind", p.kind, parse_plan_kind);
  sec.get("file", p.file);
  Section st = sec.section("stand");
  st.get("duration", p.stand.duration);
  st.get("dt", p.stand.dt);
  st.get("leg_length", p.stand.leg_length);
  st.finish();
  Section si = sec.section("sinusoid");
  si.get("duration", p.sinusoid.duration);
  si.get("dt", p.sinusoid.dt);
  si.get("leg_length", p.sinusoid.leg_length);
  si.get_vec<3>("amplitude", p.sinusoid.amplitude);
  si.get("frequency", p.sinusoid.frequency);
  si.finish();
  Section j = sec.section("jump");
  JumpPlanSettings& js = p.jump;
  j.get("dt", js.dt);
  j.get("stand_length", js.stand_length);
  j.get("crouch_length", js.crouch_length);
  j.get("takeoff_length", js.takeoff_length);
  j.get("apex_height", js.apex_height);
  j.get("landing_stroke", js.landing_stroke);
  j.get("landing_extension", js.landing_extension);
  j.get("stand_time", js.stand_time);
  j.get("crouch_time", js.crouch_time);
  j.get("recover_time", js.recover_time);
  j.get("hold_time", js.hold_time);
  j.finish();
  sec.finish();
  if (p.kind == PlanKind::file && p.file.empty()) {
    throw ConfigError("'plan.kind' is file but 'plan.file' is missing");
  }
}

}  // namespace detail

/// Builds a spec from a parsed YAML document and command-line overrides.
/// `base_dir` resolves a relative plan file.
inline ExperimentSpec build_spec(const YAML::Node& root, const CliOverrides& cli, const std::string& base_dir = "") {
  using detail::Section;
  if (root && !root.IsNull() && !root.IsMap()) throw ConfigError("config root must be a mapping", detail::yaml_line(root));
  Section top(root, "");
  ExperimentSpec spec;

  std::string kind_name = to_string(spec.kind);
  top.get("experiment", kind_name);
  if (cli.experiment) kind_name = *cli.experiment;
  const auto kind = parse_experiment_kind(kind_name);
  if (!kind) {
    throw ConfigError("unknown experiment '" + kind_name + "'", cli.experiment ? -1 : detail::yaml_line(root["experiment"]));
  }
  spec.kind = *kind;

  top.get("preset", spec.preset);
  if (cli.preset) spec.preset = *cli.preset;
  if (!is_model_preset(spec.preset) && !channel_preset(spec.preset)) {
    throw ConfigError("unknown preset '" + spec.preset + "' (ideal, friction, flexible, hardware, ethernet, wifi)",
                      cli.preset ? -1 : detail::yaml_line(root["preset"]));
  }
  spec.rig = rig_preset(is_model_preset(spec.preset) ? parse_preset(spec.preset) : ModelPreset::ideal);

  top.get("seed", spec.seed);
  if (cli.seed) spec.seed = *cli.seed;
  top.get("out", spec.out);
  if (cli.out) spec.out = *cli.out;

  // The leg section describes the motor and links for both the rig and the robot.
  const YAML::Node leg_node = root ? root["leg"] : YAML::Node(YAML::NodeType::Undefined);
  detail::read_rig(top.section("leg"), spec.rig);
  if (leg_node) {
    Section robot_leg(leg_node, "leg");
    detail::read_leg(robot_leg, spec.quadruped.sim.model.leg);
  }
  detail::read_quadruped(top.section("quadruped"), spec.quadruped);
  detail::read_controller(top.section("controller"), spec.quadruped.controller);
  ChannelModel channel = spec.comms_channel;
  if (detail::read_channel(top.section("channel"), channel)) {
    spec.quadruped.channel = channel;
    spec.comms_channel = channel;
  }
  Section sensor = top.section("sensor");
  if (sensor.present()) {
    detail::read_sensor(sensor, spec.quadruped.sim.sensor);
    detail::read_sensor(Section(root["sensor"], "sensor"), spec.contact_bench.sensor);
  }

  Section qs = top.section("quasi_static");
  qs.get("stiffness", spec.quasi_static.stiffness);
  qs.get("rest_length", spec.quasi_static.rest_length);
  qs.get("speed", spec.quasi_static.speed);
  qs.get("max_compression", spec.quasi_static.max_compression);
  qs.get("settle_time", spec.quasi_static.settle_time);
  qs.get("fit_start", spec.quasi_static.fit_start);
  qs.finish();

  Section dr = top.section("drop");
  DropSettings& d = spec.drop;
  dr.get("hip_height", d.hip_height);
  dr.get("rest_length", d.rest_length);
  dr.get("stiffness", d.stiffness);
  dr.get("damping", d.damping);
  dr.get("duration", d.duration);
  dr.get("settle_window", d.settle_window);
  dr.get("fit_window", d.fit_window);
  dr.get("ringing_window", d.ringing_window);
  dr.get("hysteresis_bins", d.hysteresis_bins);
  dr.finish();

  Section ju = top.section("jump");
  JumpSettings& j = spec.leg_jump;
  ju.get("stand_length", j.stand_length);
  ju.get("crouch_length", j.crouch_length);
  ju.get("push_length", j.push_length);
  ju.get("flight_length", j.flight_length);
  ju.get("amplitude", j.amplitude);
  ju.get("settle_time", j.settle_time);
  ju.get("period", j.period);
  ju.get("crouch_time", j.crouch_time);
  ju.get("push_time", j.push_time);
  ju.get("liftoff_window", j.liftoff_window);
  ju.get("cycles", j.cycles);
  ju.get_vec<2>("kp", j.kp);
  ju.get_vec<2>("kd", j.kd);
  ju.finish();

  Section cb = top.section("contact_bench");
  ContactBenchSettings& c = spec.contact_bench;
  cb.get("lengths", c.lengths);
  cb.get("stiffness", c.stiffness);
  cb.get("damping", c.damping);
  cb.get("clearance", c.clearance);
  cb.get("ramp_offset", c.ramp_offset);
  cb.get("ramp_time", c.ramp_time);
  cb.get("hold_time", c.hold_time);
  cb.get("post_contact_time", c.post_contact_time);
  cb.get("current_noise", c.current_noise);
  cb.get("threshold_margin", c.threshold_margin);
  cb.finish();

  Section st = top.section("stand");
  st.get("duration", spec.stand.duration);
  st.get("dt", spec.stand.dt);
  st.get("leg_length", spec.stand.leg_length);
  st.finish();

  detail::read_plan(top.section("plan"), spec.plan);
  if (spec.plan.kind == PlanKind::file && !base_dir.empty() && !spec.plan.file.empty() && spec.plan.file[0] != '/') {
    spec.plan.file = base_dir + "/" + spec.plan.file;
  }

  Section cs = top.section("comms_soak");
  cs.get("frames", spec.comms.frames);
  cs.get("fuzz_frames", spec.comms.fuzz_frames);
  cs.get("rate", spec.comms.rate);
  cs.finish();

  top.finish();
  return spec;
}

inline ExperimentSpec parse_config(const std::string& yaml, const CliOverrides& cli = {},
                                   const std::string& base_dir = "") {
  YAML::Node root;
  try {
    root = YAML::Load(yaml);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(e.msg, e.mark.line >= 0 ? e.mark.line + 1 : -1);
  }
  return build_spec(root, cli, base_dir);
}

inline ExperimentSpec load_config(const std::string& path, const CliOverrides& cli = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const auto slash = path.find_last_of('/');
  return parse_config(buf.str(), cli, slash == std::string::npos ? "" : path.substr(0, slash));
}

}  // namespace quadctl
