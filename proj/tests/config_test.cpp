#include <quadctl/config.hpp>

#include <gtest/gtest.h>

#include <filesystem>

namespace quadctl {
namespace {

int error_line(const std::string& yaml, const CliOverrides& cli = {}) {
  try {
    parse_config(yaml, cli);
  } catch (const ConfigError& e) {
    return e.line();
  }
  return 0;
}

std::string error_text(const std::string& yaml) {
  try {
    parse_config(yaml);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

TEST(Config, EmptyDocumentGivesDefaults) {
  const ExperimentSpec s = parse_config("");
  EXPECT_EQ(s.kind, ExperimentKind::stand);
  EXPECT_EQ(s.preset, "ideal");
  EXPECT_EQ(s.seed, 1u);
  EXPECT_TRUE(s.out.empty());
  EXPECT_FALSE(s.quadruped.channel.has_value());
  EXPECT_TRUE(s.rig.leg.rigid_transmission());
}

TEST(Config, ReadsNestedSections) {
  const ExperimentSpec s = parse_config(R"(
experiment: track_plan
seed: 42
out: results/x
quadruped:
  mass: 2.5
  terrain: {kind: step, step_x: 0.1, step_height: 0.02}
controller:
  com_stiffness: [100, 110, 120]
  contact_rule: plan_only
  friction_constraints: symmetric
plan:
  kind: sinusoid
  sinusoid: {amplitude: [0.01, 0.0, 0.03], frequency: 1.5}
drop: {stiffness: 90, hysteresis_bins: 5}
jump: {kp: [10, 11]}
quasi_static: {stiffness: [50, 100]}
comms_soak: {frames: 2000}
)");
  EXPECT_EQ(s.kind, ExperimentKind::track_plan);
  EXPECT_EQ(s.seed, 42u);
  EXPECT_EQ(s.out, "results/x");
  EXPECT_EQ(s.quadruped.sim.model.mass, 2.5);
  EXPECT_EQ(s.quadruped.sim.ground.terrain.kind, HeightField::Kind::step);
  EXPECT_EQ(s.quadruped.sim.ground.terrain.step_height, 0.02);
  EXPECT_EQ(s.quadruped.controller.wrench.com_stiffness(2, 2), 120.0);
  EXPECT_EQ(s.quadruped.controller.wrench.com_stiffness(0, 1), 0.0);
  EXPECT_EQ(s.quadruped.controller.contact_rule, ContactRule::plan_only);
  EXPECT_EQ(s.quadruped.controller.allocation.friction, FrictionConstraints::symmetric);
  EXPECT_EQ(s.plan.kind, PlanKind::sinusoid);
  EXPECT_EQ(s.plan.sinusoid.amplitude, Vec3(0.01, 0.0, 0.03));
  EXPECT_EQ(s.plan.sinusoid.frequency, 1.5);
  EXPECT_EQ(s.drop.stiffness, 90.0);
  EXPECT_EQ(s.drop.hysteresis_bins, 5);
  EXPECT_EQ(s.leg_jump.kp, Vec2(10.0, 11.0));
  EXPECT_EQ(s.quasi_static.stiffness, (std::vector<double>{50.0, 100.0}));
  EXPECT_EQ(s.comms.frames, 2000);
}

TEST(Config, PresetFirstThenLegOverrides) {
  const ExperimentSpec s = parse_config("preset: friction\nleg:\n  max_current: 10\n  carried_mass: 0.8\n");
  EXPECT_EQ(s.rig.leg.joint_friction_coulomb, kPresetJointFriction);
  EXPECT_EQ(s.rig.leg.max_current, 10.0);
  EXPECT_EQ(s.rig.carried_mass, 0.8);
  EXPECT_EQ(s.quadruped.sim.model.leg.max_current, 10.0);
  const ExperimentSpec h = parse_config("preset: hardware\nleg: {transmission_stiffness: .inf}\n");
  EXPECT_TRUE(h.rig.leg.rigid_transmission());
  EXPECT_EQ(h.rig.leg.joint_friction_coulomb, kPresetJointFriction);
}

TEST(Config, CommandLineBeatsFile) {
  CliOverrides cli;
  cli.experiment = "drop";
  cli.preset = "flexible";
  cli.seed = 9;
  cli.out = "elsewhere";
  const ExperimentSpec s = parse_config("experiment: stand\npreset: ideal\nseed: 3\nout: here\n", cli);
  EXPECT_EQ(s.kind, ExperimentKind::drop);
  EXPECT_EQ(s.preset, "flexible");
  EXPECT_FALSE(s.rig.leg.rigid_transmission());
  EXPECT_EQ(s.seed, 9u);
  EXPECT_EQ(s.out, "elsewhere");
  // A bad file value is still reported even when the flag would replace it.
  EXPECT_EQ(error_line("experiment: walk\n", {}), 1);
  EXPECT_EQ(error_line("experiment: walk\n", cli), 0);
  cli.experiment = "walk";
  EXPECT_EQ(error_line("", cli), -1);
}

TEST(Config, ChannelSectionAndSensorSection) {
  const ExperimentSpec s = parse_config(R"(
channel: {rtt_mean_us: 500, rtt_jitter_us: 100, loss_probability: 0.01}
sensor: {trigger_force: 2.5}
)");
  ASSERT_TRUE(s.quadruped.channel.has_value());
  EXPECT_EQ(s.quadruped.channel->rtt_mean_us, 500.0);
  EXPECT_EQ(s.comms_channel.loss_probability, 0.01);
  EXPECT_EQ(s.quadruped.sim.sensor.trigger_force, 2.5);
  EXPECT_EQ(s.contact_bench.sensor.trigger_force, 2.5);
}

TEST(Config, UnknownKeysCarryTheirLine) {
  EXPECT_EQ(error_line("experiment: drop\nseeed: 3\n"), 2);
  EXPECT_EQ(error_line("drop:\n  stiffness: 10\n  stifness: 20\n"), 3);
  EXPECT_EQ(error_line("plan:\n  jump:\n    apex: 0.5\n"), 3);
  EXPECT_EQ(error_line("quadruped:\n  terrain:\n    kind: flat\n    hight: 1\n"), 4);
  EXPECT_NE(error_text("drop:\n  stifness: 20\n").find("drop.stifness"), std::string::npos);
}

TEST(Config, TypeErrorsCarryTheirLine) {
  EXPECT_EQ(error_line("seed: -x\n"), 1);
  EXPECT_EQ(error_line("\n\ndrop:\n  stiffness: soft\n"), 4);
  EXPECT_EQ(error_line("jump:\n  kp: [1, 2, 3]\n"), 2);
  EXPECT_EQ(error_line("controller:\n  contact_rule: maybe\n"), 2);
  EXPECT_EQ(error_line("quasi_static:\n  stiffness: {a: 1}\n"), 2);
  EXPECT_EQ(error_line("drop: 5\n"), 1);
  EXPECT_EQ(error_line("- a\n- b\n"), 1);
  EXPECT_NE(error_text("drop:\n  stiffness: soft\n").find("must be a number"), std::string::npos);
}

TEST(Config, SyntaxErrorsCarryTheirLine) {
  EXPECT_EQ(error_line("experiment: drop\ndrop:\n  stiffness: [1, 2\n"), 4);
  EXPECT_EQ(error_line("a: b\n  c: d\n"), 2);
}

TEST(Config, UnknownPresetAndPlanFile) {
  EXPECT_EQ(error_line("\npreset: carbon\n"), 2);
  EXPECT_THROW(parse_config("plan: {kind: file}\n"), ConfigError);
  const ExperimentSpec s = parse_config("plan: {kind: file, file: p.csv}\n", {}, "/data");
  EXPECT_EQ(s.plan.file, "/data/p.csv");
}

TEST(Config, ShippedScenariosParse) {
  int files = 0;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(QUADCTL_SOURCE_DIR "/config")) {
    if (entry.path().extension() != ".yaml") continue;
    ++files;
    EXPECT_NO_THROW(load_config(entry.path().string())) << entry.path();
  }
  EXPECT_GE(files, 10);
}

}  // namespace
}  // namespace quadctl
