#include <quadctl/experiments.hpp>

#include <gtest/gtest.h>

#include <filesystem>

namespace quadctl {
namespace {

const SummaryRow* find(const ExperimentReport& r, const std::string& metric) {
  for (const auto& row : r.rows) {
    if (row.metric == metric) return &row;
  }
  return nullptr;
}

TEST(SummaryRow, BandsAreInclusiveAndInfoNeverFails) {
  EXPECT_TRUE((SummaryRow{"a", 1.0, 0.0, 1.0, false}).pass());
  EXPECT_TRUE((SummaryRow{"a", 0.0, 0.0, 0.0, false}).pass());
  EXPECT_FALSE((SummaryRow{"a", 1.0 + 1e-12, 0.0, 1.0, false}).pass());
  EXPECT_FALSE((SummaryRow{"a", std::nan(""), 0.0, 1.0, false}).pass());
  EXPECT_TRUE((SummaryRow{"a", 1e9, 0.0, 1.0, true}).pass());
}

TEST(SummaryRow, CsvAndPrintedTable) {
  ExperimentReport r;
  r.experiment = "x";
  r.check("ok", 0.5, 0.0, 1.0);
  r.check("bad", 2.0, -kInf, 1.0);
  r.info("note", 7.0);
  EXPECT_FALSE(r.passed());
  EXPECT_EQ(summary_csv(r), "metric,value,lo,hi,status\nok,0.5,0,1,pass\nbad,2,-inf,1,fail\nnote,7,-inf,inf,info\n");
  std::ostringstream out;
  print_summary(out, r);
  EXPECT_NE(out.str().find("<= 1"), std::string::npos);
  EXPECT_NE(out.str().find("FAIL\n"), std::string::npos);
}

TEST(ExperimentKind, NamesRoundTrip) {
  for (ExperimentKind k : kExperimentKinds) EXPECT_EQ(parse_experiment_kind(to_string(k)), k);
  EXPECT_FALSE(parse_experiment_kind("walk").has_value());
  EXPECT_TRUE(channel_preset("wifi").has_value());
  EXPECT_FALSE(channel_preset("ideal").has_value());
}

TEST(Experiments, QuasiStaticIdealHasEighteenCheckedValues) {
  ExperimentSpec s;
  s.kind = ExperimentKind::quasi_static;
  const ExperimentReport r = run_experiment(s);
  int checked = 0;
  for (const auto& row : r.rows) checked += (row.metric.rfind("regressed_K", 0) == 0 && !row.informational) ? 1 : 0;
  EXPECT_EQ(checked, 18);
  EXPECT_TRUE(r.passed());
  EXPECT_EQ(r.files.count("quasi_static_trace.csv"), 1u);
}

TEST(Experiments, ContactBenchGridTable) {
  ExperimentSpec s;
  s.kind = ExperimentKind::contact_bench;
  const ExperimentReport r = run_experiment(s);
  const std::string& table = r.files.at("contact_bench.csv");
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 7);
  ASSERT_NE(find(r, "sensor_delay_ms_L0.3_K300"), nullptr);
  EXPECT_TRUE(r.passed());
}

TEST(Experiments, ReproducibleFromSpecAndSeed) {
  ExperimentSpec s;
  s.kind = ExperimentKind::stand;
  s.preset = "wifi";
  s.seed = 5;
  s.quadruped.duration = 0.5;
  s.stand.duration = 0.5;
  const ExperimentReport a = run_experiment(s);
  const ExperimentReport b = run_experiment(s);
  EXPECT_EQ(a.files, b.files);
  s.seed = 6;
  const ExperimentReport c = run_experiment(s);
  EXPECT_NE(a.files.at("stand_trace.csv"), c.files.at("stand_trace.csv"));
}

TEST(Experiments, CommsSoakOnCleanLink) {
  CommsSoakSettings st;
  st.frames = 20000;
  st.fuzz_frames = 500;
  const CommsSoakResult r = comms_soak(ChannelModel::ethernet(), st, 3);
  EXPECT_EQ(r.stats.sent, 20000u);
  EXPECT_EQ(r.stats.delivered, 20000u);
  EXPECT_EQ(r.order_violations, 0);
  EXPECT_EQ(r.duplicates, 0);
  EXPECT_EQ(r.delay_violations, 0);
  EXPECT_EQ(r.fuzz_mismatches, 0);
  EXPECT_EQ(r.corrupted_accepted, 0);
  EXPECT_EQ(r.gate_violations, 0);
}

TEST(Experiments, CommsSoakSeesReordering) {
  // Jitter far above the frame period on a reordering link must show up.
  CommsSoakSettings st;
  st.frames = 5000;
  st.fuzz_frames = 10;
  st.rate = 10000.0;
  const ChannelModel m{1100.0, 1000.0, 0.0, true};
  const CommsSoakResult r = comms_soak(m, st, 4);
  EXPECT_GT(r.order_violations, 0);
  EXPECT_EQ(r.delay_violations, 0);
}

TEST(Experiments, TrackPlanFromFileWithoutFlight) {
  const QuadrupedModel model;
  const auto path = std::filesystem::temp_directory_path() / "quadctl_experiments_stand.csv";
  {
    std::ofstream out(path);
    write_plan_csv(out, stand_plan(model, {1.0, 1e-3, 0.24}).plan);
  }
  ExperimentSpec s;
  s.kind = ExperimentKind::track_plan;
  s.plan.kind = PlanKind::file;
  s.plan.file = path.string();
  const ExperimentReport r = run_experiment(s);
  EXPECT_TRUE(r.passed());
  EXPECT_EQ(find(r, "flights"), nullptr);
  EXPECT_LT(find(r, "tracking_rmse_m")->value, 1e-3);
  std::filesystem::remove(path);
  s.plan.file = path.string();
  EXPECT_THROW(run_experiment(s), ConfigError);
}

TEST(Experiments, LegJumpCountsOnlyPushCycles) {
  for (ModelPreset p : {ModelPreset::ideal, ModelPreset::hardware}) {
    const JumpSettings st;
    const JumpResult r = jump_experiment(rig_preset(p), st);
    int powered = 0;
    for (const auto& f : r.flights) {
      if (!f.powered) continue;
      ++powered;
      EXPECT_LT(f.liftoff_time, st.settle_time + st.cycles * st.period);
    }
    EXPECT_LE(powered, st.cycles + 1) << to_string(p);
    ExperimentSpec s;
    s.kind = ExperimentKind::jump;
    s.preset = to_string(p);
    s.rig = rig_preset(p);
    EXPECT_TRUE(run_experiment(s).passed()) << to_string(p);
  }
}

TEST(Experiments, SafeStopWhenTheLinkDies) {
  ExperimentSpec s;
  s.kind = ExperimentKind::comms_soak;
  s.comms.frames = 10000;
  s.comms.fuzz_frames = 100;
  s.comms_channel = ChannelModel::ethernet();
  const ExperimentReport r = run_experiment(s);
  const SummaryRow* stop = find(r, "safe_stop_after_ms");
  ASSERT_NE(stop, nullptr);
  EXPECT_TRUE(stop->pass()) << stop->value;
  EXPECT_EQ(find(r, "loss_rate")->value, 0.0);
}

}  // namespace
}  // namespace quadctl
