// Acceptance suite: one line per criterion, nonzero exit if any fails.

#include <quadctl/experiments.hpp>
#include <quadctl/qp_oracle.hpp>

#include "random_qp.hpp"

#include <chrono>
#include <functional>
#include <iostream>

using namespace quadctl;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += (ok ? "" : "FAILED ") + what;
  }
};

std::string num(double v) {
  std::ostringstream s;
  s << std::setprecision(4) << v;
  return s.str();
}

Outcome from_report(const ExperimentReport& r, std::initializer_list<const char*> shown) {
  Outcome o;
  for (const SummaryRow& row : r.rows) {
    if (!row.pass()) o.require(false, row.metric + "=" + num(row.value));
  }
  for (const char* name : shown) {
    for (const SummaryRow& row : r.rows) {
      if (row.metric == name) o.require(true, row.metric + "=" + num(row.value));
    }
  }
  return o;
}

void merge(Outcome& into, const Outcome& from, const std::string& label) {
  into.pass = into.pass && from.pass;
  if (!into.detail.empty()) into.detail += " | ";
  into.detail += label + ": " + from.detail;
}

Outcome check_actuator() {
  const LegParams leg;
  Outcome o;
  o.require(torque_from_current(leg, 12.0) == 2.7, "tau(12 A)=" + num(torque_from_current(leg, 12.0)));
  double worst = 0.0;
  for (int k = -120; k <= 120; ++k) {
    const double i = 0.1 * k;
    worst = std::max(worst, std::abs(torque_from_current(leg, i) - 0.225 * i));
  }
  o.require(worst <= 1e-12, "max |tau - 0.225 i| over +-12 A=" + num(worst));
  return o;
}

Outcome check_jacobian() {
  const LegParams leg;
  Rng rng(2);
  double worst = 0.0;
  const double h = 1e-6;
  for (int n = 0; n < 1000; ++n) {
    const Vec2 q(rng.uniform(-kPi, kPi), rng.uniform(-kPi, kPi));
    Mat2 fd;
    for (int j = 0; j < 2; ++j) {
      Vec2 a = q, b = q;
      a[j] += h;
      b[j] -= h;
      fd.col(j) = (forward_kinematics(leg, a) - forward_kinematics(leg, b)) / (2.0 * h);
    }
    worst = std::max(worst, (foot_jacobian(leg, q) - fd).cwiseAbs().maxCoeff());
  }
  Outcome o;
  o.require(worst < 1e-6, "max FD deviation over 1000 configurations=" + num(worst));
  return o;
}

Outcome check_quasi_static() {
  ExperimentSpec ideal;
  ideal.kind = ExperimentKind::quasi_static;
  Outcome o = from_report(run_experiment(ideal), {"envelope_error_max"});
  ExperimentSpec flex = ideal;
  flex.preset = "flexible";
  flex.rig = rig_preset(ModelPreset::flexible);
  const ExperimentReport fr = run_experiment(flex);
  int trend_rows = 0;
  for (const auto& row : fr.rows) trend_rows += row.informational ? 0 : 1;
  Outcome f = from_report(fr, {"regressed_K360"});
  f.require(trend_rows == 11, num(trend_rows) + " values above 150 N/m regress below commanded");
  merge(o, f, "flexible");
  return o;
}

Outcome check_drop() {
  ExperimentSpec ideal;
  ideal.kind = ExperimentKind::drop;
  Outcome o = from_report(run_experiment(ideal), {"settle_force", "regressed_stiffness"});
  ExperimentSpec fr = ideal;
  fr.preset = "friction";
  fr.rig = rig_preset(ModelPreset::friction);
  merge(o, from_report(run_experiment(fr), {"hysteresis_bins_compared", "hysteresis_bins_loading_below"}),
        "friction");
  return o;
}

Outcome check_dimensionless() {
  const double a = dimensionless_stiffness(5250.0, 0.3, 10.0, 9.81);
  const double b = dimensionless_stiffness(16300.0, 1.0, 75.0, 9.81);
  Outcome o;
  o.require(std::abs(a - 16.05) <= 0.01, "k~(5250, 0.3, 10)=" + num(a));
  o.require(std::abs(b - 22.15) <= 0.01, "k~(16300, 1, 75)=" + num(b));
  return o;
}

Outcome check_contact_bench() {
  ExperimentSpec s;
  s.kind = ExperimentKind::contact_bench;
  const ExperimentReport r = run_experiment(s);
  Outcome o = from_report(r, {"mean_sensor_delay_ms", "mean_current_delay_ms", "aggregate_delay_ratio"});
  int traces = 0;
  for (const auto& row : r.rows) traces += row.metric.rfind("sensor_delay_ms_", 0) == 0 ? 1 : 0;
  o.require(traces == 6, num(traces) + " traces");
  return o;
}

Outcome check_qp() {
  Rng rng(7);
  QpSolver solver;
  double worst = 0.0;
  int failures = 0;
  for (int n = 0; n < 1000; ++n) {
    const QpProblem p = testing::random_qp(rng);
    const QpSolution a = solver.solve(p);
    const QpSolution b = oracle_solve(p, 1e-11);
    if (!a.optimal() || !b.optimal()) {
      ++failures;
      continue;
    }
    worst = std::max(worst, (a.z - b.z).norm());
  }
  Outcome o;
  o.require(failures == 0 && worst < 1e-6,
            "max |z - z*| over 1000 instances=" + num(worst) + ", unsolved=" + num(failures));

  double wrench_err = 0.0;
  Rng rw(8);
  for (int n = 0; n < 1000; ++n) {
    std::vector<Vec3> arms;
    const int contacts = 1 + static_cast<int>(rw.uniform() * 4.0);
    for (int i = 0; i < contacts; ++i) {
      arms.emplace_back(rw.uniform(-0.3, 0.3), rw.uniform(-0.2, 0.2), rw.uniform(-0.3, -0.1));
    }
    Vec6 w;
    w << rw.uniform(-10, 10), rw.uniform(-10, 10), rw.uniform(0, 60), rw.uniform(-2, 2), rw.uniform(-2, 2),
        rw.uniform(-1, 1);
    const auto sol = allocate_forces(w, arms, {}, solver);
    wrench_err = std::max(wrench_err, (sol.reconstructed_wrench(arms) - w).cwiseAbs().maxCoeff());
  }
  o.require(wrench_err < 1e-8, "wrench reconstruction=" + num(wrench_err));

  Vec6 weight = Vec6::Zero();
  weight[2] = 21.582;
  const std::vector<Vec3> feet{Vec3(0.19, 0.11, -0.24), Vec3(0.19, -0.11, -0.24), Vec3(-0.19, 0.11, -0.24),
                               Vec3(-0.19, -0.11, -0.24)};
  const auto split = allocate_forces(weight, feet, {}, solver);
  double spread = 0.0;
  for (const Vec3& f : split.forces) {
    spread = std::max({spread, std::abs(f.z() - split.forces[0].z()), std::abs(f.x()), std::abs(f.y())});
  }
  o.require(spread < 1e-8, "four-foot split spread=" + num(spread));
  return o;
}

Outcome check_box_minus() {
  Rng rng(9);
  double worst = 0.0;
  double identity = 0.0;
  for (int n = 0; n < 10000; ++n) {
    const Quat b = Quat(rng.normal(), rng.normal(), rng.normal(), rng.normal()).normalized();
    const Vec3 axis = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
    const Vec3 d = rng.uniform(0.0, kPi - 1e-3) * axis;
    const Quat a = quat_boxplus(b, d);
    worst = std::max(worst, (quat_boxminus(a, b) - d).norm());
    worst = std::max(worst, (quat_log(quat_exp(d)) - d).norm());
    identity = std::max(identity, quat_boxminus(b, b).cwiseAbs().maxCoeff());
  }
  Outcome o;
  o.require(worst < 1e-9, "max exp/log round trip=" + num(worst));
  o.require(identity == 0.0, "identity box-minus=" + num(identity));
  return o;
}

Outcome check_stand() {
  ExperimentSpec s;
  s.kind = ExperimentKind::stand;
  Outcome o = from_report(run_experiment(s), {"com_drift_max_m", "orientation_error_max_deg"});
  s.preset = "wifi";
  merge(o, from_report(run_experiment(s), {"com_drift_max_m", "uplink_loss_rate"}), "wifi");
  return o;
}

Outcome check_jump() {
  ExperimentSpec s;
  s.kind = ExperimentKind::track_plan;
  s.plan.kind = PlanKind::jump;
  return from_report(run_experiment(s),
                     {"apex_error_vs_ballistic", "apex_com_height", "max_commanded_torque", "torque_limit_violations"});
}

Outcome check_bus() {
  ExperimentSpec s;
  s.kind = ExperimentKind::comms_soak;
  s.preset = "wifi";
  return from_report(run_experiment(s), {"loss_rate", "fuzz_mismatches", "safe_stop_after_ms"});
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "actuator torque constant", 1.0, check_actuator},
      {2, "foot Jacobian vs finite differences", 1.0, check_jacobian},
      {3, "quasi-static stiffness sweep", 10.0, check_quasi_static},
      {4, "drop test", 10.0, check_drop},
      {5, "dimensionless stiffness", 1.0, check_dimensionless},
      {6, "contact detection benchmark", 30.0, check_contact_bench},
      {7, "QP solver and force allocation", 30.0, check_qp},
      {8, "box-minus", 1.0, check_box_minus},
      {9, "closed-loop stand", 60.0, check_stand},
      {10, "jump scenario", 60.0, check_jump},
      {11, "bus codec, channel and freshness", 60.0, check_bus},
  };
  int failed = 0;
  for (const Criterion& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    o.require(seconds < c.budget_s, "runtime " + num(seconds) + " s of " + num(c.budget_s) + " s");
    failed += o.pass ? 0 : 1;
    std::cout << "criterion " << std::setw(2) << c.id << " " << (o.pass ? "PASS" : "FAIL") << "  " << c.name
              << "  [" << o.detail << "]" << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
