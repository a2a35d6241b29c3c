// quadctl: runs characterization and tracking scenarios and generates plans.

#include <quadctl/config.hpp>

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using namespace quadctl;

namespace {

constexpr int kExitFail = 1;
constexpr int kExitConfig = 2;

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << content;
}

int run_command(const std::string& config, const CliOverrides& cli) {
  ExperimentSpec spec;
  try {
    spec = config.empty() ? parse_config("", cli) : load_config(config, cli);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  ExperimentReport report;
  try {
    report = run_experiment(spec);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid parameters: " << e.what() << '\n';
    return kExitConfig;
  }
  print_summary(std::cout, report);
  if (!spec.out.empty()) {
    fs::create_directories(spec.out);
    for (const auto& [name, content] : report.files) write_file(fs::path(spec.out) / name, content);
    std::cout << "wrote " << report.files.size() << " files to " << spec.out << '\n';
  }
  return report.passed() ? 0 : kExitFail;
}

int gen_plan_command(const std::string& config, const std::string& kind, const std::string& out,
                     std::optional<double> apex, std::optional<double> duration) {
  ExperimentSpec spec;
  try {
    spec = config.empty() ? parse_config("") : load_config(config);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  PlanSource src = spec.plan;
  if (!kind.empty()) {
    const auto k = detail::parse_plan_kind(kind);
    if (!k || *k == PlanKind::file) {
      std::cerr << "unknown plan kind '" << kind << "' (stand, sinusoid, jump)\n";
      return kExitConfig;
    }
    src.kind = *k;
  }
  if (apex) src.jump.apex_height = *apex;
  if (duration) {
    src.stand.duration = *duration;
    src.sinusoid.duration = *duration;
  }
  std::vector<PlanWarning> warnings;
  Plan plan;
  try {
    plan = load_plan(src, spec.quadruped.sim.model, &warnings);
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid plan parameters: " << e.what() << '\n';
    return kExitConfig;
  }
  if (!warnings.empty()) {
    std::cerr << "warning: t=" << warnings.front().time << " s: " << warnings.front().message;
    if (warnings.size() > 1) std::cerr << " (" << warnings.size() - 1 << " more samples)";
    std::cerr << '\n';
  }
  std::ostringstream csv;
  write_plan_csv(csv, plan);
  if (out.empty() || out == "-") {
    std::cout << csv.str();
  } else {
    write_file(out, csv.str());
    std::cerr << "wrote " << plan.size() << " samples to " << out << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quadruped leg and centroidal control simulator"};
  app.require_subcommand(1);

  CLI::App* run = app.add_subcommand("run", "Run an experiment and print its summary");
  std::string config;
  std::string experiment, preset, out;
  std::uint64_t seed = 0;
  run->add_option("--config", config, "YAML scenario file")->check(CLI::ExistingFile);
  auto* exp_opt = run->add_option("--experiment", experiment,
                                  "quasi_static, drop, jump, contact_bench, stand, track_plan or comms_soak");
  auto* preset_opt = run->add_option("--preset", preset, "ideal, friction, flexible, hardware, ethernet or wifi");
  auto* seed_opt = run->add_option("--seed", seed, "random seed");
  auto* out_opt = run->add_option("--out", out, "directory for CSV outputs");

  CLI::App* gen = app.add_subcommand("gen-plan", "Write a centroidal reference plan as CSV");
  std::string gen_config, kind, gen_out;
  double apex = 0.0, duration = 0.0;
  gen->add_option("--config", gen_config, "YAML file whose plan section supplies the parameters")
      ->check(CLI::ExistingFile);
  gen->add_option("--kind", kind, "stand, sinusoid or jump");
  gen->add_option("--out", gen_out, "output CSV path, '-' for stdout");
  auto* apex_opt = gen->add_option("--apex", apex, "jump apex CoM height, m");
  auto* duration_opt = gen->add_option("--duration", duration, "stand or sinusoid duration, s");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      CliOverrides cli;
      if (*exp_opt) cli.experiment = experiment;
      if (*preset_opt) cli.preset = preset;
      if (*seed_opt) cli.seed = seed;
      if (*out_opt) cli.out = out;
      return run_command(config, cli);
    }
    return gen_plan_command(gen_config, kind, gen_out, *apex_opt ? std::optional(apex) : std::nullopt,
                            *duration_opt ? std::optional(duration) : std::nullopt);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFail;
  }
}
