#include "mhlti/config.hpp"
#include "mhlti/contract_designer.hpp"
#include "mhlti/errors.hpp"
#include "mhlti/mc_oracle.hpp"
#include "mhlti/report.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using namespace mhlti;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitNumerical = 4;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NoFeasibleContract:
    case ErrorKind::NoFeasibleThreshold:
    case ErrorKind::DegenerateSeparation:
    case ErrorKind::UtilityDomain:
      return kExitInfeasible;
    case ErrorKind::SingularCovariance:
    case ErrorKind::EigenFailure:
    case ErrorKind::QuadratureFailure:
      return kExitNumerical;
    default:
      return kExitConfig;
  }
}

// Rethrows inner failures with the stage name prefixed.
template <class F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(e.kind(), std::string("[") + name + "] " + e.what());
  }
}

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

struct Options {
  std::string config;
  std::string output;
  std::string solution;
  std::uint64_t seed = 1;
  std::size_t validate = 0;
  std::optional<int> t_max;
  std::optional<std::string> liability;
};

DesignConfig load(const Options& o) {
  return stage("config", [&] {
    DesignConfig cfg = load_config(o.config);
    if (o.t_max) cfg.T_max = *o.t_max;
    if (o.liability) cfg.liability = *o.liability == "general" ? LiabilityMode::General : LiabilityMode::Limited;
    cfg.validate();
    return cfg;
  });
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out << text;
}

fs::path output_dir(const Options& o) {
  const fs::path dir = o.output.empty() ? fs::path(".") : fs::path(o.output);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
  return dir;
}

int run_design(const Options& o, bool full_report) {
  const DesignConfig cfg = load(o);
  const fs::path dir = output_dir(o);
  RunReport report;
  Stopwatch clock;

  const SearchContext ctx = stage("costs", [&] { return make_context(cfg); });
  report.cost_gap = ctx.cost_gap;
  report.J1P = ctx.J1P;
  report.timings.emplace_back("costs", clock.lap());

  try {
    report.solution = stage("design", [&] { return design_contract(cfg); });
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::NoFeasibleContract) throw;
    emit_sweep({}, dir / "sweep.csv");
    std::cerr << "mhlti: " << e.what() << '\n';
    return kExitInfeasible;
  }
  report.timings.emplace_back("design", clock.lap());
  const auto& sol = *report.solution;
  emit_sweep(sol.sweep, dir / "sweep.csv");
  if (!full_report) {
    std::cout << "T* = " << sol.T_star << ", expected cost = " << sol.expected_cost << '\n'
              << "wrote " << (dir / "sweep.csv").string() << '\n';
    return kExitOk;
  }

  report.constraints = verify_constraints(sol, ctx.cost_gap, ctx.gamma_a, cfg.utility);
  if (const auto costs = principal_costs(cfg)) {
    report.induce_effort = induce_effort(sol, costs->first, costs->second, ctx.gamma_p);
  }
  if (o.validate > 0) {
    report.validation = stage("validate", [&] { return validate_row(cfg, sol.optimum(), o.validate, o.seed); });
    report.timings.emplace_back("validate", clock.lap());
  }
  write_text(dir / "solution.json", solution_to_json(sol).dump(2) + "\n");
  write_text(dir / "report.json", report_to_json(report).dump(2) + "\n");
  std::cout << summarize(report);
  return kExitOk;
}

int run_validate(const Options& o) {
  const DesignConfig cfg = load(o);
  std::ifstream in(o.solution);
  if (!in) fail(ErrorKind::Io, "cannot read solution " + o.solution);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::ConfigParse, o.solution + ": " + e.what());
  }
  const ContractSolution sol = solution_from_json(j);
  const std::size_t n = o.validate > 0 ? o.validate : kMcDefaultSamples;
  RunReport report;
  report.solution = sol;
  Stopwatch clock;
  report.validation = stage("validate", [&] { return validate_row(cfg, sol.optimum(), n, o.seed); });
  report.timings.emplace_back("validate", clock.lap());
  if (!o.output.empty()) {
    write_text(output_dir(o) / "validation.json", validation_to_json(*report.validation).dump(2) + "\n");
  }
  std::cout << summarize(report);
  const auto& v = *report.validation;
  return v.alpha_agrees && v.beta_agrees && v.ic.high_effort_preferred ? kExitOk : kExitNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimal two-level incentive contracts for stochastic LTI systems"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "Design configuration (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--output", o.output, "Output directory");
    sub->add_option("--seed", o.seed, "Master seed for Monte Carlo validation");
    sub->add_option("--t-max", o.t_max, "Override search.T_max")->check(CLI::PositiveNumber);
    sub->add_option("--liability", o.liability, "Override search.liability_mode")
        ->check(CLI::IsMember({"limited", "general"}));
  };
  auto* design = app.add_subcommand("design", "Design the contract and write report, solution and sweep");
  add_common(design);
  design->add_option("--validate", o.validate, "Monte Carlo samples for validating the optimum (0 = off)");
  auto* sweep = app.add_subcommand("sweep", "Design the contract and write the sweep CSV only");
  add_common(sweep);
  auto* validate = app.add_subcommand("validate", "Monte Carlo validation of a saved solution");
  add_common(validate);
  validate->add_option("--solution", o.solution, "solution.json from a design run")
      ->required()
      ->check(CLI::ExistingFile);
  validate->add_option("--validate", o.validate, "Monte Carlo samples");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (design->parsed()) return run_design(o, true);
    if (sweep->parsed()) return run_design(o, false);
    return run_validate(o);
  } catch (const Error& e) {
    std::cerr << "mhlti: " << to_string(e.kind()) << ": " << e.what() << '\n';
    return exit_code(e.kind());
  }
}
