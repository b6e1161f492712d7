#include "mhlti/report.hpp"

#include "mhlti/errors.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace mhlti {

namespace {

using nlohmann::json;

std::string full(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

json row_json(const SweepRow& r) {
  return {{"T", r.T},         {"eta", r.eta}, {"alpha", r.alpha}, {"beta", r.beta},
          {"pi0", r.pi0},     {"pi1", r.pi1}, {"cost", r.cost}};
}

SweepRow row_from_json(const json& j) {
  return {j.at("T").get<int>(),      j.at("eta").get<double>(), j.at("alpha").get<double>(),
          j.at("beta").get<double>(), j.at("pi0").get<double>(), j.at("pi1").get<double>(),
          j.at("cost").get<double>()};
}

json estimate_json(const Estimate& e) { return {{"value", e.value}, {"std_error", e.std_error}}; }

}  // namespace

void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& out) {
  out << kSweepHeader << '\n';
  for (const auto& r : rows) {
    out << r.T << ',' << full(r.eta) << ',' << full(r.alpha) << ',' << full(r.beta) << ','
        << full(r.pi0) << ',' << full(r.pi1) << ',' << full(r.cost) << '\n';
  }
}

void emit_sweep(const std::vector<SweepRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  write_sweep_csv(rows, out);
  out.flush();
  if (!out) fail(ErrorKind::Io, "write failed for " + path.string());
}

json solution_to_json(const ContractSolution& sol) {
  json sweep = json::array();
  for (const auto& r : sol.sweep) sweep.push_back(row_json(r));
  return {{"T_star", sol.T_star},
          {"eta_star", sol.eta_star},
          {"pi0", sol.pi0},
          {"pi1", sol.pi1},
          {"alpha", sol.alpha},
          {"beta", sol.beta},
          {"expected_cost", sol.expected_cost},
          {"liability_mode", to_string(sol.liability)},
          {"sweep", sweep}};
}

ContractSolution solution_from_json(const json& j) {
  try {
    ContractSolution sol;
    sol.T_star = j.at("T_star").get<int>();
    sol.eta_star = j.at("eta_star").get<double>();
    sol.pi0 = j.at("pi0").get<double>();
    sol.pi1 = j.at("pi1").get<double>();
    sol.alpha = j.at("alpha").get<double>();
    sol.beta = j.at("beta").get<double>();
    sol.expected_cost = j.at("expected_cost").get<double>();
    const auto mode = j.at("liability_mode").get<std::string>();
    if (mode != "limited" && mode != "general") fail(ErrorKind::ConfigInvalid, "liability_mode: unknown value");
    sol.liability = mode == "limited" ? LiabilityMode::Limited : LiabilityMode::General;
    if (j.contains("sweep")) {
      for (const auto& r : j.at("sweep")) sol.sweep.push_back(row_from_json(r));
    }
    return sol;
  } catch (const json::exception& e) {
    fail(ErrorKind::ConfigInvalid, std::string("solution: ") + e.what());
  }
}

json validation_to_json(const McValidation& v) {
  return {{"samples", v.samples},
          {"seed", v.seed},
          {"alpha", {{"analytic", v.alpha}, {"empirical", estimate_json(v.empirical.alpha)}, {"agrees", v.alpha_agrees}}},
          {"beta", {{"analytic", v.beta}, {"empirical", estimate_json(v.empirical.beta)}, {"agrees", v.beta_agrees}}},
          {"incentive_compatibility",
           {{"cost_low", v.ic.cost_low},
            {"cost_high", v.ic.cost_high},
            {"difference", v.ic.difference},
            {"std_error", v.ic.std_error},
            {"high_effort_preferred", v.ic.high_effort_preferred}}}};
}

json report_to_json(const RunReport& report) {
  json j;
  j["cost_gap"] = report.cost_gap;
  j["J1P"] = report.J1P;
  if (report.solution) j["solution"] = solution_to_json(*report.solution);
  if (report.constraints) {
    const auto& c = *report.constraints;
    j["constraints"] = {{"delta", c.delta},
                        {"ic_slack", c.ic_slack},
                        {"participation_slack", c.participation_slack},
                        {"satisfied", c.satisfied}};
  }
  if (report.induce_effort) j["induce_effort"] = *report.induce_effort;
  if (report.validation) j["validation"] = validation_to_json(*report.validation);
  json timing = json::object();
  for (const auto& [stage, seconds] : report.timings) timing[stage] = seconds;
  j["timing_seconds"] = timing;
  return j;
}

std::string summarize(const RunReport& report) {
  std::ostringstream os;
  if (!report.solution) {
    os << "no feasible contract\n";
    return os.str();
  }
  const auto& s = *report.solution;
  os << "liability        " << to_string(s.liability) << '\n'
     << "T*               " << s.T_star << '\n'
     << "eta*             " << full(s.eta_star) << '\n'
     << "pi0*, pi1*       " << full(s.pi0) << ", " << full(s.pi1) << '\n'
     << "alpha, beta      " << full(s.alpha) << ", " << full(s.beta) << '\n'
     << "expected cost    " << full(s.expected_cost) << '\n';
  if (report.constraints) {
    os << "IC slack         " << report.constraints->ic_slack << '\n'
       << "participation    " << report.constraints->participation_slack << '\n';
  }
  if (report.induce_effort) os << "induce effort    " << (*report.induce_effort ? "yes" : "no") << '\n';
  if (report.validation) {
    const auto& v = *report.validation;
    os << "MC alpha         " << v.empirical.alpha.value << " +- " << v.empirical.alpha.std_error
       << (v.alpha_agrees ? " (agrees)" : " (DISAGREES)") << '\n'
       << "MC beta          " << v.empirical.beta.value << " +- " << v.empirical.beta.std_error
       << (v.beta_agrees ? " (agrees)" : " (DISAGREES)") << '\n'
       << "IC experiment    high - low = " << v.ic.difference << " +- " << v.ic.std_error
       << (v.ic.high_effort_preferred ? " (high effort preferred)" : " (low effort preferred)") << '\n';
  }
  for (const auto& [stage, seconds] : report.timings) os << "time " << stage << ": " << seconds << " s\n";
  return os.str();
}

}  // namespace mhlti
