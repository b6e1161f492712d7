#pragma once

// Machine-readable outputs: the per-horizon sweep as CSV and the run report
// as JSON.

#include "mhlti/contract_designer.hpp"
#include "mhlti/mc_oracle.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace mhlti {

inline constexpr const char* kSweepHeader = "T,eta_star,alpha,beta,pi0,pi1,expected_cost";

struct RunReport {
  std::optional<ContractSolution> solution;
  double cost_gap = 0.0;
  double J1P = 0.0;
  std::optional<ConstraintReport> constraints;
  std::optional<bool> induce_effort;
  std::optional<McValidation> validation;
  std::vector<std::pair<std::string, double>> timings;  // stage, seconds
};

/// Header plus one row per sweep entry, 17 significant digits, LF newlines.
void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& out);

/// Writes the CSV to `path`; throws Io on failure.
void emit_sweep(const std::vector<SweepRow>& rows, const std::filesystem::path& path);

nlohmann::json solution_to_json(const ContractSolution& sol);
ContractSolution solution_from_json(const nlohmann::json& j);

nlohmann::json validation_to_json(const McValidation& v);
nlohmann::json report_to_json(const RunReport& report);

/// Short human-readable summary.
std::string summarize(const RunReport& report);

}  // namespace mhlti
