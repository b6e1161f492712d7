#pragma once

// Two-level contracts: pay pi_1 when LLR(Y_T) >= eta, pi_0 otherwise.
// With alpha = P[LLR >= eta | H0] and beta = P[LLR >= eta | H1], the
// principal's expected cost is
//
//   J(T, eta) = J^P_1 + gamma_p^T (pi_0 (1 - beta) + pi_1 beta),
//
// and the design is two nested line searches: eta for every T, then T.

#include "mhlti/execution.hpp"
#include "mhlti/gchi2_dist.hpp"
#include "mhlti/llr_engine.hpp"
#include "mhlti/system_model.hpp"

#include <optional>
#include <string>
#include <vector>

namespace mhlti {

inline constexpr double kTolSep = 1e-8;
inline constexpr double kTolConstraint = 1e-6;

enum class LiabilityMode { Limited, General };

std::string to_string(LiabilityMode mode);

struct Payments {
  double pi0 = 0.0;
  double pi1 = 0.0;
};

struct SweepRow {
  int T = 0;
  double eta = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double pi0 = 0.0;
  double pi1 = 0.0;
  double cost = 0.0;
};

struct ContractSolution {
  int T_star = 0;
  double eta_star = 0.0;
  double pi0 = 0.0;
  double pi1 = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double expected_cost = 0.0;
  LiabilityMode liability = LiabilityMode::Limited;
  std::vector<SweepRow> sweep;  // feasible horizons only, ascending T

  [[nodiscard]] SweepRow optimum() const {
    return {T_star, eta_star, alpha, beta, pi0, pi1, expected_cost};
  }
};

struct Tolerances {
  double sep = kTolSep;
  double cdf = kTolCdf;
};

struct DesignConfig {
  LtiSystem system;
  FeedbackController low;
  FeedbackController high;
  AgentCostSpec agent;
  PrincipalCostSpec principal;
  UtilityFunction utility = UtilityFunction::sqrt();
  int T_max = 1;
  int eta_grid_size = 512;
  LiabilityMode liability = LiabilityMode::Limited;
  Tolerances tol;

  /// Throws ConfigInvalid naming the offending field.
  void validate() const;
};

/// Scalars the threshold search needs, resolved once from a DesignConfig.
struct SearchContext {
  double cost_gap = 0.0;
  double gamma_a = 0.0;
  double gamma_p = 0.0;
  double J1P = 0.0;
  UtilityFunction utility = UtilityFunction::sqrt();
  LiabilityMode liability = LiabilityMode::Limited;
  int eta_grid_size = 512;
  double tol_sep = kTolSep;
};

/// Resolves the cost gap (override or computed) and J^P_1 (override,
/// computed from Q/q when given, else 0).
SearchContext make_context(const DesignConfig& config);

/// (J^P_0, J^P_1) when the config supplies them, directly or through Q/q.
std::optional<std::pair<double, double>> principal_costs(const DesignConfig& config);

/// gamma_a^{-T} cost_gap / (u_pi1 - u_pi0).
double delta_constant(int T, double cost_gap, double gamma_a, double u_pi0, double u_pi1);

/// Both constraints binding: pi_0 = U^{-1}(-c alpha/(beta-alpha)),
/// pi_1 = U^{-1}(c (1-alpha)/(beta-alpha)), c = gamma_a^{-T} cost_gap.
Payments optimal_payments(int T, double alpha, double beta, double cost_gap, double gamma_a,
                          const UtilityFunction& utility, double tol_sep = kTolSep);

/// pi_0 = 0, pi_1 = U^{-1}(c / (beta - alpha)).
Payments limited_liability_payments(int T, double alpha, double beta, double cost_gap,
                                    double gamma_a, const UtilityFunction& utility,
                                    double tol_sep = kTolSep);

double principal_objective(int T, double pi0, double pi1, double beta, double gamma_p, double J1P);

/// J(T, eta) for given alpha, beta; nullopt when the payments are undefined.
std::optional<SweepRow> evaluate_threshold(int T, double eta, double alpha, double beta,
                                           const SearchContext& ctx);

/// Uniform grid of ctx.eta_grid_size thresholds over the union of both
/// laws' quantile brackets.
std::vector<double> eta_grid(const SurvivalEvaluator& s0, const SurvivalEvaluator& s1,
                             int grid_size);

/// Minimizes J(T, eta) over the grid, then golden-section refines around the
/// best grid point. Ties go to the smallest eta. Throws NoFeasibleThreshold.
SweepRow threshold_search(int T, const SurvivalEvaluator& s0, const SurvivalEvaluator& s1,
                          const SearchContext& ctx);
SweepRow threshold_search(int T, const GChi2Law& law0, const GChi2Law& law1,
                          const SearchContext& ctx, double tol_cdf = kTolCdf);

/// Full design over T = 1..T_max. The parallel path distributes horizons
/// over threads; both paths return identical solutions. Throws
/// NoFeasibleContract.
ContractSolution design_contract(const DesignConfig& config, Execution exec = Execution::Parallel);

struct ConstraintReport {
  double delta = 0.0;
  double ic_slack = 0.0;             // beta - delta - alpha
  double participation_slack = 0.0;  // beta - delta + U(pi0)/(U(pi1)-U(pi0))
  bool satisfied = false;            // both slacks >= -kTolConstraint
};

ConstraintReport verify_constraints(const SweepRow& row, double cost_gap, double gamma_a,
                                    const UtilityFunction& utility);
ConstraintReport verify_constraints(const ContractSolution& sol, double cost_gap, double gamma_a,
                                    const UtilityFunction& utility);

/// J1P + gamma_p^{T*} (pi0 (1 - beta) + pi1 beta) <= J0P.
bool induce_effort(const ContractSolution& sol, double J0P, double J1P, double gamma_p);

}  // namespace mhlti
