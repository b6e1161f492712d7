#include "mhlti/contract_designer.hpp"

#include "mhlti/errors.hpp"
#include "mhlti/trajectory_distribution.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <sstream>

namespace mhlti {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void invalid(const std::string& field, const std::string& why) {
  fail(ErrorKind::ConfigInvalid, field + ": " + why);
}

double separation(double alpha, double beta, double tol_sep) {
  const double sep = beta - alpha;
  if (!(sep >= tol_sep)) {
    std::ostringstream os;
    os << "beta - alpha = " << sep << " is below tol_sep = " << tol_sep;
    fail(ErrorKind::DegenerateSeparation, os.str());
  }
  return sep;
}

// Golden-section refinement of J on [a, b]; returns the best point seen.
SweepRow golden_refine(int T, double a, double b, const SurvivalEvaluator& s0,
                       const SurvivalEvaluator& s1, const SearchContext& ctx, SweepRow best) {
  auto eval = [&](double eta) -> std::optional<SweepRow> {
    return evaluate_threshold(T, eta, s0(eta), s1(eta), ctx);
  };
  auto cost_of = [](const std::optional<SweepRow>& r) { return r ? r->cost : kInf; };
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  auto rc = eval(c);
  auto rd = eval(d);
  auto consider = [&](const std::optional<SweepRow>& r) {
    if (r && (r->cost < best.cost || (r->cost == best.cost && r->eta < best.eta))) best = *r;
  };
  consider(rc);
  consider(rd);
  const double scale = std::max({1.0, std::abs(a), std::abs(b)});
  for (int i = 0; i < 100 && (b - a) > 1e-12 * scale; ++i) {
    if (cost_of(rc) <= cost_of(rd)) {
      b = d;
      d = c;
      rd = rc;
      c = b - inv_phi * (b - a);
      rc = eval(c);
      consider(rc);
    } else {
      a = c;
      c = d;
      rc = rd;
      d = a + inv_phi * (b - a);
      rd = eval(d);
      consider(rd);
    }
  }
  return best;
}

std::optional<SweepRow> solve_horizon(int T, const StackedGaussian& full0, const StackedGaussian& full1,
                                      const SearchContext& ctx, double tol_cdf) {
  const auto d0 = full0.truncated(T);
  const auto d1 = full1.truncated(T);
  if (!distinguishable(d0, d1)) return std::nullopt;
  const auto [law0, law1] = decompose_both(d0, d1);
  try {
    return threshold_search(T, law0, law1, ctx, tol_cdf);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::NoFeasibleThreshold) return std::nullopt;
    throw;
  }
}

}  // namespace

std::string to_string(LiabilityMode mode) {
  return mode == LiabilityMode::Limited ? "limited" : "general";
}

void DesignConfig::validate() const {
  const auto n = system.state_dim();
  const auto q = system.input_dim();
  if (low.K.rows() != q || low.K.cols() != n) invalid("controllers.K_low", "must be q x n");
  if (high.K.rows() != q || high.K.cols() != n) invalid("controllers.K_high", "must be q x n");
  if (low.effort != Effort::Low) invalid("controllers.K_low", "must carry the low effort label");
  if (high.effort != Effort::High) invalid("controllers.K_high", "must carry the high effort label");
  if (!(agent.gamma_a > 0.0 && agent.gamma_a < 1.0)) invalid("agent.gamma_a", "must lie in (0, 1)");
  if (!(principal.gamma_p > 0.0 && principal.gamma_p < 1.0)) {
    invalid("principal.gamma_p", "must lie in (0, 1)");
  }
  if (agent.cost_gap_override) {
    if (!(*agent.cost_gap_override > 0.0)) invalid("agent.cost_gap", "must be > 0");
  } else if (agent.R.rows() != q || agent.R.cols() != q || agent.r.size() != q) {
    invalid("agent.R", "R must be q x q and r of length q when cost_gap is absent");
  }
  if (!principal.state_cost_override && principal.Q.size() > 0 &&
      (principal.Q.rows() != n || principal.Q.cols() != n || principal.q_vec.size() != n)) {
    invalid("principal.Q", "Q must be n x n and q of length n");
  }
  if (T_max < 1) invalid("search.T_max", "must be >= 1");
  if (eta_grid_size < 2) invalid("search.eta_grid_size", "must be >= 2");
  if (!(tol.sep > 0.0)) invalid("search.tol_sep", "must be > 0");
  if (!(tol.cdf > 0.0 && tol.cdf < 1e-2)) invalid("search.tol_cdf", "must lie in (0, 0.01)");
  if (liability == LiabilityMode::General && !utility.allows_negative_payments()) {
    invalid("search.liability_mode",
            "general contracts need a utility defined on negative payments (use exponential), not " +
                to_string(utility.family()));
  }
}

std::optional<std::pair<double, double>> principal_costs(const DesignConfig& config) {
  if (config.principal.state_cost_override) return config.principal.state_cost_override;
  if (config.principal.Q.size() == 0) return std::nullopt;
  return std::pair{discounted_principal_cost(config.system, config.low, config.principal),
                   discounted_principal_cost(config.system, config.high, config.principal)};
}

SearchContext make_context(const DesignConfig& config) {
  SearchContext ctx;
  ctx.cost_gap = agent_cost_gap(config.system, config.low, config.high, config.agent);
  ctx.gamma_a = config.agent.gamma_a;
  ctx.gamma_p = config.principal.gamma_p;
  const auto costs = principal_costs(config);
  ctx.J1P = costs ? costs->second : 0.0;
  ctx.utility = config.utility;
  ctx.liability = config.liability;
  ctx.eta_grid_size = config.eta_grid_size;
  ctx.tol_sep = config.tol.sep;
  return ctx;
}

double delta_constant(int T, double cost_gap, double gamma_a, double u_pi0, double u_pi1) {
  const double du = u_pi1 - u_pi0;
  if (du == 0.0) fail(ErrorKind::InvalidArgument, "U(pi1) equals U(pi0)");
  return std::pow(gamma_a, -T) * cost_gap / du;
}

Payments optimal_payments(int T, double alpha, double beta, double cost_gap, double gamma_a,
                          const UtilityFunction& utility, double tol_sep) {
  const double sep = separation(alpha, beta, tol_sep);
  const double c = std::pow(gamma_a, -T) * cost_gap;
  return {utility.inverse(c * (-alpha / sep)), utility.inverse(c * ((1.0 - alpha) / sep))};
}

Payments limited_liability_payments(int T, double alpha, double beta, double cost_gap,
                                    double gamma_a, const UtilityFunction& utility, double tol_sep) {
  const double sep = separation(alpha, beta, tol_sep);
  return {0.0, utility.inverse(std::pow(gamma_a, -T) * cost_gap / sep)};
}

double principal_objective(int T, double pi0, double pi1, double beta, double gamma_p, double J1P) {
  return J1P + std::pow(gamma_p, T) * (pi0 * (1.0 - beta) + pi1 * beta);
}

std::optional<SweepRow> evaluate_threshold(int T, double eta, double alpha, double beta,
                                           const SearchContext& ctx) {
  Payments pay;
  try {
    pay = ctx.liability == LiabilityMode::Limited
              ? limited_liability_payments(T, alpha, beta, ctx.cost_gap, ctx.gamma_a, ctx.utility,
                                           ctx.tol_sep)
              : optimal_payments(T, alpha, beta, ctx.cost_gap, ctx.gamma_a, ctx.utility, ctx.tol_sep);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::UtilityDomain || e.kind() == ErrorKind::DegenerateSeparation) {
      return std::nullopt;
    }
    throw;
  }
  const double cost = principal_objective(T, pay.pi0, pay.pi1, beta, ctx.gamma_p, ctx.J1P);
  if (!std::isfinite(cost)) return std::nullopt;
  return SweepRow{T, eta, alpha, beta, pay.pi0, pay.pi1, cost};
}

std::vector<double> eta_grid(const SurvivalEvaluator& s0, const SurvivalEvaluator& s1,
                             int grid_size) {
  if (grid_size < 2) fail(ErrorKind::InvalidArgument, "eta grid needs at least 2 points");
  const Interval b0 = s0.quantile_bracket();
  const Interval b1 = s1.quantile_bracket();
  const double lo = std::min(b0.lo, b1.lo);
  const double hi = std::max(b0.hi, b1.hi);
  std::vector<double> grid(static_cast<std::size_t>(grid_size));
  const double step = (hi - lo) / (grid_size - 1);
  for (int i = 0; i < grid_size; ++i) grid[static_cast<std::size_t>(i)] = lo + i * step;
  grid.back() = hi;
  return grid;
}

SweepRow threshold_search(int T, const SurvivalEvaluator& s0, const SurvivalEvaluator& s1,
                          const SearchContext& ctx) {
  const auto grid = eta_grid(s0, s1, ctx.eta_grid_size);
  const auto alpha = s0.evaluate(grid, Execution::Serial);
  const auto beta = s1.evaluate(grid, Execution::Serial);

  std::optional<SweepRow> best;
  std::size_t best_index = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto row = evaluate_threshold(T, grid[i], alpha[i], beta[i], ctx);
    if (row && (!best || row->cost < best->cost)) {
      best = row;
      best_index = i;
    }
  }
  if (!best) {
    std::ostringstream os;
    os << "no feasible threshold at T = " << T;
    fail(ErrorKind::NoFeasibleThreshold, os.str());
  }
  const double a = grid[best_index == 0 ? 0 : best_index - 1];
  const double b = grid[std::min(best_index + 1, grid.size() - 1)];
  if (b > a) return golden_refine(T, a, b, s0, s1, ctx, *best);
  return *best;
}

SweepRow threshold_search(int T, const GChi2Law& law0, const GChi2Law& law1,
                          const SearchContext& ctx, double tol_cdf) {
  return threshold_search(T, SurvivalEvaluator(law0, tol_cdf), SurvivalEvaluator(law1, tol_cdf), ctx);
}

ContractSolution design_contract(const DesignConfig& config, Execution exec) {
  config.validate();
  const SearchContext ctx = make_context(config);
  const auto full0 = stacked_distribution_recursive(config.system, config.low, config.T_max);
  const auto full1 = stacked_distribution_recursive(config.system, config.high, config.T_max);

  const int t_max = config.T_max;
  std::vector<std::optional<SweepRow>> rows(static_cast<std::size_t>(t_max));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(t_max));
  // Largest horizons first: their eigensolves dominate the run time.
#pragma omp parallel for schedule(dynamic, 1) if (exec == Execution::Parallel)
  for (int i = 0; i < t_max; ++i) {
    const int T = t_max - i;
    const auto slot = static_cast<std::size_t>(T - 1);
    try {
      rows[slot] = solve_horizon(T, full0, full1, ctx, config.tol.cdf);
    } catch (...) {
      errors[slot] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  ContractSolution sol;
  sol.liability = config.liability;
  for (const auto& row : rows) {
    if (row) sol.sweep.push_back(*row);
  }
  if (sol.sweep.empty()) {
    fail(ErrorKind::NoFeasibleContract, "no horizon in 1..T_max admits a feasible contract");
  }
  const SweepRow* best = &sol.sweep.front();
  for (const auto& row : sol.sweep) {
    if (row.cost < best->cost) best = &row;
  }
  sol.T_star = best->T;
  sol.eta_star = best->eta;
  sol.alpha = best->alpha;
  sol.beta = best->beta;
  sol.pi0 = best->pi0;
  sol.pi1 = best->pi1;
  sol.expected_cost = best->cost;
  return sol;
}

ConstraintReport verify_constraints(const SweepRow& row, double cost_gap, double gamma_a,
                                    const UtilityFunction& utility) {
  ConstraintReport rep;
  const double u0 = utility.value(row.pi0);
  const double u1 = utility.value(row.pi1);
  if (!(u1 > u0)) {
    // No incentive at all: neither constraint can hold.
    rep.delta = kInf;
    rep.ic_slack = -kInf;
    rep.participation_slack = -kInf;
    return rep;
  }
  rep.delta = delta_constant(row.T, cost_gap, gamma_a, u0, u1);
  rep.ic_slack = row.beta - rep.delta - row.alpha;
  rep.participation_slack = row.beta - rep.delta + u0 / (u1 - u0);
  rep.satisfied = rep.ic_slack >= -kTolConstraint && rep.participation_slack >= -kTolConstraint;
  return rep;
}

ConstraintReport verify_constraints(const ContractSolution& sol, double cost_gap, double gamma_a,
                                    const UtilityFunction& utility) {
  return verify_constraints(sol.optimum(), cost_gap, gamma_a, utility);
}

bool induce_effort(const ContractSolution& sol, double J0P, double J1P, double gamma_p) {
  return principal_objective(sol.T_star, sol.pi0, sol.pi1, sol.beta, gamma_p, J1P) <= J0P;
}

}  // namespace mhlti
