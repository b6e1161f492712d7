#include "mhlti/contract_designer.hpp"
#include "mhlti/errors.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace mhlti;

namespace {

Matrix m1(double v) { return Matrix::Constant(1, 1, v); }
Vector v1(double v) { return Vector::Constant(1, v); }

DesignConfig scalar_config(LiabilityMode mode = LiabilityMode::Limited,
                           UtilityFunction utility = UtilityFunction::sqrt()) {
  LtiSystem sys(m1(0.9), m1(1.0), m1(1.0), v1(0.0), m1(1.0), m1(0.1), v1(1.0), m1(0.1));
  AgentCostSpec agent{Matrix(), Vector(), 0.95, 1.0};
  PrincipalCostSpec principal{Matrix(), Vector(), 0.97, std::pair{5.0, 2.0}};
  return DesignConfig{sys,   {m1(0.0), Effort::Low}, {m1(-0.5), Effort::High}, agent, principal, utility, 30, 512,
                      mode, Tolerances{}};
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::InvalidArgument;
}

// Normal LLR laws with squared separation d2 under both hypotheses.
std::pair<GChi2Law, GChi2Law> normal_pair(double d2) {
  const double d = std::sqrt(d2);
  return {GChi2Law{{}, {}, d, -0.5 * d2, Hypothesis::H0}, GChi2Law{{}, {}, d, 0.5 * d2, Hypothesis::H1}};
}

SearchContext plain_context(LiabilityMode mode, UtilityFunction u) {
  SearchContext ctx;
  ctx.cost_gap = 1.0;
  ctx.gamma_a = 0.95;
  ctx.gamma_p = 0.97;
  ctx.J1P = 2.0;
  ctx.utility = u;
  ctx.liability = mode;
  return ctx;
}

}  // namespace

TEST_CASE("payment closed forms") {
  const auto u = UtilityFunction::sqrt();
  const auto ll = limited_liability_payments(1, 0.2, 0.7, 1.0, 0.5, u);
  CHECK(ll.pi0 == 0.0);
  CHECK(ll.pi1 == doctest::Approx(16.0));
  const auto ll3 = limited_liability_payments(3, 0.1, 0.6, 2.0, 0.9, u);
  CHECK(ll3.pi1 == doctest::Approx(std::pow(2.0 / std::pow(0.9, 3) / 0.5, 2)));
  CHECK(kind_of([&] { (void)optimal_payments(1, 0.2, 0.7, 1.0, 0.5, u); }) == ErrorKind::UtilityDomain);
  CHECK(kind_of([&] { (void)limited_liability_payments(1, 0.5, 0.5, 1.0, 0.5, u); }) ==
        ErrorKind::DegenerateSeparation);
  CHECK(kind_of([&] { (void)limited_liability_payments(1, 0.6, 0.5, 1.0, 0.5, u); }) ==
        ErrorKind::DegenerateSeparation);

  const auto e = UtilityFunction::exponential(0.1);
  const auto op = optimal_payments(2, 0.2, 0.7, 1.0, 0.9, e);
  const double c = 1.0 / (0.9 * 0.9);
  CHECK(e.value(op.pi0) == doctest::Approx(-c * 0.2 / 0.5));
  CHECK(e.value(op.pi1) == doctest::Approx(c * 0.8 / 0.5));
  CHECK(op.pi0 < 0.0);
  CHECK(op.pi1 > 0.0);

  CHECK(delta_constant(2, 1.0, 0.5, 1.0, 3.0) == doctest::Approx(2.0));
  CHECK_THROWS_AS(delta_constant(2, 1.0, 0.5, 1.0, 1.0), Error);
  CHECK(principal_objective(2, 1.0, 4.0, 0.75, 0.5, 3.0) == doctest::Approx(3.0 + 0.25 * (0.25 + 3.0)));
}

TEST_CASE("evaluate_threshold") {
  const auto ctx = plain_context(LiabilityMode::Limited, UtilityFunction::sqrt());
  const auto row = evaluate_threshold(4, 0.3, 0.1, 0.6, ctx);
  REQUIRE(row);
  const double pi1 = std::pow(std::pow(0.95, -4) / 0.5, 2);
  CHECK(row->pi1 == doctest::Approx(pi1));
  CHECK(row->cost == doctest::Approx(2.0 + std::pow(0.97, 4) * pi1 * 0.6));
  CHECK(row->eta == 0.3);
  CHECK_FALSE(evaluate_threshold(4, 0.3, 0.6, 0.6, ctx));
  const auto general = plain_context(LiabilityMode::General, UtilityFunction::sqrt());
  CHECK_FALSE(evaluate_threshold(4, 0.3, 0.1, 0.6, general));
}

TEST_CASE("threshold_search against a brute-force scan") {
  for (double d2 : {0.5, 2.0, 6.0}) {
    const auto [law0, law1] = normal_pair(d2);
    const double d = std::sqrt(d2);
    const int T = 5;
    const auto ctx = plain_context(LiabilityMode::Limited, UtilityFunction::sqrt());
    const auto row = threshold_search(T, law0, law1, ctx);

    const double c = std::pow(0.95, -T);
    auto cost = [&](double eta) {
      const double a = oracle::normal_sf((eta + 0.5 * d2) / d);
      const double b = oracle::normal_sf((eta - 0.5 * d2) / d);
      if (b - a < kTolSep) return std::numeric_limits<double>::infinity();
      const double pi1 = std::pow(c / (b - a), 2);
      return 2.0 + std::pow(0.97, T) * pi1 * b;
    };
    double best = std::numeric_limits<double>::infinity();
    double best_eta = 0.0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
      const double eta = -0.5 * d2 - 6.0 * d + 12.0 * d * i / (n - 1);
      if (cost(eta) < best) {
        best = cost(eta);
        best_eta = eta;
      }
    }
    CHECK(row.cost <= best * (1.0 + 1e-6));
    CHECK(row.cost == doctest::Approx(cost(row.eta)).epsilon(1e-5));
    CHECK(row.eta == doctest::Approx(best_eta).epsilon(0.0).scale(0.0).epsilon(2e-3 * d));
    CHECK(row.alpha == doctest::Approx(oracle::normal_sf((row.eta + 0.5 * d2) / d)).epsilon(1e-5));
    CHECK(row.beta == doctest::Approx(oracle::normal_sf((row.eta - 0.5 * d2) / d)).epsilon(1e-5));
  }
}

TEST_CASE("threshold_search fails on indistinguishable laws") {
  const GChi2Law point{{}, {}, 0.0, 0.0, Hypothesis::H0};
  const auto ctx = plain_context(LiabilityMode::Limited, UtilityFunction::sqrt());
  CHECK(kind_of([&] { (void)threshold_search(3, point, point, ctx); }) == ErrorKind::NoFeasibleThreshold);
}

TEST_CASE("eta grid spans both brackets") {
  const auto [law0, law1] = normal_pair(4.0);
  const SurvivalEvaluator s0(law0);
  const SurvivalEvaluator s1(law1);
  const auto grid = eta_grid(s0, s1, 64);
  REQUIRE(grid.size() == 64);
  CHECK(grid.front() == std::min(s0.quantile_bracket().lo, s1.quantile_bracket().lo));
  CHECK(grid.back() == std::max(s0.quantile_bracket().hi, s1.quantile_bracket().hi));
  for (std::size_t i = 1; i < grid.size(); ++i) CHECK(grid[i] > grid[i - 1]);
  CHECK_THROWS_AS(eta_grid(s0, s1, 1), Error);
}

TEST_CASE("design_contract on a scalar plant") {
  const auto cfg = scalar_config();
  const auto sol = design_contract(cfg);
  REQUIRE_FALSE(sol.sweep.empty());
  CHECK(sol.liability == LiabilityMode::Limited);
  double best = std::numeric_limits<double>::infinity();
  int prev_T = 0;
  for (const auto& row : sol.sweep) {
    CHECK(row.T > prev_T);
    prev_T = row.T;
    CHECK(row.pi0 == 0.0);
    const double pi1 = std::pow(std::pow(0.95, -row.T) / (row.beta - row.alpha), 2);
    CHECK(row.pi1 == doctest::Approx(pi1).epsilon(1e-12));
    CHECK(row.cost == doctest::Approx(2.0 + std::pow(0.97, row.T) * row.pi1 * row.beta).epsilon(1e-12));
    best = std::min(best, row.cost);
    const auto rep = verify_constraints(row, 1.0, 0.95, cfg.utility);
    CHECK(std::abs(rep.ic_slack) <= kTolConstraint);
    CHECK(rep.participation_slack == doctest::Approx(row.alpha).epsilon(1e-9));
    CHECK(rep.satisfied);
  }
  CHECK(sol.expected_cost == best);
  CHECK(sol.optimum().T == sol.T_star);
  CHECK(sol.optimum().cost == sol.expected_cost);
  CHECK(induce_effort(sol, 1e9, 2.0, 0.97));
  CHECK_FALSE(induce_effort(sol, 2.0, 2.0, 0.97));
}

TEST_CASE("doubling the eta grid moves the optimum by under 0.1%") {
  auto coarse = scalar_config();
  coarse.eta_grid_size = 256;
  auto fine = coarse;
  fine.eta_grid_size = 512;
  const auto a = design_contract(coarse);
  const auto b = design_contract(fine);
  CHECK(std::abs(a.expected_cost - b.expected_cost) <= 1e-3 * b.expected_cost);
  CHECK(a.sweep.size() == b.sweep.size());
  for (std::size_t i = 0; i < a.sweep.size(); ++i) {
    CHECK(std::abs(a.sweep[i].cost - b.sweep[i].cost) <= 1e-3 * b.sweep[i].cost);
  }
}

TEST_CASE("general liability with exponential utility binds both constraints") {
  const auto u = UtilityFunction::exponential(0.05);
  const auto cfg = scalar_config(LiabilityMode::General, u);
  const auto sol = design_contract(cfg);
  CHECK(sol.liability == LiabilityMode::General);
  CHECK(sol.pi0 < 0.0);
  CHECK(sol.pi1 > 0.0);
  const auto rep = verify_constraints(sol, 1.0, 0.95, u);
  CHECK(std::abs(rep.ic_slack) <= kTolConstraint);
  CHECK(std::abs(rep.participation_slack) <= kTolConstraint);
  CHECK(rep.satisfied);
  for (const auto& row : sol.sweep) {
    const auto r = verify_constraints(row, 1.0, 0.95, u);
    CHECK(std::abs(r.ic_slack) <= kTolConstraint);
    CHECK(std::abs(r.participation_slack) <= kTolConstraint);
  }
}

TEST_CASE("verify_constraints without incentive") {
  const SweepRow row{3, 0.0, 0.2, 0.6, 1.0, 1.0, 0.0};
  const auto rep = verify_constraints(row, 1.0, 0.95, UtilityFunction::sqrt());
  CHECK_FALSE(rep.satisfied);
  CHECK(rep.ic_slack == -std::numeric_limits<double>::infinity());
}

TEST_CASE("serial and parallel designs are identical") {
  const auto cfg = scalar_config();
  const auto a = design_contract(cfg, Execution::Serial);
  const auto b = design_contract(cfg, Execution::Parallel);
  REQUIRE(a.sweep.size() == b.sweep.size());
  for (std::size_t i = 0; i < a.sweep.size(); ++i) {
    CHECK(a.sweep[i].T == b.sweep[i].T);
    CHECK(a.sweep[i].eta == b.sweep[i].eta);
    CHECK(a.sweep[i].cost == b.sweep[i].cost);
    CHECK(a.sweep[i].pi1 == b.sweep[i].pi1);
  }
  CHECK(a.T_star == b.T_star);
  CHECK(a.eta_star == b.eta_star);
}

TEST_CASE("equal controllers admit no contract") {
  auto cfg = scalar_config();
  cfg.high.K = cfg.low.K;
  cfg.T_max = 5;
  CHECK(kind_of([&] { (void)design_contract(cfg); }) == ErrorKind::NoFeasibleContract);
}

TEST_CASE("DesignConfig validation names the field") {
  auto expect_field = [](const DesignConfig& cfg, const std::string& field) {
    try {
      cfg.validate();
      FAIL("expected ConfigInvalid for " << field);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::ConfigInvalid);
      CHECK(std::string(e.what()).find(field) != std::string::npos);
    }
  };
  auto cfg = scalar_config();
  CHECK_NOTHROW(cfg.validate());
  cfg.agent.gamma_a = 1.2;
  expect_field(cfg, "agent.gamma_a");
  cfg = scalar_config();
  cfg.principal.gamma_p = 0.0;
  expect_field(cfg, "principal.gamma_p");
  cfg = scalar_config();
  cfg.T_max = 0;
  expect_field(cfg, "search.T_max");
  cfg = scalar_config();
  cfg.eta_grid_size = 1;
  expect_field(cfg, "search.eta_grid_size");
  cfg = scalar_config();
  cfg.low.K = Matrix::Zero(1, 2);
  expect_field(cfg, "controllers.K_low");
  cfg = scalar_config(LiabilityMode::General);
  expect_field(cfg, "search.liability_mode");
  cfg = scalar_config();
  cfg.agent.cost_gap_override = -1.0;
  expect_field(cfg, "agent.cost_gap");
}

TEST_CASE("make_context resolves overrides") {
  const auto cfg = scalar_config();
  const auto ctx = make_context(cfg);
  CHECK(ctx.cost_gap == 1.0);
  CHECK(ctx.J1P == 2.0);
  CHECK(ctx.gamma_a == 0.95);
  CHECK(ctx.gamma_p == 0.97);
  const auto costs = principal_costs(cfg);
  REQUIRE(costs);
  CHECK(costs->first == 5.0);
  auto bare = cfg;
  bare.principal.state_cost_override.reset();
  CHECK_FALSE(principal_costs(bare));
  CHECK(make_context(bare).J1P == 0.0);
}
