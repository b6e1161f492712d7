#include "mhlti/errors.hpp"
#include "mhlti/mc_oracle.hpp"
#include "mhlti/system_model.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace mhlti;

namespace {

Matrix m1(double v) { return Matrix::Constant(1, 1, v); }
Vector v1(double v) { return Vector::Constant(1, v); }

// a_cl = a + b k = 0 with a = 1, b = -1, k = 1; unit process noise, x_0 = 0.
LtiSystem memoryless() { return {m1(1.0), m1(-1.0), m1(1.0), v1(0.0), m1(1.0), m1(0.0), v1(0.0), m1(0.0)}; }

LtiSystem lfc() {
  Matrix A(4, 4);
  A << 0.287, 0, 0, 0, 0.156, 0.717, 0, 0, 0.061, 0.509, 0.995, 0, 0.002, 0.027, 0.100, 1;
  Matrix B(4, 1);
  B << 0.713, 0.127, 0.029, 0.001;
  Vector mu0 = Vector::Zero(4);
  mu0[2] = 0.1;
  const Matrix I = Matrix::Identity(4, 4);
  return {A, B, I, Vector::Zero(4), 0.01 * I, 0.01 * I, mu0, 1e-9 * I};
}

FeedbackController lfc_low() {
  Matrix K(1, 4);
  K << 0, 0.0002, -0.0856, -0.0139;
  return {K, Effort::Low};
}

FeedbackController lfc_high() {
  Matrix K(1, 4);
  K << 0, -2.2033, -0.6932, -0.0556;
  return {K, Effort::High};
}

}  // namespace

TEST_CASE("closed_loop_matrix") {
  SUBCASE("zero input map leaves A") {
    const Matrix I = Matrix::Identity(2, 2);
    LtiSystem sys(I, Matrix::Zero(2, 1), I, Vector::Zero(2), I, I, Vector::Zero(2), I);
    CHECK(closed_loop_matrix(sys, {Matrix::Constant(1, 2, 3.0), Effort::Low}).isApprox(I));
  }
  SUBCASE("scalar") {
    LtiSystem sys(m1(0.5), m1(1.0), m1(1.0), v1(0), m1(1), m1(1), v1(0), m1(0));
    CHECK(closed_loop_matrix(sys, {m1(-0.25), Effort::Low})(0, 0) == doctest::Approx(0.25));
  }
  SUBCASE("LFC high effort is Schur stable") {
    CHECK(spectral_radius(closed_loop_matrix(lfc(), lfc_high())) < 1.0);
  }
  SUBCASE("wrong gain shape") {
    CHECK_THROWS_AS(closed_loop_matrix(lfc(), {Matrix::Zero(1, 3), Effort::Low}), Error);
  }
}

TEST_CASE("spectral_radius") {
  CHECK(spectral_radius(Matrix::Identity(3, 3)) == doctest::Approx(1.0).epsilon(1e-12));
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 0.5;
  d(1, 1) = -0.9;
  CHECK(spectral_radius(d) == doctest::Approx(0.9).epsilon(1e-12));
  const double rho = spectral_radius(closed_loop_matrix(lfc(), lfc_low()));
  CHECK(rho > 0.0);
  CHECK(rho < 1.0);
  CHECK(rho == doctest::Approx(oracle::max_abs_eigenvalue(closed_loop_matrix(lfc(), lfc_low()))).epsilon(1e-9));
}

TEST_CASE("LtiSystem rejects inconsistent input") {
  const Matrix I = Matrix::Identity(2, 2);
  CHECK_THROWS_AS(LtiSystem(I, Matrix::Zero(3, 1), I, Vector::Zero(2), I, I, Vector::Zero(2), I), Error);
  Matrix bad = I;
  bad(0, 0) = -1.0;
  try {
    LtiSystem(I, Matrix::Zero(2, 1), I, Vector::Zero(2), bad, I, Vector::Zero(2), I);
    FAIL("expected NotPositiveSemidefinite");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NotPositiveSemidefinite);
  }
  // Tiny negative eigenvalues within tolerance are accepted.
  Matrix nearly = Matrix::Zero(2, 2);
  nearly(0, 0) = -1e-12;
  CHECK_NOTHROW(LtiSystem(I, Matrix::Zero(2, 1), I, Vector::Zero(2), nearly, I, Vector::Zero(2), I));
}

TEST_CASE("propagate_moments") {
  SUBCASE("centred start") {
    const Matrix I = Matrix::Identity(2, 2);
    LtiSystem sys(0.5 * I, Matrix::Zero(2, 1), I, Vector::Zero(2), 2.0 * I, I, Vector::Zero(2),
                  Matrix::Zero(2, 2));
    const auto m = propagate_moments(sys, {Matrix::Zero(1, 2), Effort::Low}, 5);
    REQUIRE(m.size() == 6);
    for (const auto& s : m) CHECK(s.mean.isZero());
    CHECK(m[1].second_moment.isApprox(2.0 * I));
  }
  SUBCASE("memoryless noise") {
    const auto m = propagate_moments(memoryless(), {m1(1.0), Effort::Low}, 4);
    for (int t = 1; t <= 4; ++t) CHECK(m[static_cast<std::size_t>(t)].second_moment(0, 0) == doctest::Approx(1.0));
  }
  SUBCASE("geometric accumulation") {
    LtiSystem sys(m1(0.5), m1(1.0), m1(1.0), v1(1.0), m1(0.0), m1(0.0), v1(0.0), m1(0.0));
    const auto m = propagate_moments(sys, {m1(0.0), Effort::Low}, 3);
    CHECK(m[3].mean[0] == doctest::Approx(1.75).epsilon(1e-15));
  }
  SUBCASE("second moment dominates the mean outer product and converges") {
    std::mt19937_64 rng(11);
    for (int rep = 0; rep < 5; ++rep) {
      const auto in = oracle::random_instance(rng, 3, 1, 2);
      const auto m = propagate_moments(in.system(), in.low(), 400);
      for (const auto& s : m) {
        const Matrix cov = s.second_moment - s.mean * s.mean.transpose();
        CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(cov).eigenvalues().minCoeff() > -kTolPsd);
      }
      const double early = (m[51].mean - m[50].mean).norm();
      const double late = (m[101].mean - m[100].mean).norm();
      CHECK(late <= early + 1e-15);
      CHECK((m[400].mean - m[399].mean).norm() < 1e-12);
    }
  }
}

TEST_CASE("discounted costs: closed forms") {
  AgentCostSpec agent{m1(1.0), v1(0.0), 0.5, std::nullopt};
  SUBCASE("no control costs nothing") {
    CHECK(discounted_agent_cost(lfc(), {Matrix::Zero(1, 4), Effort::Low},
                                {m1(1.0), v1(0.3), 0.9, std::nullopt}) == 0.0);
  }
  SUBCASE("geometric series, agent") {
    CHECK(std::abs(discounted_agent_cost(memoryless(), {m1(1.0), Effort::Low}, agent) - 1.0) < 1e-10);
  }
  SUBCASE("geometric series, principal") {
    PrincipalCostSpec p{m1(1.0), v1(0.0), 0.5, std::nullopt};
    CHECK(std::abs(discounted_principal_cost(memoryless(), {m1(1.0), Effort::Low}, p) - 1.0) < 1e-10);
    PrincipalCostSpec zero{m1(0.0), v1(0.0), 0.5, std::nullopt};
    CHECK(discounted_principal_cost(memoryless(), {m1(1.0), Effort::Low}, zero) == 0.0);
  }
  SUBCASE("divergence when gamma rho^2 >= 1") {
    LtiSystem sys(m1(1.5), m1(1.0), m1(1.0), v1(0), m1(1), m1(1), v1(0), m1(0));
    PrincipalCostSpec p{m1(1.0), v1(0.0), 0.5, std::nullopt};
    try {
      (void)discounted_principal_cost(sys, {m1(0.0), Effort::Low}, p);
      FAIL("expected Divergence");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Divergence);
    }
  }
}

TEST_CASE("discounted costs match the discounted Stein equations") {
  std::mt19937_64 rng(2024);
  for (int rep = 0; rep < 10; ++rep) {
    const auto in = oracle::random_instance(rng, 3, 2, 2);
    const LtiSystem sys = in.system();
    const Matrix R = oracle::random_spd(rng, 2, 0.5, 0.1);
    const Vector r = oracle::random_matrix(rng, 2, 1, 1.0);
    const double gamma = 0.95;
    const AgentCostSpec spec{R, r, gamma, std::nullopt};
    const double got = discounted_agent_cost(sys, in.high(), spec);
    const Matrix a_cl = in.A + in.B * in.K1;
    const double want = oracle::stein_discounted_cost(a_cl, in.mu_w, in.Sigma_w, in.mu_0, in.Sigma_0,
                                                      in.K1.transpose() * R * in.K1, in.K1.transpose() * r, gamma);
    CHECK(got == doctest::Approx(want).epsilon(1e-9));

    // Doubling the truncation index changes nothing beyond tol_series.
    const double doubled = detail::discounted_series_with_horizon(
        sys, a_cl, in.K1.transpose() * R * in.K1, in.K1.transpose() * r, gamma, 2.0);
    CHECK(std::abs(doubled - got) <= kTolSeries * std::max(1.0, std::abs(got)) * 10);
  }
}

TEST_CASE("LFC discounted costs are consistent with simulation") {
  const LtiSystem sys = lfc();
  const AgentCostSpec agent{m1(1.0), v1(0.0), 0.995, std::nullopt};
  const double gap = agent_cost_gap(sys, lfc_low(), lfc_high(), agent);
  CHECK(gap > 0.0);

  PrincipalCostSpec principal{Matrix::Identity(4, 4), Vector::Zero(4), 0.998, std::nullopt};
  const double j0 = discounted_principal_cost(sys, lfc_low(), principal);
  const double j1 = discounted_principal_cost(sys, lfc_high(), principal);
  CHECK(j1 < j0);

  // Truncated sampling: gamma = 0.9 keeps the horizon short.
  const AgentCostSpec fast{m1(1.0), v1(0.0), 0.9, std::nullopt};
  const double analytic = agent_cost_gap(sys, lfc_low(), lfc_high(), fast);
  const auto est = empirical_cost_gap(sys, lfc_low(), lfc_high(), fast, 400, 20000, 5);
  CHECK(std::abs(est.value - analytic) <= 3.0 * est.std_error);
}

TEST_CASE("agent_cost_gap") {
  const LtiSystem sys = lfc();
  AgentCostSpec spec{m1(1.0), v1(0.0), 0.995, 0.1};
  CHECK(agent_cost_gap(sys, lfc_low(), lfc_high(), spec) == 0.1);
  spec.cost_gap_override = 5.0;
  CHECK(agent_cost_gap(sys, lfc_low(), lfc_high(), spec) == 5.0);
  spec.cost_gap_override.reset();
  try {
    (void)agent_cost_gap(sys, lfc_low(), {lfc_low().K, Effort::High}, spec);
    FAIL("expected NonpositiveGap");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NonpositiveGap);
  }
  spec.gamma_a = 1.2;
  CHECK_THROWS_AS(agent_cost_gap(sys, lfc_low(), lfc_high(), spec), Error);
}

TEST_CASE("utility functions") {
  const UtilityFunction families[] = {UtilityFunction::sqrt(), UtilityFunction::power(0.3),
                                      UtilityFunction::exponential(0.7)};
  for (const auto& u : families) {
    CAPTURE(to_string(u.family()));
    CHECK(u.value(0.0) == 0.0);
    for (double pi : {1e-6, 0.01, 0.5, 1.0, 3.0, 40.0, 1e4}) {
      // The CARA inverse has condition number exp(rho pi).
      if (u.family() == UtilityFunction::Family::Exponential && pi > 3.0) continue;
      const double back = u.inverse(u.value(pi));
      CHECK(std::abs(back - pi) <= 1e-12 * pi);
      // Strictly increasing and strictly concave (midpoint test).
      CHECK(u.value(pi * 1.5) > u.value(pi));
      CHECK(u.value(pi) > 0.5 * (u.value(0.5 * pi) + u.value(1.5 * pi)));
    }
  }
  CHECK_THROWS_AS((void)UtilityFunction::sqrt().value(-1.0), Error);
  CHECK_THROWS_AS((void)UtilityFunction::sqrt().inverse(-0.5), Error);
  CHECK_THROWS_AS(UtilityFunction::power(1.5), Error);
  const auto cara = UtilityFunction::exponential(0.5);
  CHECK(cara.allows_negative_payments());
  CHECK(cara.inverse(cara.value(-2.0)) == doctest::Approx(-2.0).epsilon(1e-12));
  CHECK_THROWS_AS((void)cara.inverse(2.0), Error);  // U < 1/rho
}
