#pragma once

// Independent reference computations for the test suites. Nothing here calls
// into the routines it is used to check.

#include "mhlti/system_model.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace oracle {

using mhlti::Matrix;
using mhlti::Vector;

inline double normal_sf(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

/// P[chi^2_1 >= x]
inline double chi2_1_sf(double x) { return x <= 0.0 ? 1.0 : std::erfc(std::sqrt(0.5 * x)); }

/// Solves sf(x) = p for a decreasing sf by bisection on [lo, hi].
template <class Sf>
double inverse_sf(Sf sf, double p, double lo, double hi) {
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (sf(mid) > p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// KL(N(ma, Sa) || N(mb, Sb)) through LU determinants and explicit inverses.
inline double gaussian_kl(const Vector& ma, const Matrix& Sa, const Vector& mb, const Matrix& Sb) {
  const Eigen::FullPivLU<Matrix> lu_a(Sa);
  const Eigen::FullPivLU<Matrix> lu_b(Sb);
  const Matrix Sb_inv = lu_b.inverse();
  const Vector d = mb - ma;
  const double k = static_cast<double>(ma.size());
  return 0.5 * ((Sb_inv * Sa).trace() + d.dot(Sb_inv * d) - k +
                std::log(lu_b.determinant() / lu_a.determinant()));
}

/// Closed-form discounted cost sum_t gamma^t (tr(W P_t) + l^T m_t) from the
/// discounted Stein equations for S_m = sum gamma^t m_t and
/// S_P = sum gamma^t P_t, solved with Kronecker products.
inline double stein_discounted_cost(const Matrix& a_cl, const Vector& mu_w, const Matrix& Sigma_w,
                                    const Vector& mu_0, const Matrix& Sigma_0, const Matrix& W,
                                    const Vector& l, double gamma) {
  const auto n = a_cl.rows();
  const Matrix I = Matrix::Identity(n, n);
  const Vector S_m = (I - gamma * a_cl).lu().solve(mu_0 + gamma * mu_w / (1.0 - gamma));
  const Matrix P0 = Sigma_0 + mu_0 * mu_0.transpose();
  const Matrix rhs = P0 + gamma * (a_cl * S_m * mu_w.transpose() + mu_w * S_m.transpose() * a_cl.transpose() +
                                   (mu_w * mu_w.transpose() + Sigma_w) / (1.0 - gamma));
  Matrix kron(n * n, n * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) kron.block(i * n, j * n, n, n) = a_cl(i, j) * a_cl;
  }
  // vec(A X A^T) = (A kron A) vec(X) with column-major vec.
  const Matrix lhs = Matrix::Identity(n * n, n * n) - gamma * kron;
  const Vector vec_rhs = Eigen::Map<const Vector>(rhs.data(), n * n);
  const Vector vec_sp = lhs.lu().solve(vec_rhs);
  const Matrix S_P = Eigen::Map<const Matrix>(vec_sp.data(), n, n);
  return (W * S_P).trace() + l.dot(S_m);
}

/// Two-sample Kolmogorov-Smirnov statistic.
inline double ks_statistic(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

/// 1% critical value of the two-sample KS statistic.
inline double ks_critical_1pct(std::size_t n, std::size_t m) {
  const double nn = static_cast<double>(n);
  const double mm = static_cast<double>(m);
  return 1.628 * std::sqrt((nn + mm) / (nn * mm));
}

inline double max_abs_eigenvalue(const Matrix& m) {
  return Eigen::EigenSolver<Matrix>(m).eigenvalues().cwiseAbs().maxCoeff();
}

struct Instance {
  Matrix A, B, C, K0, K1, Sigma_w, Sigma_e, Sigma_0;
  Vector mu_w, mu_0;

  [[nodiscard]] mhlti::LtiSystem system() const {
    return {A, B, C, mu_w, Sigma_w, Sigma_e, mu_0, Sigma_0};
  }
  [[nodiscard]] mhlti::FeedbackController low() const { return {K0, mhlti::Effort::Low}; }
  [[nodiscard]] mhlti::FeedbackController high() const { return {K1, mhlti::Effort::High}; }
};

inline Matrix random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double scale) {
  std::normal_distribution<double> g(0.0, scale);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = g(rng);
  }
  return m;
}

inline Matrix random_spd(std::mt19937_64& rng, Eigen::Index n, double scale, double floor) {
  const Matrix m = random_matrix(rng, n, n, scale);
  return m * m.transpose() + floor * Matrix::Identity(n, n);
}

/// Random desk-scale plant with both closed loops of spectral radius < rho_max.
inline Instance random_instance(std::mt19937_64& rng, Eigen::Index n, Eigen::Index q, Eigen::Index p,
                                double rho_max = 0.9) {
  for (;;) {
    Instance in;
    in.A = random_matrix(rng, n, n, 0.5);
    in.B = random_matrix(rng, n, q, 1.0);
    in.C = random_matrix(rng, p, n, 1.0);
    in.K0 = random_matrix(rng, q, n, 0.3);
    in.K1 = random_matrix(rng, q, n, 0.3);
    if (max_abs_eigenvalue(in.A + in.B * in.K0) >= rho_max) continue;
    if (max_abs_eigenvalue(in.A + in.B * in.K1) >= rho_max) continue;
    in.mu_w = random_matrix(rng, n, 1, 0.3);
    in.mu_0 = random_matrix(rng, n, 1, 1.0);
    in.Sigma_w = random_spd(rng, n, 0.4, 0.05);
    in.Sigma_e = random_spd(rng, p, 0.3, 0.05);
    in.Sigma_0 = random_spd(rng, n, 0.3, 0.0);
    return in;
  }
}

}  // namespace oracle
