#pragma once

// Log-likelihood ratio LLR = log L_1(Y) - log L_0(Y) between two stacked
// Gaussian laws, and its exact distribution under either hypothesis:
//
//   LLR | H_i  ~  sum_j w_j chi^2_1(nu_j^2) + sigma Z + offset
//
// (a generalized chi-squared law). Components whose weight vanishes relative
// to the largest one are folded into the Gaussian term.

#include "mhlti/trajectory_distribution.hpp"

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace mhlti {

inline constexpr double kTolWeight = 1e-10;

struct GChi2Law {
  std::vector<double> weights;
  std::vector<double> noncentralities;  // nu_j^2, aligned with weights
  double sigma = 0.0;
  double offset = 0.0;
  Hypothesis hypothesis = Hypothesis::H0;

  /// Throws InvalidArgument when the invariants are violated.
  void validate() const;
  [[nodiscard]] bool degenerate() const { return weights.empty() && sigma == 0.0; }
};

/// Factored form of one stacked Gaussian: Cholesky factor and log-determinant.
class GaussianFactor {
 public:
  explicit GaussianFactor(const StackedGaussian& d);

  /// (y - mean)^T S^{-1} (y - mean)
  [[nodiscard]] double mahalanobis(const Vector& y) const;
  [[nodiscard]] double log_det() const { return log_det_; }
  [[nodiscard]] Eigen::Index dim() const { return mean_.size(); }

 private:
  Vector mean_;
  Eigen::LLT<Matrix> llt_;
  double log_det_ = 0.0;
};

/// 0.5 * [log(|S0|/|S1|) + (Y-M0)^T S0^{-1} (Y-M0) - (Y-M1)^T S1^{-1} (Y-M1)].
double llr_value(const Vector& y, const StackedGaussian& d0, const StackedGaussian& d1);

/// Prefactored variant for repeated evaluation.
double llr_value(const Vector& y, const GaussianFactor& f0, const GaussianFactor& f1);

/// Reference decomposition: symmetric square roots of S_0 (or S_1),
/// Phi = S^{1/2} S_other^{-1} S^{1/2} eigendecomposed per hypothesis.
GChi2Law decompose(const StackedGaussian& d0, const StackedGaussian& d1, Hypothesis under);

/// Both laws from one generalized eigenproblem S_0 v = lambda S_1 v
/// (V^T S_1 V = I, V^T S_0 V = diag(lambda)). Same distributions as
/// `decompose`, one O(n^3) eigensolve instead of four.
std::pair<GChi2Law, GChi2Law> decompose_both(const StackedGaussian& d0, const StackedGaussian& d1);

double law_mean(const GChi2Law& law);
double law_variance(const GChi2Law& law);

/// Closed-form KL(N(ma, Sa) || N(mb, Sb)).
double gaussian_kl(const StackedGaussian& a, const StackedGaussian& b);

/// n i.i.d. draws of the law's random variable.
std::vector<double> sample(const GChi2Law& law, std::mt19937_64& rng, std::size_t n);

}  // namespace mhlti
