#pragma once

// Gaussian law of the stacked observation vector Y_T = (y_1, ..., y_T) under
// one controller: Y_T ~ N(M, S) with M = U mu_W + V mu_0 and
// S = U Sigma_W U^T + V Sigma_0 V^T + Sigma_E.

#include "mhlti/system_model.hpp"

namespace mhlti {

enum class Hypothesis { H0, H1 };

inline constexpr double kTolDistinguish = 1e-10;

struct StackedGaussian {
  int horizon = 0;
  Vector mean;  // T*p
  Matrix cov;   // T*p x T*p, symmetric
  Hypothesis hypothesis = Hypothesis::H0;

  /// Leading horizon-`t` block; valid because Y_t is a prefix of Y_T.
  [[nodiscard]] StackedGaussian truncated(int t) const;
};

struct StackingOperators {
  Matrix U;  // (T*p) x (T*n), block (s, t) = C A_cl^{s-t} for s >= t
  Matrix V;  // (T*p) x n, block s = C A_cl^{s+1}
};

StackingOperators stacking_operators(const LtiSystem& sys, const FeedbackController& ctrl, int horizon);

/// Assembles (M, S) from the stacking operators. O((T n)^3); this is the
/// reference construction.
StackedGaussian stacked_distribution(const LtiSystem& sys, const FeedbackController& ctrl,
                                     int horizon);

/// Same law built from the closed-loop state moments: block (s, t) of S is
/// C A_cl^{s-t} Var(x_t) C^T (+ Sigma_e on the diagonal). O(T^2 n^3).
/// Build once at the largest horizon and use `truncated` for smaller ones.
StackedGaussian stacked_distribution_recursive(const LtiSystem& sys, const FeedbackController& ctrl,
                                               int horizon);

bool distinguishable(const StackedGaussian& d0, const StackedGaussian& d1);

}  // namespace mhlti
