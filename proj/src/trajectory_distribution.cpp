#include "mhlti/trajectory_distribution.hpp"

#include "mhlti/errors.hpp"

#include <sstream>

namespace mhlti {

namespace {

Hypothesis hypothesis_of(const FeedbackController& ctrl) {
  return ctrl.effort == Effort::High ? Hypothesis::H1 : Hypothesis::H0;
}

void require_horizon(int horizon) {
  if (horizon < 1) fail(ErrorKind::InvalidArgument, "horizon T must be >= 1");
}

Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

}  // namespace

StackedGaussian StackedGaussian::truncated(int t) const {
  if (t < 1 || t > horizon) fail(ErrorKind::InvalidArgument, "truncation horizon out of range");
  const auto p = mean.size() / horizon;
  const auto len = static_cast<Eigen::Index>(t) * p;
  return {t, mean.head(len), cov.topLeftCorner(len, len), hypothesis};
}

StackingOperators stacking_operators(const LtiSystem& sys, const FeedbackController& ctrl, int horizon) {
  require_horizon(horizon);
  const Matrix a_cl = closed_loop_matrix(sys, ctrl);
  const auto n = sys.state_dim();
  const auto p = sys.output_dim();
  const Matrix& C = sys.C();

  // C A_cl^k for k = 0..T.
  std::vector<Matrix> c_pow;
  c_pow.reserve(static_cast<std::size_t>(horizon) + 1);
  c_pow.push_back(C);
  for (int k = 1; k <= horizon; ++k) c_pow.push_back(c_pow.back() * a_cl);

  StackingOperators ops{Matrix::Zero(horizon * p, horizon * n), Matrix::Zero(horizon * p, n)};
  for (int s = 0; s < horizon; ++s) {
    for (int t = 0; t <= s; ++t) ops.U.block(s * p, t * n, p, n) = c_pow[static_cast<std::size_t>(s - t)];
    ops.V.block(s * p, 0, p, n) = c_pow[static_cast<std::size_t>(s) + 1];
  }
  return ops;
}

StackedGaussian stacked_distribution(const LtiSystem& sys, const FeedbackController& ctrl,
                                     int horizon) {
  const auto ops = stacking_operators(sys, ctrl, horizon);
  const auto n = sys.state_dim();
  const auto p = sys.output_dim();

  const Vector mu_W = sys.mu_w().replicate(horizon, 1);
  Matrix Sigma_W = Matrix::Zero(horizon * n, horizon * n);
  Matrix Sigma_E = Matrix::Zero(horizon * p, horizon * p);
  for (int k = 0; k < horizon; ++k) {
    Sigma_W.block(k * n, k * n, n, n) = sys.Sigma_w();
    Sigma_E.block(k * p, k * p, p, p) = sys.Sigma_e();
  }

  StackedGaussian out;
  out.horizon = horizon;
  out.hypothesis = hypothesis_of(ctrl);
  out.mean = ops.U * mu_W + ops.V * sys.mu_0();
  out.cov = symmetrized(ops.U * Sigma_W * ops.U.transpose() +
                        ops.V * sys.Sigma_0() * ops.V.transpose() + Sigma_E);
  checked_psd(out.cov, "stacked covariance");
  return out;
}

StackedGaussian stacked_distribution_recursive(const LtiSystem& sys, const FeedbackController& ctrl,
                                               int horizon) {
  require_horizon(horizon);
  const Matrix a_cl = closed_loop_matrix(sys, ctrl);
  const auto p = sys.output_dim();
  const Matrix& C = sys.C();

  StackedGaussian out;
  out.horizon = horizon;
  out.hypothesis = hypothesis_of(ctrl);
  out.mean.resize(horizon * p);
  out.cov.resize(horizon * p, horizon * p);

  Vector m = sys.mu_0();
  Matrix var = sys.Sigma_0();
  for (int t = 0; t < horizon; ++t) {
    // Advance to x_{t+1}; observation index t holds y_{t+1}.
    m = a_cl * m + sys.mu_w();
    var = a_cl * var * a_cl.transpose() + sys.Sigma_w();
    var = symmetrized(var);
    out.mean.segment(t * p, p) = C * m;

    // Cov(x_{s+1}, x_{t+1}) = A_cl^{s-t} Var(x_{t+1}) for s >= t.
    Matrix cross = var * C.transpose();
    for (int s = t; s < horizon; ++s) {
      const Matrix block = C * cross;
      out.cov.block(s * p, t * p, p, p) = block;
      if (s != t) out.cov.block(t * p, s * p, p, p) = block.transpose();
      cross = a_cl * cross;
    }
    out.cov.block(t * p, t * p, p, p) =
        symmetrized(out.cov.block(t * p, t * p, p, p) + sys.Sigma_e());
  }
  return out;
}

bool distinguishable(const StackedGaussian& d0, const StackedGaussian& d1) {
  if (d0.horizon != d1.horizon || d0.mean.size() != d1.mean.size()) {
    std::ostringstream os;
    os << "horizon mismatch: " << d0.horizon << " vs " << d1.horizon;
    fail(ErrorKind::DimensionMismatch, os.str());
  }
  const double mean_gap = (d0.mean - d1.mean).cwiseAbs().maxCoeff();
  const double cov_gap = (d0.cov - d1.cov).cwiseAbs().maxCoeff();
  return mean_gap > kTolDistinguish || cov_gap > kTolDistinguish;
}

}  // namespace mhlti
