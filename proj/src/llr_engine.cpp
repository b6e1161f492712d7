#include "mhlti/llr_engine.hpp"

#include "mhlti/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mhlti {

namespace {

void require_pair(const StackedGaussian& d0, const StackedGaussian& d1) {
  if (d0.horizon != d1.horizon || d0.mean.size() != d1.mean.size() ||
      d0.cov.rows() != d0.mean.size() || d1.cov.rows() != d1.mean.size()) {
    fail(ErrorKind::DimensionMismatch, "stacked laws must share horizon and dimension");
  }
}

Eigen::LLT<Matrix> factor(const Matrix& cov, const char* what) {
  Eigen::LLT<Matrix> llt(0.5 * (cov + cov.transpose()));
  if (llt.info() != Eigen::Success) {
    fail(ErrorKind::SingularCovariance, std::string(what) + " is not positive definite");
  }
  return llt;
}

double log_det(const Eigen::LLT<Matrix>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

Matrix symmetric_sqrt(const Matrix& cov) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (cov + cov.transpose()));
  if (es.info() != Eigen::Success) fail(ErrorKind::EigenFailure, "eigensolver failed on covariance");
  Vector values = es.eigenvalues();
  if (values.minCoeff() < -kTolPsd) {
    fail(ErrorKind::SingularCovariance, "covariance has a negative eigenvalue");
  }
  values = values.cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * values.asDiagonal() * es.eigenvectors().transpose();
}

// Splits the rotated quadratic form sum_j (w_j y_j^2 + b_j y_j) + c into the
// chi-squared part and the Gaussian part. Weights at or below
// kTolWeight * max(1, max|w|) count as zero.
GChi2Law assemble(const Vector& w, const Vector& b, double c, Hypothesis under) {
  GChi2Law law;
  law.hypothesis = under;
  const double w_max = w.size() > 0 ? w.cwiseAbs().maxCoeff() : 0.0;
  const double cutoff = kTolWeight * std::max(1.0, w_max);
  double sigma_sq = 0.0;
  double shift = 0.0;
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    if (std::abs(w[j]) > cutoff) {
      const double nu = b[j] / (2.0 * w[j]);
      law.weights.push_back(w[j]);
      law.noncentralities.push_back(nu * nu);
      shift += w[j] * nu * nu;
    } else {
      sigma_sq += b[j] * b[j];
    }
  }
  law.sigma = std::sqrt(sigma_sq);
  law.offset = c - shift;
  return law;
}

}  // namespace

void GChi2Law::validate() const {
  if (weights.size() != noncentralities.size()) {
    fail(ErrorKind::InvalidArgument, "weights and noncentralities must align");
  }
  for (std::size_t j = 0; j < weights.size(); ++j) {
    if (!std::isfinite(weights[j]) || weights[j] == 0.0) {
      fail(ErrorKind::InvalidArgument, "weights must be finite and nonzero");
    }
    if (!std::isfinite(noncentralities[j]) || noncentralities[j] < 0.0) {
      fail(ErrorKind::InvalidArgument, "noncentralities must be finite and >= 0");
    }
  }
  if (!std::isfinite(sigma) || sigma < 0.0) fail(ErrorKind::InvalidArgument, "sigma must be >= 0");
  if (!std::isfinite(offset)) fail(ErrorKind::InvalidArgument, "offset must be finite");
}

GaussianFactor::GaussianFactor(const StackedGaussian& d)
    : mean_(d.mean), llt_(factor(d.cov, "covariance")), log_det_(mhlti::log_det(llt_)) {}

double GaussianFactor::mahalanobis(const Vector& y) const {
  const Vector z = llt_.matrixL().solve(y - mean_);
  return z.squaredNorm();
}

double llr_value(const Vector& y, const GaussianFactor& f0, const GaussianFactor& f1) {
  if (y.size() != f0.dim() || y.size() != f1.dim()) {
    fail(ErrorKind::DimensionMismatch, "observation length does not match the stacked laws");
  }
  return 0.5 * (f0.log_det() - f1.log_det() + f0.mahalanobis(y) - f1.mahalanobis(y));
}

double llr_value(const Vector& y, const StackedGaussian& d0, const StackedGaussian& d1) {
  require_pair(d0, d1);
  return llr_value(y, GaussianFactor(d0), GaussianFactor(d1));
}

GChi2Law decompose(const StackedGaussian& d0, const StackedGaussian& d1, Hypothesis under) {
  require_pair(d0, d1);
  const auto llt0 = factor(d0.cov, "S_0");
  const auto llt1 = factor(d1.cov, "S_1");
  const double log_ratio = log_det(llt0) - log_det(llt1);
  const Vector D = d1.mean - d0.mean;

  const bool null = under == Hypothesis::H0;
  const Matrix root = symmetric_sqrt(null ? d0.cov : d1.cov);
  const auto& other = null ? llt1 : llt0;

  Matrix phi = root * other.solve(root);
  phi = 0.5 * (phi + phi.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> es(phi);
  if (es.info() != Eigen::Success) fail(ErrorKind::EigenFailure, "eigensolver failed on Phi");

  const Vector other_inv_d = other.solve(D);
  const Vector b = es.eigenvectors().transpose() * (root * other_inv_d);
  const Vector& lambda = es.eigenvalues();
  const Vector w = null ? Vector((1.0 - lambda.array()) / 2.0) : Vector((lambda.array() - 1.0) / 2.0);
  const double quad = D.dot(other_inv_d);
  const double c = null ? 0.5 * (log_ratio - quad) : 0.5 * (log_ratio + quad);
  return assemble(w, b, c, under);
}

std::pair<GChi2Law, GChi2Law> decompose_both(const StackedGaussian& d0, const StackedGaussian& d1) {
  require_pair(d0, d1);
  const auto llt1 = factor(d1.cov, "S_1");
  const auto L = llt1.matrixL();

  // L^{-1} S_0 L^{-T}, symmetric with the generalized eigenvalues of (S_0, S_1).
  Matrix whitened = L.solve(d0.cov);
  whitened = L.solve(whitened.transpose().eval()).eval();
  whitened = 0.5 * (whitened + whitened.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> es(whitened);
  if (es.info() != Eigen::Success) fail(ErrorKind::EigenFailure, "generalized eigensolver failed");
  const Vector& lambda = es.eigenvalues();
  if (!(lambda.minCoeff() > 0.0)) fail(ErrorKind::SingularCovariance, "S_0 is not positive definite");

  const Vector delta = es.eigenvectors().transpose() * L.solve(Vector(d1.mean - d0.mean));
  const double log_ratio = lambda.array().log().sum();

  const Vector w0 = (1.0 - lambda.array()) / 2.0;
  const Vector b0 = lambda.array().sqrt() * delta.array();
  const double c0 = 0.5 * (log_ratio - delta.squaredNorm());

  const Vector w1 = (lambda.array().inverse() - 1.0) / 2.0;
  const Vector b1 = delta.array() / lambda.array();
  const double c1 = 0.5 * (log_ratio + (delta.array().square() / lambda.array()).sum());

  return {assemble(w0, b0, c0, Hypothesis::H0), assemble(w1, b1, c1, Hypothesis::H1)};
}

double law_mean(const GChi2Law& law) {
  double mean = law.offset;
  for (std::size_t j = 0; j < law.weights.size(); ++j) {
    mean += law.weights[j] * (1.0 + law.noncentralities[j]);
  }
  return mean;
}

double law_variance(const GChi2Law& law) {
  double var = law.sigma * law.sigma;
  for (std::size_t j = 0; j < law.weights.size(); ++j) {
    const double w = law.weights[j];
    var += 2.0 * w * w * (1.0 + 2.0 * law.noncentralities[j]);
  }
  return var;
}

double gaussian_kl(const StackedGaussian& a, const StackedGaussian& b) {
  require_pair(a, b);
  const auto lla = factor(a.cov, "covariance");
  const auto llb = factor(b.cov, "covariance");
  const Vector diff = b.mean - a.mean;
  const double trace = llb.solve(a.cov).trace();
  const double quad = diff.dot(llb.solve(diff));
  const auto k = static_cast<double>(a.mean.size());
  return 0.5 * (trace + quad - k + log_det(llb) - log_det(lla));
}

std::vector<double> sample(const GChi2Law& law, std::mt19937_64& rng, std::size_t n) {
  law.validate();
  // w (g + nu)^2 - w nu^2 = w g^2 + 2 w nu g; the shift collects the w nu^2 terms.
  std::vector<double> linear(law.weights.size());
  double shift = law.offset;
  for (std::size_t j = 0; j < law.weights.size(); ++j) {
    linear[j] = 2.0 * law.weights[j] * std::sqrt(law.noncentralities[j]);
    shift += law.weights[j] * law.noncentralities[j];
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> out(n);
  for (auto& draw : out) {
    double acc = 0.0;
    for (std::size_t j = 0; j < law.weights.size(); ++j) {
      const double g = normal(rng);
      acc += law.weights[j] * g * g + linear[j] * g;
    }
    if (law.sigma > 0.0) acc += law.sigma * normal(rng);
    draw = acc + shift;
  }
  return out;
}

}  // namespace mhlti
