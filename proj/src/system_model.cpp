#include "mhlti/system_model.hpp"

#include "mhlti/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <sstream>

namespace mhlti {

namespace {

std::string dims(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

void require_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols, const char* what) {
  if (m.rows() != rows || m.cols() != cols) {
    std::ostringstream os;
    os << what << " has shape " << dims(m) << ", expected " << rows << "x" << cols;
    fail(ErrorKind::DimensionMismatch, os.str());
  }
}

void require_size(const Vector& v, Eigen::Index n, const char* what) {
  if (v.size() != n) {
    std::ostringstream os;
    os << what << " has length " << v.size() << ", expected " << n;
    fail(ErrorKind::DimensionMismatch, os.str());
  }
}

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) fail(ErrorKind::InvalidArgument, std::string(what) + " has non-finite entries");
}

void require_discount(double gamma, const char* what) {
  if (!(gamma > 0.0 && gamma < 1.0)) {
    std::ostringstream os;
    os << what << " = " << gamma << " must lie in (0, 1)";
    fail(ErrorKind::InvalidArgument, os.str());
  }
}

// Sums gamma^t (tr(W P_t) + lin^T m_t) over the closed loop. The loop stops at
// the first t where the tail estimate falls under kTolSeries * max(1, |sum|),
// then keeps going until `horizon_factor` times that index.
double discounted_series(const LtiSystem& sys, const Matrix& a_cl, const Matrix& weight,
                         const Vector& linear, double gamma, double horizon_factor = 1.0) {
  const double rho = spectral_radius(a_cl);
  if (!(gamma * rho * rho < 1.0)) {
    std::ostringstream os;
    os << "discounted cost diverges: gamma * rho(A_cl)^2 = " << gamma * rho * rho << " >= 1";
    fail(ErrorKind::Divergence, os.str());
  }
  const double growth = gamma * std::max(1.0, rho * rho);

  Vector m = sys.mu_0();
  Matrix P = sys.Sigma_0() + m * m.transpose();
  const Vector& mu_w = sys.mu_w();
  const Matrix drift = mu_w * mu_w.transpose() + sys.Sigma_w();

  constexpr long kMinSteps = 50;
  constexpr long kMaxSteps = 50'000'000;
  std::deque<double> window;
  double sum = 0.0;
  double compensation = 0.0;
  double discount = 1.0;
  long stop_at = -1;

  for (long t = 0; t < kMaxSteps; ++t) {
    const double step = (weight.cwiseProduct(P)).sum() + linear.dot(m);
    // Neumaier summation; the series runs to thousands of terms at gamma ~ 0.995.
    const double term = discount * step;
    const double next = sum + term;
    compensation += std::abs(sum) >= std::abs(term) ? (sum - next) + term : (term - next) + sum;
    sum = next;

    window.push_back(std::abs(step));
    if (window.size() > static_cast<std::size_t>(kMinSteps)) window.pop_front();

    discount *= gamma;
    if (stop_at < 0 && t >= kMinSteps) {
      const double recent = *std::max_element(window.begin(), window.end());
      const double tail = discount * 2.0 * recent / (1.0 - growth);
      if (tail < kTolSeries * std::max(1.0, std::abs(sum + compensation))) {
        stop_at = static_cast<long>(std::ceil(static_cast<double>(t + 1) * horizon_factor));
      }
    }
    if (stop_at >= 0 && t + 1 >= stop_at) return sum + compensation;

    const Vector am = a_cl * m;
    P = a_cl * P * a_cl.transpose() + am * mu_w.transpose() + mu_w * am.transpose() + drift;
    P = 0.5 * (P + P.transpose()).eval();
    m = am + mu_w;
  }
  fail(ErrorKind::Divergence, "discounted cost series did not reach tolerance");
}

}  // namespace

Matrix checked_psd(const Matrix& m, const std::string& what) {
  if (m.rows() != m.cols()) fail(ErrorKind::DimensionMismatch, what + " is not square");
  Matrix sym = 0.5 * (m + m.transpose());
  if (sym.size() == 0) return sym;
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) fail(ErrorKind::EigenFailure, "eigensolver failed on " + what);
  const double smallest = es.eigenvalues().minCoeff();
  if (smallest < -kTolPsd) {
    std::ostringstream os;
    os << what << " is not positive semidefinite (smallest eigenvalue " << smallest << ")";
    fail(ErrorKind::NotPositiveSemidefinite, os.str());
  }
  return sym;
}

LtiSystem::LtiSystem(Matrix A, Matrix B, Matrix C, Vector mu_w, Matrix Sigma_w, Matrix Sigma_e,
                     Vector mu_0, Matrix Sigma_0)
    : A_(std::move(A)),
      B_(std::move(B)),
      C_(std::move(C)),
      mu_w_(std::move(mu_w)),
      mu_0_(std::move(mu_0)) {
  const auto n = A_.rows();
  require_shape(A_, n, n, "A");
  if (n == 0) fail(ErrorKind::DimensionMismatch, "A must be non-empty");
  require_shape(B_, n, B_.cols(), "B");
  if (B_.cols() == 0) fail(ErrorKind::DimensionMismatch, "B must have at least one column");
  require_shape(C_, C_.rows(), n, "C");
  if (C_.rows() == 0) fail(ErrorKind::DimensionMismatch, "C must have at least one row");
  const auto p = C_.rows();
  require_size(mu_w_, n, "mu_w");
  require_size(mu_0_, n, "mu_0");
  require_shape(Sigma_w, n, n, "Sigma_w");
  require_shape(Sigma_e, p, p, "Sigma_e");
  require_shape(Sigma_0, n, n, "Sigma_0");
  require_finite(A_, "A");
  require_finite(B_, "B");
  require_finite(C_, "C");
  require_finite(mu_w_, "mu_w");
  require_finite(mu_0_, "mu_0");
  Sigma_w_ = checked_psd(Sigma_w, "Sigma_w");
  Sigma_e_ = checked_psd(Sigma_e, "Sigma_e");
  Sigma_0_ = checked_psd(Sigma_0, "Sigma_0");
}

void AgentCostSpec::validate() const {
  require_discount(gamma_a, "gamma_a");
  if (cost_gap_override && !(*cost_gap_override > 0.0)) {
    fail(ErrorKind::InvalidArgument, "cost_gap override must be > 0");
  }
  if (R.rows() != R.cols()) fail(ErrorKind::DimensionMismatch, "R must be square");
  if (r.size() != R.rows()) fail(ErrorKind::DimensionMismatch, "r must match R");
}

void PrincipalCostSpec::validate() const {
  require_discount(gamma_p, "gamma_p");
  if (Q.rows() != Q.cols()) fail(ErrorKind::DimensionMismatch, "Q must be square");
  if (q_vec.size() != Q.rows()) fail(ErrorKind::DimensionMismatch, "q must match Q");
}

UtilityFunction UtilityFunction::power(double rho) {
  if (!(rho > 0.0 && rho < 1.0)) fail(ErrorKind::InvalidArgument, "power utility needs rho in (0, 1)");
  return UtilityFunction(Family::Power, rho);
}

UtilityFunction UtilityFunction::exponential(double rho) {
  if (!(rho > 0.0 && std::isfinite(rho))) {
    fail(ErrorKind::InvalidArgument, "exponential utility needs rho > 0");
  }
  return UtilityFunction(Family::Exponential, rho);
}

double UtilityFunction::value(double payment) const {
  switch (family_) {
    case Family::Sqrt:
    case Family::Power:
      if (payment < 0.0) {
        fail(ErrorKind::UtilityDomain, "utility undefined for negative payment " + std::to_string(payment));
      }
      return family_ == Family::Sqrt ? std::sqrt(payment) : std::pow(payment, rho_);
    case Family::Exponential:
      return -std::expm1(-rho_ * payment) / rho_;
  }
  return 0.0;
}

double UtilityFunction::inverse(double utility) const {
  switch (family_) {
    case Family::Sqrt:
    case Family::Power:
      if (utility < 0.0) {
        fail(ErrorKind::UtilityDomain, "inverse utility undefined for " + std::to_string(utility));
      }
      return family_ == Family::Sqrt ? utility * utility : std::pow(utility, 1.0 / rho_);
    case Family::Exponential: {
      // U(pi) = (1 - exp(-rho pi)) / rho < 1 / rho.
      const double arg = rho_ * utility;
      if (!(arg < 1.0)) {
        fail(ErrorKind::UtilityDomain, "inverse utility undefined for " + std::to_string(utility));
      }
      return -std::log1p(-arg) / rho_;
    }
  }
  return 0.0;
}

std::string to_string(UtilityFunction::Family family) {
  switch (family) {
    case UtilityFunction::Family::Sqrt: return "sqrt";
    case UtilityFunction::Family::Power: return "power";
    case UtilityFunction::Family::Exponential: return "exponential";
  }
  return "unknown";
}

Matrix closed_loop_matrix(const LtiSystem& sys, const FeedbackController& ctrl) {
  require_shape(ctrl.K, sys.input_dim(), sys.state_dim(), "K");
  return sys.A() + sys.B() * ctrl.K;
}

double spectral_radius(const Matrix& m) {
  if (m.rows() != m.cols()) fail(ErrorKind::DimensionMismatch, "spectral radius needs a square matrix");
  if (m.size() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> es(m, false);
  if (es.info() != Eigen::Success) fail(ErrorKind::EigenFailure, "eigensolver failed in spectral_radius");
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

std::vector<StateMoments> propagate_moments(const LtiSystem& sys, const FeedbackController& ctrl,
                                            int horizon) {
  if (horizon < 0) fail(ErrorKind::InvalidArgument, "horizon must be >= 0");
  const Matrix a_cl = closed_loop_matrix(sys, ctrl);
  const Vector& mu_w = sys.mu_w();
  const Matrix drift = mu_w * mu_w.transpose() + sys.Sigma_w();

  std::vector<StateMoments> out;
  out.reserve(static_cast<std::size_t>(horizon) + 1);
  out.push_back({sys.mu_0(), sys.Sigma_0() + sys.mu_0() * sys.mu_0().transpose()});
  for (int t = 0; t < horizon; ++t) {
    const auto& prev = out.back();
    const Vector am = a_cl * prev.mean;
    Matrix P = a_cl * prev.second_moment * a_cl.transpose() + am * mu_w.transpose() +
               mu_w * am.transpose() + drift;
    out.push_back({am + mu_w, 0.5 * (P + P.transpose())});
  }
  return out;
}

double discounted_agent_cost(const LtiSystem& sys, const FeedbackController& ctrl,
                             const AgentCostSpec& spec) {
  spec.validate();
  require_shape(spec.R, sys.input_dim(), sys.input_dim(), "R");
  const Matrix a_cl = closed_loop_matrix(sys, ctrl);
  // u^T R u = x^T (K^T R K) x and r^T u = (K^T r)^T x.
  const Matrix weight = ctrl.K.transpose() * spec.R * ctrl.K;
  const Vector linear = ctrl.K.transpose() * spec.r;
  return discounted_series(sys, a_cl, weight, linear, spec.gamma_a);
}

double discounted_principal_cost(const LtiSystem& sys, const FeedbackController& ctrl,
                                 const PrincipalCostSpec& spec) {
  spec.validate();
  require_shape(spec.Q, sys.state_dim(), sys.state_dim(), "Q");
  const Matrix a_cl = closed_loop_matrix(sys, ctrl);
  return discounted_series(sys, a_cl, spec.Q, spec.q_vec, spec.gamma_p);
}

double agent_cost_gap(const LtiSystem& sys, const FeedbackController& low,
                      const FeedbackController& high, const AgentCostSpec& spec) {
  spec.validate();
  if (spec.cost_gap_override) return *spec.cost_gap_override;
  const double gap = discounted_agent_cost(sys, high, spec) - discounted_agent_cost(sys, low, spec);
  if (!(gap > 0.0)) {
    std::ostringstream os;
    os << "J^A_1 - J^A_0 = " << gap << " is not positive; the high-effort controller must cost more";
    fail(ErrorKind::NonpositiveGap, os.str());
  }
  return gap;
}

namespace detail {

double discounted_series_with_horizon(const LtiSystem& sys, const Matrix& a_cl, const Matrix& weight,
                                      const Vector& linear, double gamma, double horizon_factor) {
  return discounted_series(sys, a_cl, weight, linear, gamma, horizon_factor);
}

}  // namespace detail

}  // namespace mhlti
