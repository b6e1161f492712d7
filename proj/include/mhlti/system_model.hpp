#pragma once

// Plant, controllers, cost specifications and utility for the two-effort
// incentive problem. The plant is
//
//   x_{k+1} = A x_k + B u_k + w_k,   w_k ~ N(mu_w, Sigma_w)
//   y_k     = C x_k + e_k,           e_k ~ N(0, Sigma_e)
//   x_0 ~ N(mu_0, Sigma_0),          u_k = K x_k
//
// A non-zero mu_w makes the dynamics affine.

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace mhlti {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kTolPsd = 1e-9;
inline constexpr double kTolSeries = 1e-10;

enum class Effort { Low, High };

/// Symmetrizes `m` and checks its smallest eigenvalue against -kTolPsd.
/// Throws NotPositiveSemidefinite naming `what`.
Matrix checked_psd(const Matrix& m, const std::string& what);

class LtiSystem {
 public:
  LtiSystem(Matrix A, Matrix B, Matrix C, Vector mu_w, Matrix Sigma_w, Matrix Sigma_e,
            Vector mu_0, Matrix Sigma_0);

  [[nodiscard]] const Matrix& A() const { return A_; }
  [[nodiscard]] const Matrix& B() const { return B_; }
  [[nodiscard]] const Matrix& C() const { return C_; }
  [[nodiscard]] const Vector& mu_w() const { return mu_w_; }
  [[nodiscard]] const Matrix& Sigma_w() const { return Sigma_w_; }
  [[nodiscard]] const Matrix& Sigma_e() const { return Sigma_e_; }
  [[nodiscard]] const Vector& mu_0() const { return mu_0_; }
  [[nodiscard]] const Matrix& Sigma_0() const { return Sigma_0_; }

  [[nodiscard]] Eigen::Index state_dim() const { return A_.rows(); }
  [[nodiscard]] Eigen::Index input_dim() const { return B_.cols(); }
  [[nodiscard]] Eigen::Index output_dim() const { return C_.rows(); }

 private:
  Matrix A_, B_, C_;
  Vector mu_w_;
  Matrix Sigma_w_, Sigma_e_;
  Vector mu_0_;
  Matrix Sigma_0_;
};

struct FeedbackController {
  Matrix K;  // q x n, u = K x
  Effort effort = Effort::Low;
};

struct AgentCostSpec {
  Matrix R;  // q x q
  Vector r;  // q
  double gamma_a = 0.995;
  std::optional<double> cost_gap_override;

  void validate() const;
};

struct PrincipalCostSpec {
  Matrix Q;      // n x n
  Vector q_vec;  // n
  double gamma_p = 0.998;
  /// (J^P_0, J^P_1) supplied directly.
  std::optional<std::pair<double, double>> state_cost_override;

  void validate() const;
};

/// Concave utility with U(0) = 0. `Sqrt` and `Power` are defined for
/// payments >= 0 only; `Exponential` (CARA) is defined on all of R and is the
/// family to use when fines (negative payments) are allowed.
class UtilityFunction {
 public:
  enum class Family { Sqrt, Power, Exponential };

  static UtilityFunction sqrt() { return UtilityFunction(Family::Sqrt, 0.5); }
  static UtilityFunction power(double rho);
  static UtilityFunction exponential(double rho);

  [[nodiscard]] Family family() const { return family_; }
  [[nodiscard]] double rho() const { return rho_; }
  [[nodiscard]] bool allows_negative_payments() const { return family_ == Family::Exponential; }

  /// U(pi). Throws UtilityDomain outside the family's payment domain.
  [[nodiscard]] double value(double payment) const;
  /// U^{-1}(v). Throws UtilityDomain when v is not in the range of U.
  [[nodiscard]] double inverse(double utility) const;

  friend bool operator==(const UtilityFunction&, const UtilityFunction&) = default;

 private:
  UtilityFunction(Family family, double rho) : family_(family), rho_(rho) {}

  Family family_;
  double rho_;
};

std::string to_string(UtilityFunction::Family family);

struct StateMoments {
  Vector mean;           // m_t = E[x_t]
  Matrix second_moment;  // P_t = E[x_t x_t^T]
};

Matrix closed_loop_matrix(const LtiSystem& sys, const FeedbackController& ctrl);

double spectral_radius(const Matrix& m);

/// Moments for t = 0..horizon (horizon + 1 entries).
std::vector<StateMoments> propagate_moments(const LtiSystem& sys, const FeedbackController& ctrl,
                                            int horizon);

/// J^A = sum_t gamma_a^t E[u_t^T R u_t + r^T u_t], truncated once the tail
/// bound drops below kTolSeries (relative to max(1, |J|)).
double discounted_agent_cost(const LtiSystem& sys, const FeedbackController& ctrl,
                             const AgentCostSpec& spec);

/// J^P = sum_t gamma_p^t E[x_t^T Q x_t + q^T x_t].
double discounted_principal_cost(const LtiSystem& sys, const FeedbackController& ctrl,
                                 const PrincipalCostSpec& spec);

/// J^A_1 - J^A_0, or the override when one is set. Throws NonpositiveGap.
double agent_cost_gap(const LtiSystem& sys, const FeedbackController& low,
                      const FeedbackController& high, const AgentCostSpec& spec);

namespace detail {
// Same series as the discounted costs, continued to horizon_factor times the
// stopping index. Used to check truncation invariance.
double discounted_series_with_horizon(const LtiSystem& sys, const Matrix& a_cl, const Matrix& weight,
                                      const Vector& linear, double gamma, double horizon_factor);
}  // namespace detail

}  // namespace mhlti
