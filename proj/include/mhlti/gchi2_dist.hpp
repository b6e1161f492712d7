#pragma once

// Tail probabilities of generalized chi-squared laws by numerical inversion of
// the characteristic function (Imhof's integral, evaluated with Davies's
// trapezoidal scheme):
//
//   P[Q >= x] = 1/2 + (1/pi) sum_{k>=0} Im[phi(t_k) e^{-i t_k x}] / (k + 1/2),
//   t_k = (k + 1/2) * step.
//
// The step is chosen so that 2*pi/step covers a Chernoff-bounded support
// interval, which bounds the aliasing error; the sum is cut where a bound on
// the remaining integral drops below a quarter of the tolerance. Nodes depend
// only on the law, so they are computed once and reused for every threshold.
//
// Laws with one to three chi-squared terms can have characteristic functions
// that decay like t^{-1/2}, for which the cut point is out of reach. Those are
// evaluated by conditioning instead: one term (or the Gaussian part) is
// integrated in closed form and at most two standard normal coordinates by
// adaptive Gauss-Kronrod quadrature.

#include "mhlti/execution.hpp"
#include "mhlti/llr_engine.hpp"

#include <span>
#include <vector>

namespace mhlti {

inline constexpr double kTolCdf = 1e-6;

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct AlphaBeta {
  double alpha = 0.0;
  double beta = 0.0;
};

class SurvivalEvaluator {
 public:
  explicit SurvivalEvaluator(const GChi2Law& law, double tol = kTolCdf);

  /// P[Q >= x], clamped to [0, 1].
  [[nodiscard]] double operator()(double x) const;

  [[nodiscard]] std::vector<double> evaluate(std::span<const double> xs,
                                             Execution exec = Execution::Parallel) const;

  /// Interval outside of which each tail holds at most tol/8 (Chernoff bound).
  [[nodiscard]] Interval support() const { return support_; }
  /// Interval holding at least 1 - 1e-6 of the mass, refined by bisection on
  /// the survival function.
  [[nodiscard]] Interval quantile_bracket() const;

  [[nodiscard]] std::size_t node_count() const { return amplitude_.size(); }
  /// True when the law is evaluated by conditioning rather than inversion.
  [[nodiscard]] bool conditioned() const { return conditioned_; }
  /// Bound on |computed - exact| for thresholds inside support(). For the
  /// conditioning route this is the quadrature target, not a proven bound.
  [[nodiscard]] double error_bound() const { return error_bound_; }
  [[nodiscard]] double tolerance() const { return tol_; }

 private:
  void use_conditioning(const GChi2Law& law);
  [[nodiscard]] double conditioned_survival(double x, std::size_t level, double partial) const;

  double tol_;
  bool degenerate_ = false;
  bool conditioned_ = false;
  std::vector<double> cond_w_;   // terms integrated numerically, outermost first
  std::vector<double> cond_nu_;  // |nu| of those terms
  double inner_w_ = 0.0;         // closed-form term when sigma == 0
  double inner_nu_ = 0.0;
  double sigma_ = 0.0;
  double offset_ = 0.0;
  double point_ = 0.0;  // location of a degenerate law
  double shift_ = 0.0;  // offset + sum w nu^2
  double mean_ = 0.0;
  double sd_ = 0.0;
  Interval support_;
  double error_bound_ = 0.0;
  std::vector<double> node_;       // t_k
  std::vector<double> amplitude_;  // |phi(t_k)| / (pi (k + 1/2))
  std::vector<double> phase_;      // arg phi(t_k) without the shift
};

double survival(const GChi2Law& law, double x);

AlphaBeta alpha_beta(const GChi2Law& law0, const GChi2Law& law1, double eta);

Interval quantile_bracket(const GChi2Law& law);

/// Chernoff bound: smallest x found with P[Q >= x] <= eps.
double chernoff_upper(const GChi2Law& law, double eps);
/// Chernoff bound: largest x found with P[Q <= x] <= eps.
double chernoff_lower(const GChi2Law& law, double eps);

}  // namespace mhlti
