#include "mhlti/gchi2_dist.hpp"

#include "mhlti/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace mhlti {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr std::size_t kMaxNodes = std::size_t{1} << 24;
// Node count above which a law that qualifies is evaluated by conditioning.
constexpr std::size_t kConditioningNodes = std::size_t{1} << 18;
constexpr std::size_t kMaxConditionedDims = 2;
// Standard normal coordinates are integrated over [-kZRange, kZRange].
constexpr double kZRange = 6.5;

double normal_sf(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

// P[w (Z + nu)^2 >= y]
double term_sf(double w, double nu, double y) {
  if (w > 0.0) {
    if (y <= 0.0) return 1.0;
    const double r = std::sqrt(y / w);
    return normal_sf(r - nu) + normal_sf(r + nu);
  }
  if (y >= 0.0) return 0.0;
  const double r = std::sqrt(y / w);
  return 1.0 - normal_sf(r - nu) - normal_sf(r + nu);
}

// Gauss-Kronrod 7/15 abscissae and weights.
constexpr double kXgk[8] = {0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                            0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                            0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                            0.207784955007898467600689403773245, 0.0};
constexpr double kWgk[8] = {0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                            0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                            0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                            0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                           0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <class F>
double gauss_kronrod(const F& f, double a, double b, double& err) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const double fc = f(c);
  double kronrod = fc * kWgk[7];
  double gauss = fc * kWg[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = h * kXgk[j];
    const double pair = f(c - dx) + f(c + dx);
    kronrod += kWgk[j] * pair;
    if (j % 2 == 1) gauss += kWg[j / 2] * pair;
  }
  err = std::abs((kronrod - gauss) * h);
  return kronrod * h;
}

template <class F>
double adaptive_integral(const F& f, double a, double b, double tol, int depth = 0) {
  double err = 0.0;
  const double v = gauss_kronrod(f, a, b, err);
  if (err <= tol || depth >= 40) return v;
  const double m = 0.5 * (a + b);
  return adaptive_integral(f, a, m, 0.5 * tol, depth + 1) + adaptive_integral(f, m, b, 0.5 * tol, depth + 1);
}

// Integral of f over [a, b] through z = a + (b - a)(3u^2 - 2u^3), which
// removes square-root behaviour at both ends.
template <class F>
double smoothed_integral(const F& f, double a, double b, double tol) {
  const double len = b - a;
  auto g = [&](double u) { return f(a + len * u * u * (3.0 - 2.0 * u)) * 6.0 * len * u * (1.0 - u); };
  return adaptive_integral(g, 0.0, 1.0, tol);
}

// w g^2 + b g per component, plus sigma Z + shift.
struct CentredForm {
  std::vector<double> w;
  std::vector<double> b_sq;
  double sigma = 0.0;
  double shift = 0.0;

  [[nodiscard]] double variance() const {
    double v = sigma * sigma;
    for (std::size_t j = 0; j < w.size(); ++j) v += 2.0 * w[j] * w[j] + b_sq[j];
    return v;
  }

  [[nodiscard]] CentredForm negated() const {
    CentredForm out = *this;
    for (auto& x : out.w) x = -x;
    out.shift = -shift;
    return out;
  }

  // Cumulant generating function; +inf outside the domain 1 - 2 w t > 0.
  [[nodiscard]] double log_mgf(double t) const {
    double k = shift * t + 0.5 * sigma * sigma * t * t;
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double d = 1.0 - 2.0 * w[j] * t;
      if (!(d > 0.0)) return std::numeric_limits<double>::infinity();
      k += -0.5 * std::log(d) + 0.5 * b_sq[j] * t * t / d;
    }
    return k;
  }

  // log |phi(t)|
  [[nodiscard]] double log_abs_cf(double t) const {
    const double t2 = t * t;
    double acc = -0.5 * sigma * sigma * t2;
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double d = 1.0 + 4.0 * w[j] * w[j] * t2;
      acc -= 0.5 * b_sq[j] * t2 / d + 0.25 * std::log(d);
    }
    return acc;
  }

  // arg phi(t) - shift * t
  [[nodiscard]] double phase(double t) const {
    const double t2 = t * t;
    double acc = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double d = 1.0 + 4.0 * w[j] * w[j] * t2;
      acc += 0.5 * std::atan(2.0 * w[j] * t) - b_sq[j] * w[j] * t2 * t / d;
    }
    return acc;
  }

  // Upper bound on |phi(2t)| / |phi(t)| that is non-increasing in t.
  [[nodiscard]] double decay_ratio(double t) const {
    const double t2 = t * t;
    double log_ratio = -1.5 * sigma * sigma * t2;
    for (double wj : w) {
      const double a = 4.0 * wj * wj * t2;
      log_ratio += 0.25 * (std::log1p(a) - std::log1p(4.0 * a));
    }
    return std::exp(log_ratio);
  }
};

CentredForm centred(const GChi2Law& law) {
  CentredForm f;
  f.w = law.weights;
  f.b_sq.resize(law.weights.size());
  f.sigma = law.sigma;
  f.shift = law.offset;
  for (std::size_t j = 0; j < law.weights.size(); ++j) {
    const double w = law.weights[j];
    f.b_sq[j] = 4.0 * w * w * law.noncentralities[j];
    f.shift += w * law.noncentralities[j];
  }
  return f;
}

// min over t in (0, t_pole) of (K(t) - log eps) / t; the objective is
// quasi-convex in t, so golden section on log t finds the minimum.
double chernoff_upper(const CentredForm& f, double eps) {
  const double sd = std::sqrt(f.variance());
  if (sd == 0.0) return f.shift;
  const double log_eps = std::log(eps);
  auto bound = [&](double t) { return (f.log_mgf(t) - log_eps) / t; };

  double t_pole = std::numeric_limits<double>::infinity();
  for (double w : f.w) {
    if (w > 0.0) t_pole = std::min(t_pole, 0.5 / w);
  }
  double t_hi;
  if (std::isfinite(t_pole)) {
    t_hi = t_pole * (1.0 - 1e-12);
  } else {
    t_hi = 1.0 / sd;
    double prev = bound(t_hi);
    for (int i = 0; i < 400; ++i) {
      const double next = bound(2.0 * t_hi);
      t_hi *= 2.0;
      if (!(next < prev)) break;
      prev = next;
    }
  }
  double a = std::log(std::min(t_hi, 1.0 / sd) * 1e-6);
  double b = std::log(t_hi);
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = bound(std::exp(c));
  double fd = bound(std::exp(d));
  double best = std::min(fc, fd);
  for (int i = 0; i < 200 && (b - a) > 1e-12; ++i) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = bound(std::exp(c));
      best = std::min(best, fc);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = bound(std::exp(d));
      best = std::min(best, fd);
    }
  }
  if (!std::isfinite(best)) fail(ErrorKind::QuadratureFailure, "Chernoff bound is not finite");
  return best;
}

}  // namespace

double chernoff_upper(const GChi2Law& law, double eps) {
  law.validate();
  if (law.degenerate()) return law.offset;
  return chernoff_upper(centred(law), eps);
}

double chernoff_lower(const GChi2Law& law, double eps) {
  law.validate();
  if (law.degenerate()) return law.offset;
  return -chernoff_upper(centred(law).negated(), eps);
}

SurvivalEvaluator::SurvivalEvaluator(const GChi2Law& law, double tol) : tol_(tol) {
  law.validate();
  if (!(tol > 0.0 && tol < 1.0)) fail(ErrorKind::InvalidArgument, "tolerance must lie in (0, 1)");
  mean_ = law_mean(law);
  sd_ = std::sqrt(law_variance(law));
  if (law.degenerate()) {
    degenerate_ = true;
    point_ = law.offset;
    support_ = {point_, point_};
    return;
  }

  const CentredForm f = centred(law);
  shift_ = f.shift;
  const double eps = tol / 8.0;
  support_ = {-chernoff_upper(f.negated(), eps), chernoff_upper(f, eps)};
  const double width = support_.hi - support_.lo;
  if (!(width > 0.0) || !std::isfinite(width)) {
    fail(ErrorKind::QuadratureFailure, "support interval of the law is empty or infinite");
  }
  const double step = 2.0 * kPi / width;

  // Bound on int_t^inf |phi(s)|/s ds <= sum_m |phi(2^m t)|, with a geometric
  // remainder once the ratio bound is below one.
  auto tail_integral = [&](double t) {
    double total = 0.0;
    for (int m = 0; m < 200; ++m) {
      const double term = std::exp(f.log_abs_cf(t));
      total += term;
      const double ratio = f.decay_ratio(t);
      if (ratio < 1.0) {
        const double remainder = term * ratio / (1.0 - ratio);
        if (remainder < 1e-3 * tol || term == 0.0) return total + remainder;
      }
      t *= 2.0;
    }
    return std::numeric_limits<double>::infinity();
  };
  const double trunc_target = kPi * tol / 4.0;
  auto node = [&](std::size_t k) { return (static_cast<double>(k) + 0.5) * step; };

  const std::size_t dims = law.weights.size() - (law.sigma > 0.0 ? 0 : 1);
  const bool can_condition = dims <= kMaxConditionedDims;
  const std::size_t budget = can_condition ? kConditioningNodes : kMaxNodes;
  std::size_t hi = 1;
  while (tail_integral(node(hi)) > trunc_target) {
    hi *= 2;
    if (hi > budget) {
      if (!can_condition) fail(ErrorKind::QuadratureFailure, "characteristic function decays too slowly");
      use_conditioning(law);
      return;
    }
  }
  std::size_t lo = hi / 2;
  if (tail_integral(node(lo)) <= trunc_target) lo = 0;
  while (hi - lo > 1) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (tail_integral(node(mid)) <= trunc_target) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  const std::size_t last = hi;

  node_.resize(last + 1);
  amplitude_.resize(last + 1);
  phase_.resize(last + 1);
  for (std::size_t k = 0; k <= last; ++k) {
    const double t = node(k);
    node_[k] = t;
    amplitude_[k] = std::exp(f.log_abs_cf(t)) / (kPi * (static_cast<double>(k) + 0.5));
    phase_[k] = f.phase(t);
  }
  error_bound_ = 2.0 * eps + tail_integral(node(last)) / kPi;
  if (!std::isfinite(error_bound_)) fail(ErrorKind::QuadratureFailure, "non-finite error bound");
}

void SurvivalEvaluator::use_conditioning(const GChi2Law& law) {
  conditioned_ = true;
  sigma_ = law.sigma;
  offset_ = law.offset;
  std::vector<std::size_t> order(law.weights.size());
  for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
  // The largest term is the closed-form one when there is no Gaussian part.
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(law.weights[a]) < std::abs(law.weights[b]);
  });
  if (sigma_ == 0.0) {
    inner_w_ = law.weights[order.back()];
    inner_nu_ = std::sqrt(law.noncentralities[order.back()]);
    order.pop_back();
  }
  for (std::size_t j : order) {
    cond_w_.push_back(law.weights[j]);
    cond_nu_.push_back(std::sqrt(law.noncentralities[j]));
  }
  const double dims = static_cast<double>(cond_w_.size());
  error_bound_ = 0.25 * tol_ + 2.0 * dims * normal_sf(kZRange);
}

double SurvivalEvaluator::conditioned_survival(double x, std::size_t level, double partial) const {
  if (level == cond_w_.size()) {
    return sigma_ > 0.0 ? normal_sf((x - partial) / sigma_) : term_sf(inner_w_, inner_nu_, x - partial);
  }
  const double w = cond_w_[level];
  const double nu = cond_nu_[level];
  auto integrand = [&](double z) {
    const double g = z + nu;
    return conditioned_survival(x, level + 1, partial + w * g * g) * std::exp(-0.5 * z * z) /
           std::sqrt(2.0 * kPi);
  };
  // Break where the remaining terms must jump the threshold exactly.
  std::vector<double> cuts{-kZRange};
  const double ratio = (x - partial) / w;
  if (ratio > 0.0) {
    for (double z : {-nu - std::sqrt(ratio), -nu + std::sqrt(ratio)}) {
      if (z > -kZRange && z < kZRange) cuts.push_back(z);
    }
  }
  cuts.push_back(kZRange);
  const double tol = 0.25 * tol_ / static_cast<double>(cond_w_.size() + 1);
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) total += smoothed_integral(integrand, cuts[i], cuts[i + 1], tol);
  return total;
}

double SurvivalEvaluator::operator()(double x) const {
  if (degenerate_) return x <= point_ ? 1.0 : 0.0;
  if (x <= support_.lo) return 1.0;
  if (x >= support_.hi) return 0.0;
  if (conditioned_) return std::clamp(conditioned_survival(x, 0, offset_), 0.0, 1.0);
  const double centred_x = x - shift_;
  double acc = 0.0;
  for (std::size_t k = 0; k < node_.size(); ++k) {
    acc += amplitude_[k] * std::sin(phase_[k] - node_[k] * centred_x);
  }
  return std::clamp(0.5 + acc, 0.0, 1.0);
}

std::vector<double> SurvivalEvaluator::evaluate(std::span<const double> xs, Execution exec) const {
  std::vector<double> out(xs.size());
  const auto n = static_cast<long>(xs.size());
#pragma omp parallel for schedule(static) if (exec == Execution::Parallel)
  for (long i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = (*this)(xs[static_cast<std::size_t>(i)]);
  return out;
}

Interval SurvivalEvaluator::quantile_bracket() const {
  if (degenerate_) return {point_, point_};
  // Each end is placed where the survival function crosses half the budget.
  constexpr double kTailTarget = 5e-7;
  const auto& self = *this;

  double k = 5.0;
  double lo = mean_ - k * sd_;
  double hi = mean_ + k * sd_;
  while (lo > support_.lo && self(lo) < 1.0 - kTailTarget) lo = mean_ - (k *= 1.5) * sd_;
  lo = std::max(lo, support_.lo);
  k = 5.0;
  while (hi < support_.hi && self(hi) > kTailTarget) hi = mean_ + (k *= 1.5) * sd_;
  hi = std::min(hi, support_.hi);

  // Tighten towards the mean while the tail budget still holds.
  double inner = std::min(mean_, hi);
  for (int i = 0; i < 40; ++i) {
    const double mid = 0.5 * (inner + hi);
    if (self(mid) <= kTailTarget) {
      hi = mid;
    } else {
      inner = mid;
    }
  }
  inner = std::max(mean_, lo);
  for (int i = 0; i < 40; ++i) {
    const double mid = 0.5 * (lo + inner);
    if (self(mid) >= 1.0 - kTailTarget) {
      lo = mid;
    } else {
      inner = mid;
    }
  }
  return {lo, hi};
}

double survival(const GChi2Law& law, double x) { return SurvivalEvaluator(law)(x); }

AlphaBeta alpha_beta(const GChi2Law& law0, const GChi2Law& law1, double eta) {
  return {SurvivalEvaluator(law0)(eta), SurvivalEvaluator(law1)(eta)};
}

Interval quantile_bracket(const GChi2Law& law) { return SurvivalEvaluator(law).quantile_bracket(); }

}  // namespace mhlti
