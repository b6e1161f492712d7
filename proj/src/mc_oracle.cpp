#include "mhlti/mc_oracle.hpp"

#include "mhlti/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace mhlti {

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Neumaier-compensated running sum.
class Accumulator {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  [[nodiscard]] double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

Matrix psd_root(const Matrix& cov) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (cov + cov.transpose()));
  if (es.info() != Eigen::Success) fail(ErrorKind::EigenFailure, "eigensolver failed on covariance");
  const Vector root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal();
}

// Precomputed closed loop and noise factors for one controller.
class Simulator {
 public:
  Simulator(const LtiSystem& sys, const FeedbackController& ctrl)
      : a_cl_(closed_loop_matrix(sys, ctrl)),
        C_(sys.C()),
        mu_w_(sys.mu_w()),
        mu_0_(sys.mu_0()),
        root_w_(psd_root(sys.Sigma_w())),
        root_e_(psd_root(sys.Sigma_e())),
        root_0_(psd_root(sys.Sigma_0())) {}

  [[nodiscard]] Vector initial_state(std::mt19937_64& rng) const {
    return mu_0_ + root_0_ * gauss(rng, mu_0_.size());
  }

  void step(Vector& x, std::mt19937_64& rng) const {
    x = a_cl_ * x + mu_w_ + root_w_ * gauss(rng, x.size());
  }

  [[nodiscard]] Vector observe(const Vector& x, std::mt19937_64& rng) const {
    return C_ * x + root_e_ * gauss(rng, C_.rows());
  }

  [[nodiscard]] Vector trajectory(int T, std::mt19937_64& rng) const {
    const auto p = C_.rows();
    Vector y(T * p);
    Vector x = initial_state(rng);
    for (int k = 0; k < T; ++k) {
      step(x, rng);
      y.segment(k * p, p) = observe(x, rng);
    }
    return y;
  }

 private:
  static Vector gauss(std::mt19937_64& rng, Eigen::Index n) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector z(n);
    for (Eigen::Index i = 0; i < n; ++i) z[i] = normal(rng);
    return z;
  }

  Matrix a_cl_, C_;
  Vector mu_w_, mu_0_;
  Matrix root_w_, root_e_, root_0_;
};

// Runs body(index, rng) for every sample, chunk by chunk.
template <class Body>
void for_each_sample(std::size_t n, std::uint64_t seed, std::uint64_t stream, Execution exec,
                     Body&& body) {
  const auto chunks = static_cast<long>((n + kMcChunk - 1) / kMcChunk);
#pragma omp parallel for schedule(dynamic, 1) if (exec == Execution::Parallel)
  for (long c = 0; c < chunks; ++c) {
    std::mt19937_64 rng(stream_seed(seed, stream, static_cast<std::uint64_t>(c)));
    const std::size_t begin = static_cast<std::size_t>(c) * kMcChunk;
    const std::size_t end = std::min(n, begin + kMcChunk);
    for (std::size_t i = begin; i < end; ++i) body(i, rng);
  }
}

Estimate mean_and_error(const std::vector<double>& xs) {
  if (xs.empty()) return {};
  Accumulator sum;
  for (double x : xs) sum.add(x);
  const double n = static_cast<double>(xs.size());
  const double mean = sum.value() / n;
  Accumulator sq;
  for (double x : xs) sq.add((x - mean) * (x - mean));
  const double var = xs.size() > 1 ? sq.value() / (n - 1.0) : 0.0;
  return {mean, std::sqrt(var / n)};
}

std::uint64_t id(Stream s) { return static_cast<std::uint64_t>(s); }

}  // namespace

std::uint64_t stream_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t chunk) {
  return splitmix64(splitmix64(splitmix64(master) ^ stream) ^ (chunk * 0xD1B54A32D192ED03ULL));
}

Vector simulate_trajectory(const LtiSystem& sys, const FeedbackController& ctrl, int T,
                           std::mt19937_64& rng) {
  if (T < 1) fail(ErrorKind::InvalidArgument, "horizon T must be >= 1");
  return Simulator(sys, ctrl).trajectory(T, rng);
}

Matrix simulate_trajectories(const LtiSystem& sys, const FeedbackController& ctrl, int T,
                             std::size_t n, std::uint64_t seed, std::uint64_t stream,
                             Execution exec) {
  if (T < 1) fail(ErrorKind::InvalidArgument, "horizon T must be >= 1");
  const Simulator sim(sys, ctrl);
  Matrix out(T * sys.output_dim(), static_cast<Eigen::Index>(n));
  for_each_sample(n, seed, stream, exec, [&](std::size_t i, std::mt19937_64& rng) {
    out.col(static_cast<Eigen::Index>(i)) = sim.trajectory(T, rng);
  });
  return out;
}

std::vector<double> simulate_llr(const LtiSystem& sys, const FeedbackController& ctrl,
                                 const StackedGaussian& d0, const StackedGaussian& d1, std::size_t n,
                                 std::uint64_t seed, std::uint64_t stream, Execution exec) {
  if (d0.horizon != d1.horizon) fail(ErrorKind::DimensionMismatch, "horizon mismatch");
  const Simulator sim(sys, ctrl);
  const GaussianFactor f0(d0);
  const GaussianFactor f1(d1);
  std::vector<double> out(n);
  for_each_sample(n, seed, stream, exec, [&](std::size_t i, std::mt19937_64& rng) {
    out[i] = llr_value(sim.trajectory(d0.horizon, rng), f0, f1);
  });
  return out;
}

std::vector<double> sample_law(const GChi2Law& law, std::size_t n, std::uint64_t seed,
                               std::uint64_t stream, Execution exec) {
  law.validate();
  std::vector<double> out(n);
  for_each_sample(n, seed, stream, exec, [&](std::size_t i, std::mt19937_64& rng) {
    out[i] = sample(law, rng, 1).front();
  });
  return out;
}

Estimate tail_frequency(const std::vector<double>& samples, double x) {
  if (samples.empty()) return {};
  const auto hits = std::count_if(samples.begin(), samples.end(), [x](double s) { return s >= x; });
  const double n = static_cast<double>(samples.size());
  const double p = static_cast<double>(hits) / n;
  return {p, std::sqrt(p * (1.0 - p) / n)};
}

EmpiricalAlphaBeta empirical_alpha_beta(const LtiSystem& sys, const FeedbackController& low,
                                        const FeedbackController& high, double eta, int T,
                                        std::size_t n, std::uint64_t seed, Execution exec) {
  const auto d0 = stacked_distribution_recursive(sys, low, T);
  const auto d1 = stacked_distribution_recursive(sys, high, T);
  return {tail_frequency(simulate_llr(sys, low, d0, d1, n, seed, id(Stream::Low), exec), eta),
          tail_frequency(simulate_llr(sys, high, d0, d1, n, seed, id(Stream::High), exec), eta)};
}

Estimate empirical_discounted_cost(const LtiSystem& sys, const FeedbackController& ctrl,
                                   const Matrix& weight, const Vector& linear, double gamma,
                                   int horizon, std::size_t n, std::uint64_t seed,
                                   std::uint64_t stream, Execution exec) {
  if (horizon < 1) fail(ErrorKind::InvalidArgument, "truncation horizon must be >= 1");
  const Simulator sim(sys, ctrl);
  std::vector<double> totals(n);
  for_each_sample(n, seed, stream, exec, [&](std::size_t i, std::mt19937_64& rng) {
    Vector x = sim.initial_state(rng);
    Accumulator acc;
    double discount = 1.0;
    for (int t = 0; t < horizon; ++t) {
      acc.add(discount * (x.dot(weight * x) + linear.dot(x)));
      discount *= gamma;
      sim.step(x, rng);
    }
    totals[i] = acc.value();
  });
  return mean_and_error(totals);
}

Estimate empirical_agent_cost(const LtiSystem& sys, const FeedbackController& ctrl,
                              const AgentCostSpec& spec, int horizon, std::size_t n,
                              std::uint64_t seed, std::uint64_t stream, Execution exec) {
  const Matrix weight = ctrl.K.transpose() * spec.R * ctrl.K;
  const Vector linear = ctrl.K.transpose() * spec.r;
  return empirical_discounted_cost(sys, ctrl, weight, linear, spec.gamma_a, horizon, n, seed, stream,
                                   exec);
}

Estimate empirical_cost_gap(const LtiSystem& sys, const FeedbackController& low,
                            const FeedbackController& high, const AgentCostSpec& spec, int horizon,
                            std::size_t n, std::uint64_t seed, Execution exec) {
  const auto c0 = empirical_agent_cost(sys, low, spec, horizon, n, seed, id(Stream::Low), exec);
  const auto c1 = empirical_agent_cost(sys, high, spec, horizon, n, seed, id(Stream::High), exec);
  return {c1.value - c0.value, std::hypot(c0.std_error, c1.std_error)};
}

int truncation_horizon(double gamma, double step_bound, double target) {
  if (!(gamma > 0.0 && gamma < 1.0)) fail(ErrorKind::InvalidArgument, "gamma must lie in (0, 1)");
  if (!(target > 0.0)) fail(ErrorKind::InvalidArgument, "target must be > 0");
  if (step_bound <= 0.0) return 1;
  // step_bound * gamma^H / (1 - gamma) < target
  const double h = std::log(target * (1.0 - gamma) / step_bound) / std::log(gamma);
  return std::max(1, static_cast<int>(std::ceil(h)) + 1);
}

IcReport ic_experiment(const DesignConfig& config, const SweepRow& row, std::size_t n,
                       std::uint64_t seed, Execution exec) {
  const auto& sys = config.system;
  double j_low = 0.0;
  double j_high = 0.0;
  if (config.agent.cost_gap_override) {
    j_high = *config.agent.cost_gap_override;
  } else {
    j_low = discounted_agent_cost(sys, config.low, config.agent);
    j_high = discounted_agent_cost(sys, config.high, config.agent);
  }
  const auto d0 = stacked_distribution_recursive(sys, config.low, row.T);
  const auto d1 = stacked_distribution_recursive(sys, config.high, row.T);
  const auto p0 = tail_frequency(simulate_llr(sys, config.low, d0, d1, n, seed, id(Stream::Low), exec), row.eta);
  const auto p1 = tail_frequency(simulate_llr(sys, config.high, d0, d1, n, seed, id(Stream::High), exec), row.eta);

  const double u0 = config.utility.value(row.pi0);
  const double du = config.utility.value(row.pi1) - u0;
  const double disc = std::pow(config.agent.gamma_a, row.T);
  IcReport rep;
  rep.cost_low = j_low - disc * (u0 + du * p0.value);
  rep.cost_high = j_high - disc * (u0 + du * p1.value);
  rep.difference = rep.cost_high - rep.cost_low;
  rep.std_error = disc * std::abs(du) * std::hypot(p0.std_error, p1.std_error);
  rep.high_effort_preferred = rep.difference <= 3.0 * rep.std_error;
  return rep;
}

McValidation validate_row(const DesignConfig& config, const SweepRow& row, std::size_t n,
                          std::uint64_t seed, Execution exec) {
  McValidation v;
  v.samples = n;
  v.seed = seed;
  v.alpha = row.alpha;
  v.beta = row.beta;
  v.empirical = empirical_alpha_beta(config.system, config.low, config.high, row.eta, row.T, n, seed, exec);
  // The analytic values carry the survival evaluator's own error on top.
  const double slack = config.tol.cdf;
  v.alpha_agrees = std::abs(v.empirical.alpha.value - row.alpha) <= 3.0 * v.empirical.alpha.std_error + slack;
  v.beta_agrees = std::abs(v.empirical.beta.value - row.beta) <= 3.0 * v.empirical.beta.std_error + slack;
  v.ic = ic_experiment(config, row, n, seed, exec);
  return v;
}

}  // namespace mhlti
