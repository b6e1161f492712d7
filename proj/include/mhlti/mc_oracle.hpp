#pragma once

// Simulation estimates of the analytic quantities. Every estimator returns a
// standard error. Samples are drawn in fixed-size chunks; chunk c of stream s
// owns the generator seeded with stream_seed(master, s, c), so the serial and
// parallel paths produce bit-identical results.

#include "mhlti/contract_designer.hpp"
#include "mhlti/execution.hpp"
#include "mhlti/llr_engine.hpp"
#include "mhlti/system_model.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace mhlti {

inline constexpr std::size_t kMcChunk = 4096;
inline constexpr std::size_t kMcDefaultSamples = 100000;

/// Stream identifiers used by the oracle; H0 and H1 batches never share noise.
enum class Stream : std::uint64_t { Low = 1, High = 2, LawLow = 3, LawHigh = 4 };

std::uint64_t stream_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t chunk);

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
};

/// One draw of Y_T = (y_1, ..., y_T) by forward simulation.
Vector simulate_trajectory(const LtiSystem& sys, const FeedbackController& ctrl, int T,
                           std::mt19937_64& rng);

/// n draws of Y_T, one column each.
Matrix simulate_trajectories(const LtiSystem& sys, const FeedbackController& ctrl, int T,
                             std::size_t n, std::uint64_t seed, std::uint64_t stream,
                             Execution exec = Execution::Parallel);

/// LLR(Y_T) for n trajectories simulated under `ctrl`.
std::vector<double> simulate_llr(const LtiSystem& sys, const FeedbackController& ctrl,
                                 const StackedGaussian& d0, const StackedGaussian& d1, std::size_t n,
                                 std::uint64_t seed, std::uint64_t stream,
                                 Execution exec = Execution::Parallel);

/// n draws from a generalized chi-squared law.
std::vector<double> sample_law(const GChi2Law& law, std::size_t n, std::uint64_t seed,
                               std::uint64_t stream, Execution exec = Execution::Parallel);

/// Fraction of samples >= x, with its binomial standard error.
Estimate tail_frequency(const std::vector<double>& samples, double x);

struct EmpiricalAlphaBeta {
  Estimate alpha;
  Estimate beta;
};

EmpiricalAlphaBeta empirical_alpha_beta(const LtiSystem& sys, const FeedbackController& low,
                                        const FeedbackController& high, double eta, int T,
                                        std::size_t n, std::uint64_t seed,
                                        Execution exec = Execution::Parallel);

/// Monte Carlo estimate of sum_{t < horizon} gamma^t (x_t^T W x_t + l^T x_t).
Estimate empirical_discounted_cost(const LtiSystem& sys, const FeedbackController& ctrl,
                                   const Matrix& weight, const Vector& linear, double gamma,
                                   int horizon, std::size_t n, std::uint64_t seed,
                                   std::uint64_t stream, Execution exec = Execution::Parallel);

Estimate empirical_agent_cost(const LtiSystem& sys, const FeedbackController& ctrl,
                              const AgentCostSpec& spec, int horizon, std::size_t n,
                              std::uint64_t seed, std::uint64_t stream,
                              Execution exec = Execution::Parallel);

/// J^A_1 - J^A_0 by truncated sampling on independent streams.
Estimate empirical_cost_gap(const LtiSystem& sys, const FeedbackController& low,
                            const FeedbackController& high, const AgentCostSpec& spec, int horizon,
                            std::size_t n, std::uint64_t seed, Execution exec = Execution::Parallel);

/// Smallest horizon whose discounted tail of a per-step bound `step_bound`
/// falls below `target`.
int truncation_horizon(double gamma, double step_bound, double target);

struct IcReport {
  double cost_low = 0.0;   // J^A_0 - gamma_a^T E[U(pi) | H0]
  double cost_high = 0.0;  // J^A_1 - gamma_a^T E[U(pi) | H1]
  double difference = 0.0; // cost_high - cost_low
  double std_error = 0.0;
  bool high_effort_preferred = false;  // difference <= 3 stderr
};

/// Agent's total cost under each controller facing `row`'s contract, with the
/// pay-high frequency estimated by simulation.
IcReport ic_experiment(const DesignConfig& config, const SweepRow& row, std::size_t n,
                       std::uint64_t seed, Execution exec = Execution::Parallel);

struct McValidation {
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  EmpiricalAlphaBeta empirical;
  double alpha = 0.0;  // analytic
  double beta = 0.0;   // analytic
  bool alpha_agrees = false;  // within 3 standard errors
  bool beta_agrees = false;
  IcReport ic;
};

/// Empirical alpha/beta at the row's (T, eta) against its analytic values,
/// plus the incentive-compatibility experiment.
McValidation validate_row(const DesignConfig& config, const SweepRow& row, std::size_t n,
                          std::uint64_t seed, Execution exec = Execution::Parallel);

}  // namespace mhlti
