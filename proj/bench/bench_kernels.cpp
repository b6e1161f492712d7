// Serial against OpenMP paths of the three parallel kernels: the horizon
// sweep, batched survival evaluation and Monte Carlo LLR simulation.

#include "mhlti/config.hpp"
#include "mhlti/contract_designer.hpp"
#include "mhlti/gchi2_dist.hpp"
#include "mhlti/mc_oracle.hpp"

#include <benchmark/benchmark.h>

#include <filesystem>
#include <vector>

using namespace mhlti;

namespace {

const std::filesystem::path kConfigs{MHLTI_CONFIG_DIR};

Execution exec_of(const benchmark::State& state) {
  return state.range(0) == 0 ? Execution::Serial : Execution::Parallel;
}

const char* label_of(const benchmark::State& state) { return state.range(0) == 0 ? "serial" : "parallel"; }

void BM_DesignContract(benchmark::State& state) {
  auto cfg = load_config(kConfigs / "lfc.json");
  cfg.T_max = static_cast<int>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(design_contract(cfg, exec_of(state)));
  state.SetLabel(label_of(state));
}

void BM_SurvivalGrid(benchmark::State& state) {
  const auto cfg = load_config(kConfigs / "lfc.json");
  const int T = 18;
  const auto d0 = stacked_distribution(cfg.system, cfg.low, T);
  const auto d1 = stacked_distribution(cfg.system, cfg.high, T);
  const auto [law0, law1] = decompose_both(d0, d1);
  const SurvivalEvaluator sf(law1, cfg.tol.cdf);
  const auto [lo, hi] = sf.quantile_bracket();
  std::vector<double> xs(static_cast<std::size_t>(state.range(1)));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    xs[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(xs.size() - 1);
  }
  for (auto _ : state) benchmark::DoNotOptimize(sf.evaluate(xs, exec_of(state)));
  state.SetItemsProcessed(state.iterations() * state.range(1));
  state.SetLabel(label_of(state));
}

void BM_SimulateLlr(benchmark::State& state) {
  const auto cfg = load_config(kConfigs / "lfc.json");
  const int T = 18;
  const auto d0 = stacked_distribution(cfg.system, cfg.low, T);
  const auto d1 = stacked_distribution(cfg.system, cfg.high, T);
  const auto n = static_cast<std::size_t>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(simulate_llr(cfg.system, cfg.high, d0, d1, n, 1, 2, exec_of(state)));
  state.SetItemsProcessed(state.iterations() * state.range(1));
  state.SetLabel(label_of(state));
}

}  // namespace

BENCHMARK(BM_DesignContract)->ArgsProduct({{0, 1}, {40}})->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_SurvivalGrid)->ArgsProduct({{0, 1}, {4096}})->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_SimulateLlr)->ArgsProduct({{0, 1}, {32768}})->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
