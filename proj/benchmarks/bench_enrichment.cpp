#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "kinematic/enrichment.hpp"
#include "kinematic/tokenizer.hpp"

using namespace kinematic;

namespace {

std::vector<double> walk(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.01);
  std::vector<double> y(n);
  double x = 4.6;
  for (auto& v : y) v = x += g(rng);
  return y;
}

void BM_SnapshotFit(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const SnapshotSeries s{TimeGrid::uniform(n), walk(n, 1)};
  for (auto _ : state) benchmark::DoNotOptimize(fit_snapshot_spline(s, NoiseRatio{5.0}));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_SnapshotFit)->RangeMultiplier(4)->Range(16, 4096)->Complexity();

void BM_AggregateFit(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const AggregateSeries s{TimeGrid::uniform(n), walk(n - 1, 2)};
  for (auto _ : state) benchmark::DoNotOptimize(fit_aggregate_spline(s, NoiseRatio{5.0}));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_AggregateFit)->RangeMultiplier(4)->Range(16, 4096)->Complexity();

// One rolling window: both fits plus anchoring, at context 16 and 64.
void BM_TokenizeWindow(benchmark::State& state) {
  const auto T = static_cast<std::size_t>(state.range(0));
  LogHistory h;
  const auto close = walk(T + 1, 3);
  const auto volume = walk(T + 1, 4);
  for (std::size_t i = 0; i <= T; ++i) {
    h.time.push_back(static_cast<double>(i));
    h.log_close.push_back(close[i]);
    h.log_volume.push_back(13.0 + volume[i]);
  }
  TokenizerConfig cfg;
  cfg.context = T;
  for (auto _ : state) benchmark::DoNotOptimize(tokenize_window(h, T, cfg));
}
BENCHMARK(BM_TokenizeWindow)->Arg(16)->Arg(64);

}  // namespace
