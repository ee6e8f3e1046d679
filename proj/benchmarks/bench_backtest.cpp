#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "kinematic/backtest.hpp"

using namespace kinematic;

namespace {

void BM_Backtest(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g(0.0, 0.02);
  std::uniform_int_distribution<int> pick(0, 2);
  std::vector<double> closes(n);
  std::vector<ActionLabel> actions(n);
  double x = 4.6;
  for (std::size_t i = 0; i < n; ++i) {
    closes[i] = std::exp(x += g(rng));
    actions[i] = static_cast<ActionLabel>(pick(rng));
  }
  for (auto _ : state) benchmark::DoNotOptimize(run_backtest(actions, closes, CostModel{5.0}, TaxSchedule{}, 10000.0));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Backtest)->Arg(252)->Arg(252 * 25);

}  // namespace
