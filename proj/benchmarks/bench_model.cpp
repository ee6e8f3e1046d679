#include <random>

#include <benchmark/benchmark.h>

#include "kinematic/model.hpp"

using namespace kinematic;

namespace {

Eigen::MatrixXd tokens(const ModelConfig& cfg) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd m(cfg.context, cfg.channels);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

ModelConfig config_for(std::int64_t scale) { return scale == 0 ? ModelConfig{} : ModelConfig::paper_scale(); }

// Arg 0 is the desk-scale default, arg 1 the full architecture.
void BM_Forward(benchmark::State& state) {
  const auto cfg = config_for(state.range(0));
  const auto params = init_model(cfg);
  const auto x = tokens(cfg);
  for (auto _ : state) benchmark::DoNotOptimize(forward(params, x));
}
BENCHMARK(BM_Forward)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);

void BM_ForwardBackward(benchmark::State& state) {
  const auto cfg = config_for(state.range(0));
  const auto params = init_model(cfg);
  const auto x = tokens(cfg);
  const LossWeights w;
  for (auto _ : state) {
    const auto cache = forward(params, x);
    benchmark::DoNotOptimize(backward_gradients(params, cache, ActionLabel::kBuy, w));
  }
}
BENCHMARK(BM_ForwardBackward)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);

}  // namespace
