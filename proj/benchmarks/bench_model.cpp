#include <benchmark/benchmark.h>

#include <random>

#include "patchad/metrics.hpp"
#include "patchad/model.hpp"
#include "patchad/objective.hpp"
#include "patchad/scoring.hpp"

namespace {

using namespace patchad;

ModelConfig bench_config(std::size_t window) {
  ModelConfig cfg;
  cfg.window = window;
  cfg.patch_sizes = {5, 7};
  cfg.channels = 4;
  return cfg;
}

Tensor batch(std::size_t b, std::size_t window, std::size_t channels) {
  std::mt19937_64 rng(1);
  return Tensor::randn({b, window, channels}, 1.0, rng);
}

// One window, forward only; args: window length.
void BM_Forward(benchmark::State& state) {
  const auto window = static_cast<std::size_t>(state.range(0));
  const PatchADModel model(bench_config(window));
  const Tensor x = batch(1, window, 4);
  for (auto _ : state) {
    auto out = model.forward(x);
    benchmark::DoNotOptimize(out);
  }
  state.counters["flops"] = static_cast<double>(estimate_flops(model.config()));
}
BENCHMARK(BM_Forward)->DenseRange(35, 175, 35)->Unit(benchmark::kMillisecond);

void BM_ForwardBackward(benchmark::State& state) {
  const auto b = static_cast<std::size_t>(state.range(0));
  const PatchADModel model(bench_config(105));
  const Tensor x = batch(b, 105, 4);
  auto params = model.parameters();
  for (auto _ : state) {
    for (auto& p : params) p.zero_grad();
    const auto loss = total_loss(model.forward(x), x, model.config().constraint);
    loss.total.backward();
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(b));
}
BENCHMARK(BM_ForwardBackward)->Arg(1)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_WindowScores(benchmark::State& state) {
  const PatchADModel model(bench_config(105));
  const Tensor x = batch(16, 105, 4);
  for (auto _ : state) benchmark::DoNotOptimize(window_scores(model, x));
}
BENCHMARK(BM_WindowScores)->Unit(benchmark::kMillisecond);

void BM_Evaluate(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(2);
  std::normal_distribution<double> nd;
  std::vector<double> scores(n);
  Binary gt(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    scores[i] = nd(rng);
    if (i % 200 < 10) {
      gt[i] = 1;
      scores[i] += 2.0;
    }
  }
  for (auto _ : state) benchmark::DoNotOptimize(evaluate(scores, gt));
}
BENCHMARK(BM_Evaluate)->Arg(2000)->Arg(10000)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
