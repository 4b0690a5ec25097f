#include <benchmark/benchmark.h>

#include "relevancer/eval.hpp"
#include "relevancer/rng.hpp"

using namespace relevancer;

static void BM_ConfusionAndMetrics(benchmark::State& state) {
  auto scheme = builtin_scheme("esci");
  Rng rng(3);
  std::vector<Prediction> preds(static_cast<std::size_t>(state.range(0)));
  for (auto& p : preds) {
    p.gold = scheme.labels[rng.uniform(4)];
    p.predicted = scheme.labels[rng.uniform(4)];
  }
  for (auto _ : state) benchmark::DoNotOptimize(metrics(confusion(preds, scheme)));
}
BENCHMARK(BM_ConfusionAndMetrics)->Arg(1000)->Arg(100000);

BENCHMARK_MAIN();
