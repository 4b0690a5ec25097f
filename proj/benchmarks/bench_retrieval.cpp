#include <benchmark/benchmark.h>

#include <string>

#include "relevancer/rng.hpp"
#include "relevancer/vectorstore.hpp"

using namespace relevancer;

namespace {

// Random unit vectors are enough here; retrieval cost does not depend on
// where the vectors came from.
Store random_store(std::size_t n, std::size_t dim) {
  Store s(dim);
  Rng rng(1);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> v(dim);
    for (auto& x : v) x = rng.unit() * 2 - 1;
    s.insert(LabeledExample{make_qp_pair("q", "t" + std::to_string(i)), "Exact", std::nullopt}, EmbeddingVector{std::move(v)});
  }
  s.freeze();
  return s;
}

EmbeddingVector random_query(std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(dim);
  for (auto& x : v) x = rng.unit() * 2 - 1;
  return EmbeddingVector{std::move(v)};
}

}  // namespace

static void BM_TopK(benchmark::State& state) {
  static const Store store = random_store(100'000, 256);
  auto q = random_query(256, 7);
  const auto k = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(store.top_k(q, k));
}
BENCHMARK(BM_TopK)->Arg(16)->Arg(200)->Unit(benchmark::kMillisecond);

static void BM_MmrSelect(benchmark::State& state) {
  static const Store store = random_store(100'000, 256);
  auto q = random_query(256, 9);
  const auto pool = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(store.mmr_select(q, 16, 0.5, pool));
}
BENCHMARK(BM_MmrSelect)->Arg(64)->Arg(200)->Unit(benchmark::kMillisecond);
