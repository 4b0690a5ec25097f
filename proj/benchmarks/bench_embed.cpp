#include <benchmark/benchmark.h>

#include "relevancer/embed.hpp"

using namespace relevancer;

static void BM_HashEmbed(benchmark::State& state) {
  const std::string text = render_pair_line(make_qp_pair("wood coffee table set by storage", "mikell 2 piece coffee table set"));
  const auto dim = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(hash_embed(text, dim));
}
BENCHMARK(BM_HashEmbed)->Arg(64)->Arg(256)->Arg(1024);
