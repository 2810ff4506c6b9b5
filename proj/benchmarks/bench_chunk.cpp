#include <benchmark/benchmark.h>

#include <string>

#include "phigrade/pipeline.hpp"

namespace {

void BM_Chunk(benchmark::State& state) {
  std::string text;
  while (text.size() < static_cast<std::size_t>(state.range(0))) text += "患者：最近总是头痛，晚上睡不好。";
  for (auto _ : state) benchmark::DoNotOptimize(phigrade::chunk(text, 4000, 200));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * text.size()));
}
BENCHMARK(BM_Chunk)->Arg(1 << 10)->Arg(1 << 14)->Arg(1 << 17);

}  // namespace
