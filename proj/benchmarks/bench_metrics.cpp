#include <benchmark/benchmark.h>

#include <random>
#include <string>

#include "phigrade/metrics.hpp"

namespace {

phigrade::AlignedCorpus corpus(std::size_t records) {
  std::mt19937_64 rng(7);
  const char* categories[] = {"patient name", "age", "chief complaint", "special disease", "address-city"};
  phigrade::AlignedCorpus c;
  for (std::size_t i = 0; i < records; ++i) {
    phigrade::GoldRecord g{std::to_string(i), {}};
    phigrade::PredictedRecord p{std::to_string(i), {}, 0};
    for (int k = 0; k < 8; ++k) {
      const phigrade::Triple t{"e" + std::to_string(k), categories[rng() % 5],
                               phigrade::SensitivityLevel(static_cast<int>(1 + rng() % 5))};
      g.triples.push_back(t);
      if (rng() % 4) p.triples.push_back(t);
    }
    c.gold.push_back(std::move(g));
    c.predicted.push_back(std::move(p));
  }
  return c;
}

void BM_Evaluate(benchmark::State& state) {
  const auto c = corpus(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(phigrade::evaluate(c));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * state.range(0)));
}
BENCHMARK(BM_Evaluate)->Arg(100)->Arg(1000)->Arg(10000);

}  // namespace
