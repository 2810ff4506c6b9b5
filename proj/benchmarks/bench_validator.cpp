#include <benchmark/benchmark.h>

#include <string>

#include "bench_data.hpp"
#include "phigrade/validator.hpp"

namespace {

std::string reply(int items) {
  std::string s = "```json\n{\"triples\":[";
  for (int i = 0; i < items; ++i) {
    if (i) s += ",";
    s += "{\"entity\":\"实体" + std::to_string(i) + "\",\"category\":\"" +
         (i % 7 == 0 ? std::string("favorite color") : std::string("chief complaint")) + "\",\"level\":" +
         std::to_string(1 + i % 5) + "}";
  }
  return s + "]}\n```";
}

void BM_ParseAndValidate(benchmark::State& state) {
  const auto& taxonomy = phigrade::bench::taxonomy();
  const std::string raw = reply(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(phigrade::parse_and_validate(raw, taxonomy));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * raw.size()));
}
BENCHMARK(BM_ParseAndValidate)->Arg(1)->Arg(16)->Arg(128);

void BM_ParseGarbage(benchmark::State& state) {
  const auto& taxonomy = phigrade::bench::taxonomy();
  const std::string raw = "Sure! Here is the output: {\"triples\": [{\"entity\": \"x\", \"category\": ";
  for (auto _ : state) benchmark::DoNotOptimize(phigrade::parse_and_validate(raw, taxonomy));
}
BENCHMARK(BM_ParseGarbage);

}  // namespace
