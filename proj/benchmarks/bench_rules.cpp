#include <benchmark/benchmark.h>

#include "bench_data.hpp"
#include "phigrade/rules.hpp"

namespace {

void BM_ApplyRulesFiring(benchmark::State& state) {
  const auto& rules = phigrade::bench::rules();
  const phigrade::Triple t{"HPV16阳性", "test/exam result", phigrade::SensitivityLevel(3)};
  const std::string context = "患者：体检报告HPV16阳性，TCT正常，需要治疗吗？";
  for (auto _ : state) benchmark::DoNotOptimize(phigrade::apply_rules(t, context, rules));
}
BENCHMARK(BM_ApplyRulesFiring);

void BM_ApplyRulesQuiet(benchmark::State& state) {
  const auto& rules = phigrade::bench::rules();
  const phigrade::Triple t{"头痛三天", "chief complaint", phigrade::SensitivityLevel(2)};
  const std::string context = "患者：头痛三天，伴有恶心，没有发热。";
  for (auto _ : state) benchmark::DoNotOptimize(phigrade::apply_rules(t, context, rules));
}
BENCHMARK(BM_ApplyRulesQuiet);

}  // namespace
