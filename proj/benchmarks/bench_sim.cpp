// SPDX-License-Identifier: Apache-2.0
#include "tracelab/labeler.hpp"
#include "tracelab/sim.hpp"

#include <benchmark/benchmark.h>

using namespace tracelab;

namespace
{

void BM_GenerateCase(benchmark::State& state)
{
    sim::CaseConfig cfg;
    const int n = static_cast<int>(state.range(0));
    cfg.dims = {n, n, n};
    std::uint64_t seed = 0;
    for (auto _: state)
        benchmark::DoNotOptimize(sim::generate_case("b", seed++, cfg, Vocabulary::default_vocabulary()).lesions.size());
}
BENCHMARK(BM_GenerateCase)->Arg(32)->Arg(64);

void BM_LabelerExtract(benchmark::State& state)
{
    const auto& vocab = Vocabulary::default_vocabulary();
    const RuleBasedLabeler labeler(vocab);
    sim::CaseConfig cfg;
    cfg.min_lesions = 4;
    const auto report = sim::generate_case("b", 9, cfg, vocab).gt_report;
    for (auto _: state)
        benchmark::DoNotOptimize(labeler.extract(report).positives());
    state.SetBytesProcessed(state.iterations() * static_cast<int64_t>(report.size()));
}
BENCHMARK(BM_LabelerExtract);

} // namespace
