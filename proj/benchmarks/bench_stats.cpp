// SPDX-License-Identifier: Apache-2.0
#include "tracelab/common.hpp"
#include "tracelab/stats.hpp"

#include <benchmark/benchmark.h>

using namespace tracelab;

namespace
{

std::vector<LabelVector> labels(size_t n, double p, Rng& rng)
{
    std::vector<LabelVector> out;
    for (size_t i = 0; i < n; ++i)
    {
        LabelVector v(18);
        for (size_t k = 0; k < 18; ++k)
            v.set(k, bernoulli(rng, p));
        out.push_back(v);
    }
    return out;
}

void BM_PermutationTest(benchmark::State& state)
{
    Rng rng(1);
    const auto n = static_cast<size_t>(state.range(0));
    const auto refs = labels(n, 0.2, rng), a = labels(n, 0.2, rng), b = labels(n, 0.2, rng);
    for (auto _: state)
        benchmark::DoNotOptimize(eval::permutation_test(a, b, refs, eval::F1Kind::macro, 1000, 7));
    state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(BM_PermutationTest)->Arg(200)->Arg(1000);

void BM_BootstrapMacroF1(benchmark::State& state)
{
    Rng rng(2);
    const auto n = static_cast<size_t>(state.range(0));
    const auto refs = labels(n, 0.2, rng), preds = labels(n, 0.2, rng);
    const eval::ResampledMetric metric = [&](const std::vector<size_t>& idx) {
        eval::Counts c(18);
        for (auto i: idx)
            c.add(preds[i], refs[i]);
        return eval::f1_from_counts(c, eval::F1Kind::macro);
    };
    for (auto _: state)
        benchmark::DoNotOptimize(eval::bootstrap_ci(n, metric, 2000, 0.95, 3).ci_low);
}
BENCHMARK(BM_BootstrapMacroF1)->Arg(200)->Arg(1000);

} // namespace
