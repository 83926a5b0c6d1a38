// SPDX-License-Identifier: Apache-2.0
#include "tracelab/common.hpp"
#include "tracelab/imaging.hpp"

#include <benchmark/benchmark.h>

using namespace tracelab;

namespace
{

Mask blob_mask(int n, double density, std::uint64_t seed)
{
    Rng rng(seed);
    Mask m(Dims {n, n, n});
    for (auto& v: m.data())
        v = bernoulli(rng, density) ? 1 : 0;
    return m;
}

void BM_ConnectedComponents(benchmark::State& state)
{
    const auto m = blob_mask(static_cast<int>(state.range(0)), 0.15, 1);
    for (auto _: state)
        benchmark::DoNotOptimize(imaging::connected_components(m).count);
    state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(m.size()));
}
BENCHMARK(BM_ConnectedComponents)->Arg(32)->Arg(64)->Arg(128);

void BM_BiggestAxialSlices(benchmark::State& state)
{
    const auto cc = imaging::connected_components(blob_mask(static_cast<int>(state.range(0)), 0.15, 2));
    for (auto _: state)
        benchmark::DoNotOptimize(imaging::biggest_axial_slices(cc));
}
BENCHMARK(BM_BiggestAxialSlices)->Arg(32)->Arg(64);

void BM_WindowVolume(benchmark::State& state)
{
    const int n = static_cast<int>(state.range(0));
    Volume v(Dims {n, n, n});
    Rng rng(3);
    for (auto& x: v.data())
        x = static_cast<float>(uniform01(rng) * 4000 - 2000);
    const auto lung = *imaging::find_preset("lung");
    for (auto _: state)
        benchmark::DoNotOptimize(imaging::window_volume(v, lung).data().data());
    state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(v.size()));
}
BENCHMARK(BM_WindowVolume)->Arg(64)->Arg(128);

} // namespace
