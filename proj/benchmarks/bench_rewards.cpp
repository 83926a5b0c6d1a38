// SPDX-License-Identifier: Apache-2.0
#include "tracelab/agents.hpp"
#include "tracelab/graph.hpp"
#include "tracelab/rewards.hpp"
#include "tracelab/runtime.hpp"
#include "tracelab/tools.hpp"

#include <benchmark/benchmark.h>

#include <filesystem>

using namespace tracelab;

namespace
{

const Vocabulary& vocab()
{
    return Vocabulary::default_vocabulary();
}

// A checklist-agent episode on one synthetic case, recorded once.
struct Episode
{
    Trace trace;
    std::string reference;

    Episode()
    {
        const auto root = (std::filesystem::temp_directory_path() / "tracelab-bench-rewards").string();
        auto store = std::make_shared<sim::CaseStore>(vocab());
        sim::CaseConfig cfg;
        cfg.min_lesions = 2;
        auto c = sim::generate_case("bench", 5, cfg, vocab());
        reference = c.gt_report;
        store->add(std::move(c));
        const auto box = tools::make_sim_toolbox(store, {0.5, 0.0, 0.0, 0.0, 1});
        agents::ChecklistAgent agent(vocab());
        runtime::EpisodeOptions options;
        options.artifact_root = root;
        options.volume_path = store->volume_path("bench", root);
        trace = runtime::run_episode("bench", agent, box, {}, "Write the report.", options);
        std::filesystem::remove_all(root);
    }
};

const Episode& episode()
{
    static const Episode e;
    return e;
}

void BM_BuildToolGraph(benchmark::State& state)
{
    const auto& t = episode().trace;
    for (auto _: state)
        benchmark::DoNotOptimize(build_tool_graph(t).n_coh());
    state.counters["calls"] = static_cast<double>(t.calls().size());
}
BENCHMARK(BM_BuildToolGraph);

void BM_ScoreTraceScripted(benchmark::State& state)
{
    const RuleBasedLabeler labeler(vocab());
    const judges::ScriptedFindingsJudge findings(vocab());
    const judges::ScriptedSequenceJudge sequence(vocab());
    rewards::ScoringContext ctx;
    ctx.labeler = &labeler;
    ctx.findings_judge = &findings;
    ctx.sequence_judge = &sequence;
    const int step = static_cast<int>(state.range(0));
    for (auto _: state)
        benchmark::DoNotOptimize(rewards::score_trace(episode().trace, episode().reference, step, ctx).total);
}
BENCHMARK(BM_ScoreTraceScripted)->Arg(0)->Arg(120);

void BM_TraceJsonRoundTrip(benchmark::State& state)
{
    const auto& t = episode().trace;
    for (auto _: state)
        benchmark::DoNotOptimize(Trace::from_json(nlohmann::json::parse(t.to_json().dump())).turns.size());
}
BENCHMARK(BM_TraceJsonRoundTrip);

} // namespace
