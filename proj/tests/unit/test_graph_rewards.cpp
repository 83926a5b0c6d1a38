// SPDX-License-Identifier: Apache-2.0
#include "../oracles.hpp"
#include "support.hpp"
#include "tracelab/graph.hpp"
#include "tracelab/rewards.hpp"
#include "tracelab/sim.hpp"
#include "tracelab/tools.hpp"

#include <doctest.h>

#include <set>

using namespace tracelab;
using namespace tracelab::rewards;
using tracelab::testing::TraceBuilder;
using nlohmann::json;

namespace
{

const Vocabulary& vocab()
{
    return Vocabulary::default_vocabulary();
}

constexpr double kTol = 1e-9;

bool near(double a, double b, double tol = kTol)
{
    return std::abs(a - b) <= tol;
}

} // namespace

TEST_CASE("success reward")
{
    const auto t = TraceBuilder().call("a", {}, true, "x").call("b", {}, false).call("c", {}, true).call("d", {}, true).build();
    const auto s = tool_success_reward(t);
    CHECK(s.n_call == 4);
    CHECK(s.n_succ == 3);
    CHECK(near(s.r_succ, 0.75));
    CHECK(tool_success_reward(TraceBuilder().call("a", {}).build()).r_succ == 1.0);
    CHECK(tool_success_reward(TraceBuilder().answer("r").build()).r_succ == 1.0);
}

TEST_CASE("diversity reward")
{
    const auto t = TraceBuilder().call("a", {}).call("a", {}).call("b", {}).call("c", {}).build();
    const auto d = tool_diversity_reward(t, 10);
    CHECK(d.n_used == 3);
    CHECK(near(d.r_div, 0.3));
    CHECK(tool_diversity_reward(TraceBuilder().build(), 10).r_div == 0.0);
    TraceBuilder all;
    for (const auto& n: tools::default_tool_names())
        all.call(n, {});
    CHECK(tool_diversity_reward(all.build(), 10).r_div == 1.0);
    CHECK_THROWS_AS(tool_diversity_reward(t, 0), ConfigError);
}

TEST_CASE("coherence examples")
{
    const auto unused = TraceBuilder()
                            .call("report_generation", {}, true, "Findings: x.")
                            .call("anatomy_segmentation", {}, true, "", {"ep/call_01/lungs.nii.gz"})
                            .build();
    const auto g1 = build_tool_graph(unused);
    CHECK(g1.n_coh() == 1);
    CHECK(near(coherence_reward(g1), 0.5));

    const auto chain = TraceBuilder()
                           .call("report_generation", {}, true, "Findings: x.")
                           .call("anatomy_segmentation", {}, true, "", {"ep/call_01/heart.nii.gz"})
                           .call("biggest_slice_selection", {{"mask_path", "ep/call_01/heart.nii.gz"}}, true, "",
                                 {"ep/call_02/axial_slice_010.png"})
                           .call("slice_vqa", {{"question", "q"}, {"image_paths", {"ep/call_02/axial_slice_010.png"}}}, true, "Yes.")
                           .call("effusion_segmentation", {}, true, "", {"ep/call_04/effusion.nii.gz"})
                           .build();
    const auto g2 = build_tool_graph(chain);
    CHECK(g2.n_coh() == 4);
    CHECK(near(coherence_reward(g2), 0.8));
    CHECK(g2.edges == std::vector<std::pair<int, int>> {{1, 2}, {2, 3}});
    CHECK(g2.coherent == std::vector<int> {0, 1, 2, 3});

    const auto empty = build_tool_graph(TraceBuilder().build());
    CHECK(empty.nodes.empty());
    CHECK(coherence_reward(empty) == 1.0);
}

TEST_CASE("artifact references")
{
    CHECK(references_artifact("ep/call_01/m.nii.gz", "ep/call_01/m.nii.gz"));
    CHECK(references_artifact("/data/art/ep/call_01/m.nii.gz", "ep/call_01/m.nii.gz"));
    CHECK_FALSE(references_artifact("xep/call_01/m.nii.gz", "ep/call_01/m.nii.gz"));
    CHECK_FALSE(references_artifact("ep/call_01/m.nii.gz.bak", "ep/call_01/m.nii.gz"));
    CHECK_FALSE(references_artifact("anything", ""));
}

TEST_CASE("graph matches brute-force enumeration")
{
    Rng rng(2024);
    for (int i = 0; i < 1000; ++i)
    {
        const auto t = oracles::random_trace(rng);
        const auto g = build_tool_graph(t);
        REQUIRE(g.n_coh() == oracles::brute_force_n_coh(t));
        std::set<int> nodes;
        for (const auto& n: g.nodes)
            nodes.insert(n.index);
        for (const auto& [u, v]: g.edges)
            CHECK(u < v);
        for (int c: g.coherent)
            CHECK(nodes.count(c) == 1);
        CHECK(std::is_sorted(g.coherent.begin(), g.coherent.end()));
    }
}

TEST_CASE("abnormal F1")
{
    const auto f = abnorm_f1(judges::MatchReport::from_counts(3, 2, 1, 4, 2, 1));
    // (2 + 0.5) / 3, (2 + 0.5) / 4 and their harmonic mean.
    const double p = 2.5 / 3.0, r = 2.5 / 4.0;
    CHECK(near(f.precision, p));
    CHECK(near(f.recall, r));
    CHECK(near(f.f1, 2 * p * r / (p + r)));
    CHECK(near(f.precision, 0.8333, 5e-5));
    CHECK(near(f.recall, 0.625));
    CHECK(near(f.f1, 0.7143, 5e-5));

    CHECK(abnorm_f1(judges::MatchReport::from_counts(3, 3, 0, 3, 3, 0)).f1 == 1.0);
    CHECK(abnorm_f1(judges::MatchReport::from_counts(2, 0, 0, 3, 0, 0)).f1 == 0.0);
    CHECK(abnorm_f1(judges::MatchReport::from_counts(0, 0, 0, 0, 0, 0)).f1 == 1.0);
    CHECK(abnorm_f1(judges::MatchReport::from_counts(0, 0, 0, 2, 0, 0)).f1 == 0.0);
    CHECK(abnorm_f1(judges::MatchReport::from_counts(2, 0, 0, 0, 0, 0)).f1 == 0.0);
    CHECK_THROWS_AS(judges::MatchReport::from_counts(2, 2, 1, 2, 0, 0), std::invalid_argument);
}

TEST_CASE("abnormal F1 stays in range over all small count tables")
{
    for (int C = 0; C <= 5; ++C)
        for (int MC = 0; MC <= C; ++MC)
            for (int PC = 0; MC + PC <= C; ++PC)
                for (int G = 0; G <= 5; ++G)
                    for (int MG = 0; MG <= G; ++MG)
                        for (int PG = 0; MG + PG <= G; ++PG)
                        {
                            const auto f = abnorm_f1(judges::MatchReport::from_counts(C, MC, PC, G, MG, PG));
                            REQUIRE(f.f1 >= 0.0);
                            REQUIRE(f.f1 <= 1.0);
                            REQUIRE(f.precision <= 1.0);
                            REQUIRE(f.recall <= 1.0);
                        }
}

TEST_CASE("example F1 between label vectors")
{
    LabelVector a(std::vector<std::uint8_t> {1, 1, 0, 0}), b(std::vector<std::uint8_t> {1, 0, 1, 0});
    CHECK(near(example_f1(a, b), 0.5));
    CHECK(example_f1(a, a) == 1.0);
    CHECK(example_f1(LabelVector(4), LabelVector(4)) == 1.0);
    CHECK(example_f1(a, LabelVector(4)) == 0.0);
    CHECK(example_f1(a, b) == example_f1(b, a));
}

TEST_CASE("quality reward on sim reports")
{
    const RuleBasedLabeler labeler(vocab());
    const judges::ScriptedFindingsJudge judge(vocab());
    const auto effusion = *vocab().index_of("Pleural effusion");
    const auto nodule = *vocab().index_of("Lung nodule");
    const std::vector<sim::Finding> two {{effusion, vocab().pathologies().at(effusion).locations.front().name},
                                         {nodule, vocab().pathologies().at(nodule).locations.front().name}};
    const auto gt = sim::render_report(two, vocab());

    const auto same = quality_reward(gt, gt, labeler, judge);
    CHECK(same.r_quality == 2.0);

    const auto normal = quality_reward(sim::render_report(std::vector<sim::Finding> {}, vocab()), gt, labeler, judge);
    CHECK(normal.abnormal.f1 == 0.0);
    CHECK(normal.f1_18 == 0.0);

    const std::vector<sim::Finding> one {two.front()};
    const auto half = quality_reward(sim::render_report(one, vocab()), gt, labeler, judge);
    CHECK(half.match.C == 1);
    CHECK(half.match.M_C == 1);
    CHECK(half.match.G == 2);
    CHECK(half.match.M_G == 1);
    CHECK(near(half.abnormal.f1, 2 * (1.0 * 0.5) / (1.0 + 0.5)));
    CHECK(near(half.abnormal.f1, 0.667, 5e-4));
    // Label F1: one of two reference positives predicted, no false positives.
    CHECK(near(half.f1_18, 2.0 / 3.0));
    CHECK(near(half.r_quality, half.f1_18 + half.abnormal.f1));
}

TEST_CASE("tool judge reward")
{
    CHECK(near(tool_judge_reward({5, 5}), 2.0));
    CHECK(near(tool_judge_reward({5, 4}), 1.8));
    CHECK(near(tool_judge_reward({1, 1}), 0.4));
    CHECK_THROWS_AS(tool_judge_reward({0, 3}), std::out_of_range);
    CHECK_THROWS_AS(tool_judge_reward({3, 6}), std::out_of_range);
}

TEST_CASE("scheduled totals")
{
    const Components c {0.5 + 0.5, 0.4, 0.8, 1.0, tool_judge_reward({5, 4})};
    const double early = c.r_quality + 0.5 * c.r_div + 0.5 * c.r_coh + 0.1 * c.r_succ;
    const double late = c.r_quality + 0.2 * c.r_div + 0.2 * c.r_coh + 0.1 * c.r_succ + 0.2 * *c.r_tool_judge;
    CHECK(near(scheduled_total(c, Phase::early), early));
    CHECK(near(scheduled_total(c, Phase::late), late));
    CHECK(near(early, 1.70));
    CHECK(near(late, 1.70));

    RewardBreakdown b;
    b.f1_18 = 0.5;
    b.f1_abnorm = 0.5;
    b.r_quality = 1.0;
    b.r_div = 0.4;
    b.r_coh = 0.8;
    b.r_succ = 1.0;
    const auto at10 = composite_reward(b, 10);
    CHECK(at10.phase == Phase::early);
    CHECK(near(at10.total, 1.70));
    CHECK_THROWS_AS(composite_reward(b, 120), ConfigError);
    b.s_chk = 5;
    b.s_seq = 4;
    b.r_tool_judge = 1.8;
    const auto at120 = composite_reward(b, 120);
    CHECK(at120.phase == Phase::late);
    CHECK(near(at120.total, 1.70));
    CHECK(RewardBreakdown::from_json(at120.to_json()) == at120);
}

TEST_CASE("phase boundary")
{
    const Schedule s;
    CHECK(s.phase_at(0) == Phase::early);
    CHECK(s.phase_at(89) == Phase::early);
    CHECK(s.phase_at(90) == Phase::late);
    Rng rng(5);
    for (int i = 0; i < 500; ++i)
    {
        const Components c {2 * uniform01(rng), uniform01(rng), uniform01(rng), uniform01(rng),
                            tool_judge_reward({1 + int(uniform_index(rng, 5)), 1 + int(uniform_index(rng, 5))})};
        const double d = scheduled_total(c, s.phase_at(90), s) - scheduled_total(c, s.phase_at(89), s);
        REQUIRE(near(d, -0.3 * c.r_div - 0.3 * c.r_coh + 0.2 * *c.r_tool_judge, 1e-12));
    }
}

TEST_CASE("schedule configuration")
{
    Schedule s;
    s.switch_step = 10;
    s.late.tool_judge = 0.5;
    const auto back = Schedule::from_json(s.to_json());
    CHECK(back.switch_step == 10);
    CHECK(back.late.tool_judge == 0.5);
    Schedule bad;
    bad.switch_step = -1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    Schedule negative;
    negative.early.diversity = -0.1;
    CHECK_THROWS_AS(negative.validate(), ConfigError);
}

TEST_CASE("reward ranges on random traces")
{
    const RuleBasedLabeler labeler(vocab());
    const judges::ScriptedFindingsJudge findings(vocab());
    const judges::ScriptedSequenceJudge sequence(vocab());
    ScoringContext ctx;
    ctx.labeler = &labeler;
    ctx.findings_judge = &findings;
    ctx.sequence_judge = &sequence;
    Rng rng(77);
    for (int i = 0; i < 300; ++i)
    {
        auto t = oracles::random_trace(rng);
        const auto c = sim::generate_case("c", i, {}, vocab());
        const auto pred = sim::generate_case("p", i + 1000, {}, vocab());
        t.turns.erase(std::remove_if(t.turns.begin(), t.turns.end(), [](const Turn& x) { return x.action.kind == ActionKind::final_answer; }),
                      t.turns.end());
        t.scratchpad_history.resize(t.turns.size());
        AgentAction a;
        a.kind = ActionKind::final_answer;
        a.answer = pred.gt_report;
        t.turns.push_back({a, std::nullopt});
        t.scratchpad_history.push_back({{}, static_cast<int>(t.turns.size()) - 1});
        t.final_report = pred.gt_report;
        t.termination = Termination::final_answer;

        for (int step: {0, 200})
        {
            const auto b = score_trace(t, c.gt_report, step, ctx);
            for (double v: {b.r_succ, b.r_div, b.r_coh, b.f1_18, b.f1_abnorm})
            {
                REQUIRE(v >= 0.0);
                REQUIRE(v <= 1.0);
            }
            REQUIRE(b.r_quality <= 2.0);
            if (b.phase == Phase::early)
                REQUIRE(b.total <= 3.1 + 1e-12);
            else
            {
                REQUIRE(b.total <= 2.9 + 1e-12);
                REQUIRE(*b.r_tool_judge >= 0.4);
                REQUIRE(*b.r_tool_judge <= 2.0);
            }
            REQUIRE(b.total >= 0.0);
        }
    }
}

TEST_CASE("quality is monotone in matched findings")
{
    // Adding a correctly reported finding never lowers the abnormal F1.
    const judges::ScriptedFindingsJudge judge(vocab());
    const RuleBasedLabeler labeler(vocab());
    Rng rng(9);
    for (int i = 0; i < 100; ++i)
    {
        const auto c = sim::generate_case("c", 500 + i, {{32, 32, 32}, 2, 4, {}}, vocab());
        auto findings = c.findings();
        std::vector<sim::Finding> partial;
        double last = -1.0;
        for (const auto& f: findings)
        {
            partial.push_back(f);
            const auto q = quality_reward(sim::render_report(partial, vocab()), c.gt_report, labeler, judge);
            REQUIRE(q.abnormal.f1 >= last);
            last = q.abnormal.f1;
        }
        CHECK(last == 1.0);
    }
}

TEST_CASE("score_trace errors")
{
    const RuleBasedLabeler labeler(vocab());
    const judges::ScriptedFindingsJudge findings(vocab());
    ScoringContext ctx;
    ctx.labeler = &labeler;
    ctx.findings_judge = &findings;
    const auto noAnswer = TraceBuilder().call("report_generation", {}, true, "x").build();
    CHECK_THROWS_AS(score_trace(noAnswer, "ref", 0, ctx), FormatError);
    const auto ok = TraceBuilder().call("report_generation", {}, true, "x").answer("No acute abnormality.").build();
    CHECK_NOTHROW(score_trace(ok, "No acute abnormality.", 0, ctx));
    CHECK_THROWS_AS(score_trace(ok, "No acute abnormality.", 90, ctx), ConfigError);
    ScoringContext none;
    CHECK_THROWS_AS(score_trace(ok, "x", 0, none), ConfigError);
}
