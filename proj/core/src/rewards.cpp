// SPDX-License-Identifier: Apache-2.0
#include "tracelab/rewards.hpp"

#include "tracelab/common.hpp"

#include <set>
#include <stdexcept>

namespace tracelab::rewards
{

using nlohmann::json;

SuccessReward tool_success_reward(const Trace& trace)
{
    SuccessReward r;
    for (const auto* t: trace.calls())
    {
        ++r.n_call;
        r.n_succ += t->result && t->result->success ? 1 : 0;
    }
    r.r_succ = r.n_call == 0 ? 1.0 : static_cast<double>(r.n_succ) / r.n_call;
    return r;
}

DiversityReward tool_diversity_reward(const Trace& trace, int nAvail)
{
    if (nAvail < 1)
        throw ConfigError("the number of available tools must be >= 1");
    std::set<std::string> used;
    for (const auto* t: trace.calls())
        used.insert(t->action.tool_name.value_or(""));
    DiversityReward r;
    r.n_used = static_cast<int>(used.size());
    r.n_avail = nAvail;
    r.r_div = static_cast<double>(r.n_used) / nAvail;
    return r;
}

double coherence_reward(const ToolGraph& graph)
{
    if (graph.nodes.empty())
        return 1.0;
    return static_cast<double>(graph.n_coh()) / static_cast<double>(graph.nodes.size());
}

AbnormalF1 abnorm_f1(const judges::MatchReport& m)
{
    if (m.C == 0 && m.G == 0)
        return {1.0, 1.0, 1.0};
    AbnormalF1 r;
    if (m.C > 0)
        r.precision = (m.M_C + 0.5 * m.P_C) / m.C;
    if (m.G > 0)
        r.recall = (m.M_G + 0.5 * m.P_G) / m.G;
    if (m.C == 0 || m.G == 0 || r.precision + r.recall == 0.0)
        return r;
    r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
    return r;
}

double example_f1(const LabelVector& predicted, const LabelVector& reference)
{
    if (predicted.size() != reference.size())
        throw std::invalid_argument("label vectors differ in length");
    size_t tp = 0, fp = 0, fn = 0;
    for (size_t i = 0; i < predicted.size(); ++i)
    {
        tp += predicted[i] && reference[i];
        fp += predicted[i] && !reference[i];
        fn += !predicted[i] && reference[i];
    }
    if (tp + fp + fn == 0)
        return 1.0;
    return 2.0 * tp / static_cast<double>(2 * tp + fp + fn);
}

QualityReward quality_reward(const std::string& candidate, const std::string& reference, const Labeler& labeler,
                             const judges::FindingsJudge& judge)
{
    QualityReward q;
    q.f1_18 = example_f1(labeler.extract(candidate), labeler.extract(reference));
    q.match = judge.match(reference, candidate);
    q.abnormal = abnorm_f1(q.match);
    q.r_quality = q.f1_18 + q.abnormal.f1;
    return q;
}

double tool_judge_reward(const judges::JudgeScores& scores)
{
    if (scores.s_chk < 1 || scores.s_chk > 5 || scores.s_seq < 1 || scores.s_seq > 5)
        throw std::out_of_range("judge scores must lie in 1..5");
    return scores.s_chk / 5.0 + scores.s_seq / 5.0;
}

std::string to_string(Phase p)
{
    return p == Phase::early ? "early" : "late";
}

Phase phase_from_string(const std::string& s)
{
    if (s == "early")
        return Phase::early;
    if (s == "late")
        return Phase::late;
    throw FormatError("unknown phase '" + s + "'");
}

namespace
{
    json weights_json(const PhaseWeights& w)
    {
        return {{"quality", w.quality}, {"diversity", w.diversity}, {"coherence", w.coherence}, {"success", w.success}, {"tool_judge", w.tool_judge}};
    }

    PhaseWeights weights_from(const json& j, PhaseWeights w)
    {
        w.quality = j.value("quality", w.quality);
        w.diversity = j.value("diversity", w.diversity);
        w.coherence = j.value("coherence", w.coherence);
        w.success = j.value("success", w.success);
        w.tool_judge = j.value("tool_judge", w.tool_judge);
        return w;
    }
} // namespace

void Schedule::validate() const
{
    for (const auto* w: {&early, &late})
        if (w->quality < 0 || w->diversity < 0 || w->coherence < 0 || w->success < 0 || w->tool_judge < 0)
            throw ConfigError("reward weights must be >= 0");
    if (switch_step < 0)
        throw ConfigError("switch_step must be >= 0");
}

json Schedule::to_json() const
{
    return {{"early", weights_json(early)}, {"late", weights_json(late)}, {"switch_step", switch_step}};
}

Schedule Schedule::from_json(const json& j)
{
    Schedule s;
    try
    {
        if (j.contains("early"))
            s.early = weights_from(j.at("early"), s.early);
        if (j.contains("late"))
            s.late = weights_from(j.at("late"), s.late);
        s.switch_step = j.value("switch_step", s.switch_step);
    }
    catch (const json::exception& e)
    {
        throw ConfigError(std::string("reward schedule: ") + e.what());
    }
    s.validate();
    return s;
}

double scheduled_total(const Components& c, Phase phase, const Schedule& schedule)
{
    const auto& w = schedule.weights(phase);
    double total = w.quality * c.r_quality + w.diversity * c.r_div + w.coherence * c.r_coh + w.success * c.r_succ;
    if (w.tool_judge != 0.0)
    {
        if (!c.r_tool_judge)
            throw ConfigError("the " + to_string(phase) + " phase needs tool-judge scores");
        total += w.tool_judge * *c.r_tool_judge;
    }
    return total;
}

Components RewardBreakdown::components() const
{
    return {r_quality, r_div, r_coh, r_succ, r_tool_judge};
}

json RewardBreakdown::to_json() const
{
    const auto opt = [](const auto& v) { return v ? json(*v) : json(nullptr); };
    return {{"n_call", n_call},
            {"n_succ", n_succ},
            {"n_used", n_used},
            {"n_avail", n_avail},
            {"n_coh", n_coh},
            {"r_succ", r_succ},
            {"r_div", r_div},
            {"r_coh", r_coh},
            {"f1_18", f1_18},
            {"f1_abnorm", f1_abnorm},
            {"prec_abnorm", prec_abnorm},
            {"rec_abnorm", rec_abnorm},
            {"r_quality", r_quality},
            {"s_chk", opt(s_chk)},
            {"s_seq", opt(s_seq)},
            {"r_tool_judge", opt(r_tool_judge)},
            {"step", step},
            {"phase", to_string(phase)},
            {"total", total}};
}

RewardBreakdown RewardBreakdown::from_json(const json& j)
{
    RewardBreakdown b;
    try
    {
        b.n_call = j.at("n_call").get<int>();
        b.n_succ = j.at("n_succ").get<int>();
        b.n_used = j.at("n_used").get<int>();
        b.n_avail = j.at("n_avail").get<int>();
        b.n_coh = j.at("n_coh").get<int>();
        b.r_succ = j.at("r_succ").get<double>();
        b.r_div = j.at("r_div").get<double>();
        b.r_coh = j.at("r_coh").get<double>();
        b.f1_18 = j.at("f1_18").get<double>();
        b.f1_abnorm = j.at("f1_abnorm").get<double>();
        b.prec_abnorm = j.value("prec_abnorm", 0.0);
        b.rec_abnorm = j.value("rec_abnorm", 0.0);
        b.r_quality = j.at("r_quality").get<double>();
        if (j.contains("s_chk") && !j.at("s_chk").is_null())
            b.s_chk = j.at("s_chk").get<int>();
        if (j.contains("s_seq") && !j.at("s_seq").is_null())
            b.s_seq = j.at("s_seq").get<int>();
        if (j.contains("r_tool_judge") && !j.at("r_tool_judge").is_null())
            b.r_tool_judge = j.at("r_tool_judge").get<double>();
        b.step = j.at("step").get<int>();
        b.phase = phase_from_string(j.at("phase").get<std::string>());
        b.total = j.at("total").get<double>();
    }
    catch (const json::exception& e)
    {
        throw FormatError(std::string("reward breakdown: ") + e.what());
    }
    return b;
}

RewardBreakdown composite_reward(RewardBreakdown b, int step, const Schedule& schedule)
{
    b.step = step;
    b.phase = schedule.phase_at(step);
    b.total = scheduled_total(b.components(), b.phase, schedule);
    return b;
}

RewardBreakdown score_trace(const Trace& trace, const std::string& referenceReport, int step, const ScoringContext& ctx)
{
    if (!trace.final_report)
        throw FormatError("trace " + trace.episode_id + " has no final report");
    if (!ctx.labeler || !ctx.findings_judge)
        throw ConfigError("scoring needs a labeler and a findings judge");

    RewardBreakdown b;
    const auto succ = tool_success_reward(trace);
    b.n_call = succ.n_call;
    b.n_succ = succ.n_succ;
    b.r_succ = succ.r_succ;

    const auto div = tool_diversity_reward(trace, ctx.n_avail);
    b.n_used = div.n_used;
    b.n_avail = div.n_avail;
    b.r_div = div.r_div;

    const auto graph = build_tool_graph(trace, ctx.graph);
    b.n_coh = graph.n_coh();
    b.r_coh = coherence_reward(graph);

    const auto q = quality_reward(*trace.final_report, referenceReport, *ctx.labeler, *ctx.findings_judge);
    b.f1_18 = q.f1_18;
    b.f1_abnorm = q.abnormal.f1;
    b.prec_abnorm = q.abnormal.precision;
    b.rec_abnorm = q.abnormal.recall;
    b.r_quality = q.r_quality;

    if (ctx.schedule.weights(ctx.schedule.phase_at(step)).tool_judge != 0.0)
    {
        if (!ctx.sequence_judge)
            throw ConfigError("step " + std::to_string(step) + " needs a tool-sequence judge");
        const auto scores = ctx.sequence_judge->score(trace);
        b.s_chk = scores.s_chk;
        b.s_seq = scores.s_seq;
        b.r_tool_judge = tool_judge_reward(scores);
    }
    return composite_reward(b, step, ctx.schedule);
}

} // namespace tracelab::rewards
