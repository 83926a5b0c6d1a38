// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "tracelab/graph.hpp"
#include "tracelab/judges.hpp"
#include "tracelab/labeler.hpp"
#include "tracelab/trace.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>

namespace tracelab::rewards
{

struct SuccessReward
{
    int n_call = 0;
    int n_succ = 0;
    double r_succ = 1.0;
};

/// N_succ / N_call, 1 when there are no calls.
SuccessReward tool_success_reward(const Trace& trace);

struct DiversityReward
{
    int n_used = 0;
    int n_avail = 0;
    double r_div = 0.0;
};

/// Distinct tools called / available tools. Throws ConfigError when nAvail < 1.
DiversityReward tool_diversity_reward(const Trace& trace, int nAvail);

/// N_coh / N_call, 1 for a graph without nodes.
double coherence_reward(const ToolGraph& graph);

struct AbnormalF1
{
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Partial matches earn half credit. C = G = 0 gives F1 = 1; exactly one of
/// them zero gives 0 (the undefined ratio is reported as 0).
AbnormalF1 abnorm_f1(const judges::MatchReport& m);

/// Per-example F1 between two label vectors; 1 when both have no positives.
double example_f1(const LabelVector& predicted, const LabelVector& reference);

struct QualityReward
{
    double f1_18 = 0.0;
    AbnormalF1 abnormal;
    double r_quality = 0.0;
    judges::MatchReport match;
};

QualityReward quality_reward(const std::string& candidate, const std::string& reference, const Labeler& labeler,
                             const judges::FindingsJudge& judge);

/// S_chk/5 + S_seq/5. Throws std::out_of_range outside 1..5.
double tool_judge_reward(const judges::JudgeScores& scores);

enum class Phase
{
    early,
    late
};

std::string to_string(Phase p);
Phase phase_from_string(const std::string& s);

struct PhaseWeights
{
    double quality = 1.0;
    double diversity = 0.0;
    double coherence = 0.0;
    double success = 0.0;
    double tool_judge = 0.0;
};

struct Schedule
{
    PhaseWeights early {1.0, 0.5, 0.5, 0.1, 0.0};
    PhaseWeights late {1.0, 0.2, 0.2, 0.1, 0.2};
    int switch_step = 90; // first late step

    [[nodiscard]] Phase phase_at(int step) const noexcept { return step < switch_step ? Phase::early : Phase::late; }
    [[nodiscard]] const PhaseWeights& weights(Phase p) const noexcept { return p == Phase::early ? early : late; }

    void validate() const;
    [[nodiscard]] nlohmann::json to_json() const;
    static Schedule from_json(const nlohmann::json& j);
};

struct Components
{
    double r_quality = 0.0;
    double r_div = 0.0;
    double r_coh = 0.0;
    double r_succ = 0.0;
    std::optional<double> r_tool_judge;
};

/// Weighted sum for the phase. Throws ConfigError when the phase weights the
/// tool judge and no judge reward is given.
double scheduled_total(const Components& c, Phase phase, const Schedule& schedule = {});

struct RewardBreakdown
{
    int n_call = 0, n_succ = 0, n_used = 0, n_avail = 0, n_coh = 0;
    double r_succ = 1.0, r_div = 0.0, r_coh = 1.0;
    double f1_18 = 0.0, f1_abnorm = 0.0;
    double prec_abnorm = 0.0, rec_abnorm = 0.0;
    double r_quality = 0.0;
    std::optional<int> s_chk, s_seq;
    std::optional<double> r_tool_judge;
    int step = 0;
    Phase phase = Phase::early;
    double total = 0.0;

    [[nodiscard]] Components components() const;
    [[nodiscard]] nlohmann::json to_json() const;
    static RewardBreakdown from_json(const nlohmann::json& j);

    friend bool operator==(const RewardBreakdown&, const RewardBreakdown&) = default;
};

/// Fills phase and total from the step and the components.
RewardBreakdown composite_reward(RewardBreakdown components, int step, const Schedule& schedule = {});

struct ScoringContext
{
    const Labeler* labeler = nullptr;
    const judges::FindingsJudge* findings_judge = nullptr;
    const judges::SequenceJudge* sequence_judge = nullptr; // required for late steps
    int n_avail = 10;
    Schedule schedule;
    GraphOptions graph;
};

/// Full breakdown for one trace. Throws FormatError when the trace has no
/// final report and ConfigError when a needed backend is missing; judge and
/// labeler failures propagate (no score is invented).
RewardBreakdown score_trace(const Trace& trace, const std::string& referenceReport, int step, const ScoringContext& ctx);

} // namespace tracelab::rewards
