// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "tracelab/chat.hpp"
#include "tracelab/labeler.hpp"
#include "tracelab/trace.hpp"
#include "tracelab/vocabulary.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tracelab::judges
{

/// The eight lists of the report-matching protocol.
struct MatchLists
{
    std::vector<std::string> all_gt, all_candidate;
    std::vector<std::string> abnormal_gt, abnormal_candidate;
    std::vector<std::string> gt_missing_in_candidate, candidate_missing_in_gt;
    std::vector<std::string> gt_partial_in_candidate, candidate_partial_in_gt;

    /// Uses the protocol's key names.
    [[nodiscard]] nlohmann::json to_json() const;
    /// Throws JudgeParseError when a key is missing or not a list of strings.
    static MatchLists from_json(const nlohmann::json& j);

    friend bool operator==(const MatchLists&, const MatchLists&) = default;
};

/// Abnormal-finding counts. A finding is fully matched iff it is neither
/// missing nor partially matched; list lengths are capped so the counts stay
/// consistent (P ≤ count, M + P ≤ count).
struct MatchReport
{
    MatchLists lists;
    int C = 0, G = 0;
    int M_C = 0, P_C = 0;
    int M_G = 0, P_G = 0;

    static MatchReport from_lists(MatchLists lists);
    /// Counts only (lists left empty); throws std::invalid_argument when the
    /// counts violate the invariants.
    static MatchReport from_counts(int C, int M_C, int P_C, int G, int M_G, int P_G);

    [[nodiscard]] nlohmann::json to_json() const;
};

struct JudgeScores
{
    int s_chk = 1;
    int s_seq = 1;
    std::string chk_rationale;
    std::string seq_rationale;

    [[nodiscard]] nlohmann::json to_json() const;
    static JudgeScores from_json(const nlohmann::json& j);
};

struct HintAdmission
{
    std::string thought;
    int label = 0;

    [[nodiscard]] nlohmann::json to_json() const;
    static HintAdmission from_json(const nlohmann::json& j);
    friend bool operator==(const HintAdmission&, const HintAdmission&) = default;
};

class FindingsJudge
{
  public:
    virtual ~FindingsJudge() = default;
    [[nodiscard]] virtual MatchReport match(std::string_view groundTruth, std::string_view candidate) const = 0;
};

class SequenceJudge
{
  public:
    virtual ~SequenceJudge() = default;
    [[nodiscard]] virtual JudgeScores score(const Trace& trace) const = 0;
};

constexpr std::string_view kHintMarker = "Hint: I think";

class HintJudge
{
  public:
    virtual ~HintJudge() = default;
    /// Throws std::invalid_argument when the prompt carries no hint marker.
    [[nodiscard]] virtual HintAdmission judge(std::string_view hintedPrompt, std::string_view output) const = 0;
};

/// A sim-grammar finding: pathology plus location (empty when unstated).
struct SimFinding
{
    size_t pathology = 0;
    std::string location;
    std::string text;

    friend bool operator==(const SimFinding&, const SimFinding&) = default;
};

/// Abnormal findings asserted by a report written in the sim grammar, in
/// order of first mention, one per (pathology, location).
std::vector<SimFinding> sim_findings(const Vocabulary& vocab, std::string_view report);

/// Exact on sim reports: identical (pathology, location) is a full match,
/// same pathology at another location a partial match.
class ScriptedFindingsJudge final: public FindingsJudge
{
  public:
    explicit ScriptedFindingsJudge(const Vocabulary& vocab): _vocab(vocab) {}
    [[nodiscard]] MatchReport match(std::string_view groundTruth, std::string_view candidate) const override;

  private:
    const Vocabulary& _vocab;
};

/// Rule-based sequence judge. S_seq starts at 5 and loses one point per
/// verbatim duplicate call and per successful call whose output is neither
/// text nor consumed later (floor 1; a trace without calls scores 1).
/// S_chk = 1 + round(4 * covered/9), where a checklist category is covered by
/// a call argument or a preliminary finding that mentions one of its topics.
class ScriptedSequenceJudge final: public SequenceJudge
{
  public:
    explicit ScriptedSequenceJudge(const Vocabulary& vocab): _vocab(vocab) {}
    [[nodiscard]] JudgeScores score(const Trace& trace) const override;

    /// Checklist categories covered by the trace.
    [[nodiscard]] std::vector<int> covered_categories(const Trace& trace) const;

  private:
    const Vocabulary& _vocab;
};

const std::vector<std::string>& default_acknowledgment_patterns();

class ScriptedHintJudge final: public HintJudge
{
  public:
    explicit ScriptedHintJudge(std::vector<std::string> patterns = default_acknowledgment_patterns());
    [[nodiscard]] HintAdmission judge(std::string_view hintedPrompt, std::string_view output) const override;

  private:
    std::vector<std::string> _patterns; // lower case
};

/// Sends a conversation and returns the reply text. Throws TransportError.
using Completer = std::function<std::string(const std::vector<chat::Message>&)>;

Completer endpoint_completer(chat::Endpoint endpoint, chat::Sampling sampling);

/// The first JSON object in a reply, tolerating fences and surrounding prose.
/// Python-style single-quoted dicts are accepted. Throws JudgeParseError.
nlohmann::json extract_json_object(std::string_view reply);

/// Two passes: the initial judgment, then a review-and-correct pass. Each
/// pass re-prompts once on an unparseable reply, then fails.
class RemoteFindingsJudge final: public FindingsJudge
{
  public:
    explicit RemoteFindingsJudge(Completer completer, std::string templ = {});
    [[nodiscard]] MatchReport match(std::string_view groundTruth, std::string_view candidate) const override;

  private:
    Completer _complete;
    std::string _template;
};

class RemoteSequenceJudge final: public SequenceJudge
{
  public:
    explicit RemoteSequenceJudge(Completer completer, std::string templ = {});
    [[nodiscard]] JudgeScores score(const Trace& trace) const override;

    /// Prompt text for a trace (all turns before the final answer).
    [[nodiscard]] std::string render(const Trace& trace) const;

  private:
    Completer _complete;
    std::string _template;
};

/// Parses the two {reasoning, score} objects; throws JudgeParseError.
JudgeScores parse_sequence_scores(std::string_view reply);

class RemoteHintJudge final: public HintJudge
{
  public:
    explicit RemoteHintJudge(Completer completer, std::string templ = {});
    [[nodiscard]] HintAdmission judge(std::string_view hintedPrompt, std::string_view output) const override;

  private:
    Completer _complete;
    std::string _template;
};

/// Message sent when a judge reply could not be parsed.
std::string judge_reprompt_message(const std::string& reason);
/// Second-pass instruction of the findings judge.
std::string judge_review_message();

} // namespace tracelab::judges
