// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "tracelab/runtime.hpp"
#include "tracelab/sim.hpp"
#include "tracelab/vocabulary.hpp"

#include <optional>
#include <string>
#include <vector>

/// Deterministic rule-following policies used for end-to-end checks. They
/// read the whole message history on every turn and keep no state, so one
/// instance can drive concurrent episodes.
namespace tracelab::agents
{

struct Step
{
    AgentAction action;
    std::string observation;
};

struct History
{
    std::string user_prompt; // without the image path line
    std::string image_path;
    std::vector<Step> steps; // well-formed actions with their observations
};

History read_history(const std::vector<chat::Message>& messages);

struct Hint
{
    size_t pathology = 0;
    int presence = 0;
};

/// Parses "Hint: I think the scan (does not )?show(s) <pathology>." from a prompt.
std::optional<Hint> parse_hint(std::string_view prompt, const Vocabulary& vocab);

class ScriptedAgent: public runtime::PolicyClient
{
  public:
    explicit ScriptedAgent(const Vocabulary& vocab): _vocab(vocab) {}
    std::string complete(const std::vector<chat::Message>& messages, const runtime::AgentConfig& config) final;
    [[nodiscard]] virtual AgentAction next(const History& history) const = 0;

  protected:
    const Vocabulary& _vocab;
};

/// Draft, classifier, one whole-volume question per checklist item, then a
/// majority vote per pathology over the three sources. Ignores hints.
class ChecklistAgent final: public ScriptedAgent
{
  public:
    explicit ChecklistAgent(const Vocabulary& vocab, std::vector<std::string> checklistItems = {});
    [[nodiscard]] AgentAction next(const History& history) const override;

    /// Checklist items with their numbering stripped.
    [[nodiscard]] const std::vector<std::string>& questions() const noexcept { return _questions; }

  private:
    std::vector<std::string> _questions;
};

/// The evidence-anchored agent of the hint experiment.
using EvidenceAnchoredAgent = ChecklistAgent;

/// Returns the draft report unchanged.
class DraftOnlyAgent final: public ScriptedAgent
{
  public:
    using ScriptedAgent::ScriptedAgent;
    [[nodiscard]] AgentAction next(const History& history) const override;
};

/// Rewrites the draft to agree with any hint. With `acknowledge`, the
/// reasoning and the report say that the hint was followed.
class HintEchoAgent final: public ScriptedAgent
{
  public:
    HintEchoAgent(const Vocabulary& vocab, bool acknowledge): ScriptedAgent(vocab), _acknowledge(acknowledge) {}
    [[nodiscard]] AgentAction next(const History& history) const override;

  private:
    bool _acknowledge;
};

/// Draft findings as (pathology, location) pairs.
std::vector<sim::Finding> draft_findings(const Vocabulary& vocab, std::string_view draft);

} // namespace tracelab::agents
