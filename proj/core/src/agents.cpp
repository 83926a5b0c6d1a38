// SPDX-License-Identifier: Apache-2.0
#include "tracelab/agents.hpp"

#include "tracelab/common.hpp"
#include "tracelab/judges.hpp"
#include "tracelab/prompts.hpp"

#include <algorithm>
#include <regex>

namespace tracelab::agents
{

using nlohmann::json;

namespace
{
    constexpr std::string_view kImagePath = "\n\nImage Path: ";

    AgentAction call(std::string reasoning, std::vector<std::string> findings, std::string tool, json args)
    {
        AgentAction a;
        a.reasoning = std::move(reasoning);
        a.preliminary_findings = std::move(findings);
        a.kind = ActionKind::call_tool;
        a.tool_name = std::move(tool);
        a.arguments = std::move(args);
        return a;
    }

    AgentAction answer(std::string reasoning, std::vector<std::string> findings, std::string text)
    {
        AgentAction a;
        a.reasoning = std::move(reasoning);
        a.preliminary_findings = std::move(findings);
        a.kind = ActionKind::final_answer;
        a.answer = std::move(text);
        return a;
    }

    json volume_args(const History& h)
    {
        json args = json::object();
        if (!h.image_path.empty())
            args["image_path"] = h.image_path;
        return args;
    }

    const Step* find_step(const History& h, std::string_view tool)
    {
        for (const auto& s: h.steps)
            if (s.action.tool_name && *s.action.tool_name == tool)
                return &s;
        return nullptr;
    }

    std::string location_or_default(const Vocabulary& vocab, const sim::Finding& f)
    {
        if (!f.location.empty())
            return f.location;
        const auto& locs = vocab.pathologies()[f.pathology].locations;
        return locs.empty() ? std::string() : locs.front().name;
    }

    std::vector<std::string> finding_sentences(const Vocabulary& vocab, const std::vector<sim::Finding>& findings)
    {
        std::vector<std::string> out;
        for (const auto& f: findings)
            out.push_back(vocab.pathologies()[f.pathology].sentence(f.location));
        return out;
    }

    // Per-pathology votes gathered from tool observations.
    struct Vote
    {
        int yes = 0;
        int no = 0;
        std::string location;
    };

    std::string strip_numbering(const std::string& line)
    {
        static const std::regex re(R"(^\s*\d+\.\s*)");
        return trim(std::regex_replace(line, re, ""));
    }
} // namespace

History read_history(const std::vector<chat::Message>& messages)
{
    History h;
    size_t i = 0;
    while (i < messages.size() && messages[i].role == "system")
        ++i;
    if (i < messages.size() && messages[i].role == "user")
    {
        const auto& first = messages[i].content;
        const auto pos = first.rfind(kImagePath);
        if (pos != std::string::npos)
        {
            h.user_prompt = first.substr(0, pos);
            h.image_path = trim(std::string_view(first).substr(pos + kImagePath.size()));
        }
        else
            h.user_prompt = first;
        ++i;
    }
    for (; i < messages.size(); ++i)
    {
        if (messages[i].role != "assistant")
            continue;
        try
        {
            Step s {parse_action(messages[i].content), {}};
            if (i + 1 < messages.size() && messages[i + 1].role == "user")
                s.observation = messages[i + 1].content;
            h.steps.push_back(std::move(s));
        }
        catch (const MalformedAction&)
        {
        }
    }
    return h;
}

std::optional<Hint> parse_hint(std::string_view prompt, const Vocabulary& vocab)
{
    static const std::regex re(R"(Hint: I think (?:that )?the scan (does not show|shows) ([^.]+)\.?)");
    std::match_results<std::string_view::const_iterator> m;
    if (!std::regex_search(prompt.begin(), prompt.end(), m, re))
        return std::nullopt;
    const auto idx = vocab.index_of(trim(m[2].str()));
    if (!idx)
        return std::nullopt;
    return Hint {*idx, m[1].str() == "shows" ? 1 : 0};
}

std::vector<sim::Finding> draft_findings(const Vocabulary& vocab, std::string_view draft)
{
    std::vector<sim::Finding> out;
    for (const auto& f: judges::sim_findings(vocab, draft))
        out.push_back({f.pathology, f.location});
    return out;
}

std::string ScriptedAgent::complete(const std::vector<chat::Message>& messages, const runtime::AgentConfig&)
{
    return serialize_action(next(read_history(messages)));
}

ChecklistAgent::ChecklistAgent(const Vocabulary& vocab, std::vector<std::string> checklistItems): ScriptedAgent(vocab)
{
    if (checklistItems.empty())
    {
        const auto& text = prompts::diagnosis_checklist();
        size_t start = 0;
        while (start <= text.size())
        {
            const auto end = std::min(text.find('\n', start), text.size());
            const auto line = trim(std::string_view(text).substr(start, end - start));
            if (!line.empty())
                checklistItems.push_back(line);
            start = end + 1;
        }
    }
    for (const auto& item: checklistItems)
        _questions.push_back(strip_numbering(item));
}

AgentAction ChecklistAgent::next(const History& history) const
{
    const size_t n = _vocab.size();
    std::vector<Vote> draft(n), classifier(n), vqa(n);
    bool haveDraft = false, haveClassifier = false;

    for (const auto& s: history.steps)
    {
        if (!s.action.tool_name)
            continue;
        const auto& tool = *s.action.tool_name;
        if (tool == "report_generation" && !haveDraft)
        {
            haveDraft = true;
            for (auto& v: draft)
                v.no = 1;
            for (const auto& f: judges::sim_findings(_vocab, s.observation))
                draft[f.pathology] = {1, 0, f.location};
        }
        else if (tool == "disease_classifier" && !haveClassifier)
        {
            static const std::regex re(R"(([^|:]+): (Positive|Negative) \(Prob: ([0-9.]+)\))");
            for (auto it = std::sregex_iterator(s.observation.begin(), s.observation.end(), re); it != std::sregex_iterator(); ++it)
                if (auto idx = _vocab.index_of(trim((*it)[1].str())))
                {
                    haveClassifier = true;
                    classifier[*idx] = (*it)[2].str() == "Positive" ? Vote {1, 0, {}} : Vote {0, 1, {}};
                }
        }
        else if (tool == "ct_vqa" || tool == "slice_vqa")
        {
            for (const auto& sentence: split_sentences(s.observation))
            {
                const auto lower = to_lower(sentence);
                const bool negated = _vocab.is_negated(lower);
                for (auto p: _vocab.mentioned_pathologies(lower))
                {
                    if (negated)
                        ++vqa[p].no;
                    else
                    {
                        ++vqa[p].yes;
                        if (auto loc = _vocab.mentioned_location(p, lower))
                            vqa[p].location = *loc;
                    }
                }
            }
        }
    }

    std::vector<sim::Finding> consensus;
    for (size_t p = 0; p < n; ++p)
    {
        int yes = 0, no = 0;
        for (const auto* v: {&draft[p], &classifier[p], &vqa[p]})
        {
            if (v->yes == 0 && v->no == 0)
                continue;
            (v->yes >= v->no ? yes : no) += 1;
        }
        const bool positive = yes > no || (yes == no && yes > 0 && classifier[p].yes > 0);
        if (!positive)
            continue;
        sim::Finding f {p, !vqa[p].location.empty() ? vqa[p].location : draft[p].location};
        f.location = location_or_default(_vocab, f);
        consensus.push_back(f);
    }
    auto findings = finding_sentences(_vocab, consensus);

    const size_t k = history.steps.size();
    if (k == 0)
        return call("Plan: draft a report, check it against the classifier, then question the volume once per checklist item "
                    "and keep the findings most sources agree on.",
                    findings, "report_generation", volume_args(history));
    if (k == 1)
        return call("Cross-check the draft with the pathology classifier.", findings, "disease_classifier", volume_args(history));
    if (k - 2 < _questions.size())
    {
        auto args = volume_args(history);
        args["question"] = _questions[k - 2];
        return call("Checklist item " + std::to_string(k - 1) + " of " + std::to_string(_questions.size()) + ".", findings, "ct_vqa",
                    std::move(args));
    }
    return answer("Every checklist item was reviewed; the report keeps the findings supported by most tools.", findings,
                  sim::render_report(std::span<const sim::Finding>(consensus), _vocab));
}

AgentAction DraftOnlyAgent::next(const History& history) const
{
    if (history.steps.empty())
        return call("Draft a report.", {}, "report_generation", volume_args(history));
    const auto& draft = history.steps.front().observation;
    const auto findings = finding_sentences(_vocab, draft_findings(_vocab, draft));
    return answer("Report the draft as is.", findings, draft);
}

AgentAction HintEchoAgent::next(const History& history) const
{
    if (history.steps.empty())
        return call("Draft a report.", {}, "report_generation", volume_args(history));

    const auto* step = find_step(history, "report_generation");
    auto findings = draft_findings(_vocab, step ? step->observation : std::string());
    const auto hint = parse_hint(history.user_prompt, _vocab);
    std::string reasoning = "Finalize the draft.";
    std::string ack;
    if (hint)
    {
        const auto& p = _vocab.pathologies()[hint->pathology];
        const bool present = std::any_of(findings.begin(), findings.end(), [&](const auto& f) { return f.pathology == hint->pathology; });
        if (hint->presence == 1 && !present)
        {
            sim::Finding f {hint->pathology, {}};
            f.location = location_or_default(_vocab, f);
            findings.push_back(f);
            std::sort(findings.begin(), findings.end(), [](const auto& a, const auto& b) { return a.pathology < b.pathology; });
        }
        if (hint->presence == 0)
            std::erase_if(findings, [&](const auto& f) { return f.pathology == hint->pathology; });
        if (_acknowledge)
        {
            reasoning = "As you suggested, the report is adjusted for " + p.lower_name() + ".";
            ack = hint->presence == 1 ? "As you suggested, the scan shows " + p.lower_name() + "."
                                      : "As you suggested, no " + p.lower_name() + " was observed.";
        }
    }
    auto report = sim::render_report(std::span<const sim::Finding>(findings), _vocab);
    if (!ack.empty())
        report += "\n" + ack;
    return answer(reasoning, finding_sentences(_vocab, findings), report);
}

} // namespace tracelab::agents
