// SPDX-License-Identifier: Apache-2.0
#include "tracelab/trace.hpp"

#include "tracelab/common.hpp"

#include <filesystem>
#include <fstream>

namespace tracelab
{

namespace
{
    nlohmann::json optional_json(const std::optional<std::string>& s)
    {
        return s ? nlohmann::json(*s) : nlohmann::json(nullptr);
    }

    std::optional<std::string> optional_string(const nlohmann::json& j, const char* key)
    {
        const auto it = j.find(key);
        if (it == j.end() || it->is_null())
            return std::nullopt;
        return it->get<std::string>();
    }
} // namespace

std::string to_string(ArtifactKind k)
{
    switch (k)
    {
        case ArtifactKind::volume: return "volume";
        case ArtifactKind::mask: return "mask";
        case ArtifactKind::slice_array: return "slice_array";
        case ArtifactKind::image: return "image";
        case ArtifactKind::text: return "text";
    }
    return "text";
}

ArtifactKind artifact_kind_from_string(const std::string& s)
{
    for (auto k: {ArtifactKind::volume, ArtifactKind::mask, ArtifactKind::slice_array, ArtifactKind::image, ArtifactKind::text})
        if (to_string(k) == s)
            return k;
    throw FormatError("unknown artifact kind '" + s + "'");
}

ToolResult ToolResult::ok(std::string text, std::vector<ArtifactRef> artifacts)
{
    return {true, std::move(text), std::move(artifacts), std::nullopt};
}

ToolResult ToolResult::failure(std::string error)
{
    return {false, std::nullopt, {}, std::move(error)};
}

std::string ToolResult::observation() const
{
    if (!success)
        return error.value_or("Tool call failed.");
    std::string out = text.value_or("");
    if (!artifacts.empty())
    {
        if (!out.empty())
            out += "\n";
        std::vector<std::string> paths;
        for (const auto& a: artifacts)
            paths.push_back(a.path);
        out += "Output files: " + join(paths, ", ");
    }
    return out;
}

nlohmann::json ToolResult::to_json() const
{
    nlohmann::json arts = nlohmann::json::array();
    for (const auto& a: artifacts)
        arts.push_back({{"path", a.path}, {"kind", to_string(a.kind)}, {"produced_by", a.produced_by}});
    return {{"success", success}, {"text", optional_json(text)}, {"artifacts", arts}, {"error", optional_json(error)}};
}

ToolResult ToolResult::from_json(const nlohmann::json& j)
{
    ToolResult r;
    r.success = j.at("success").get<bool>();
    r.text = optional_string(j, "text");
    r.error = optional_string(j, "error");
    if (const auto it = j.find("artifacts"); it != j.end())
        for (const auto& a: *it)
            r.artifacts.push_back({a.at("path").get<std::string>(), artifact_kind_from_string(a.at("kind").get<std::string>()),
                                   a.at("produced_by").get<int>()});
    if (r.success == r.error.has_value())
        throw FormatError("tool result must carry an error exactly when it failed");
    return r;
}

std::string to_string(Termination t)
{
    switch (t)
    {
        case Termination::final_answer: return "final_answer";
        case Termination::turn_budget: return "turn_budget";
        case Termination::unrecoverable_parse_failure: return "unrecoverable_parse_failure";
        case Termination::transport_error: return "transport_error";
    }
    return "turn_budget";
}

Termination termination_from_string(const std::string& s)
{
    for (auto t: {Termination::final_answer, Termination::turn_budget, Termination::unrecoverable_parse_failure, Termination::transport_error})
        if (to_string(t) == s)
            return t;
    throw FormatError("unknown termination '" + s + "'");
}

std::vector<const Turn*> Trace::calls() const
{
    std::vector<const Turn*> out;
    for (const auto& t: turns)
        if (t.action.kind == ActionKind::call_tool)
            out.push_back(&t);
    return out;
}

nlohmann::json Trace::to_json() const
{
    nlohmann::json turnsJson = nlohmann::json::array();
    for (const auto& t: turns)
        turnsJson.push_back({{"action", t.action.to_json()}, {"result", t.result ? t.result->to_json() : nlohmann::json(nullptr)}});
    nlohmann::json pads = nlohmann::json::array();
    for (const auto& s: scratchpad_history)
        pads.push_back({{"findings", s.findings}, {"turn_of_last_update", s.turn_of_last_update}});
    return {{"episode_id", episode_id},
            {"case_ref", case_ref},
            {"user_prompt", user_prompt},
            {"turns", turnsJson},
            {"scratchpad_history", pads},
            {"final_report", optional_json(final_report)},
            {"termination", to_string(termination)},
            {"error", optional_json(error)},
            {"parse_failures", parse_failures}};
}

Trace Trace::from_json(const nlohmann::json& j)
{
    Trace t;
    try
    {
        t.episode_id = j.value("episode_id", std::string {});
        t.case_ref = j.value("case_ref", std::string {});
        t.user_prompt = j.value("user_prompt", std::string {});
        for (const auto& turn: j.at("turns"))
        {
            Turn out;
            out.action = AgentAction::from_json(turn.at("action"));
            if (const auto it = turn.find("result"); it != turn.end() && !it->is_null())
                out.result = ToolResult::from_json(*it);
            t.turns.push_back(std::move(out));
        }
        if (const auto it = j.find("scratchpad_history"); it != j.end())
            for (const auto& s: *it)
                t.scratchpad_history.push_back({s.at("findings").get<std::vector<std::string>>(), s.at("turn_of_last_update").get<int>()});
        t.final_report = optional_string(j, "final_report");
        t.termination = termination_from_string(j.at("termination").get<std::string>());
        t.error = optional_string(j, "error");
        t.parse_failures = j.value("parse_failures", 0);
    }
    catch (const nlohmann::json::exception& e)
    {
        throw FormatError(std::string("malformed trace: ") + e.what());
    }
    catch (const MalformedAction& e)
    {
        throw FormatError(std::string("malformed trace action: ") + e.what());
    }

    int callIndex = 0;
    for (size_t i = 0; i < t.turns.size(); ++i)
    {
        const auto& turn = t.turns[i];
        const bool isCall = turn.action.kind == ActionKind::call_tool;
        if (isCall != turn.result.has_value())
            throw FormatError("turn " + std::to_string(i) + ": every tool call needs exactly one result");
        if (!isCall && i + 1 != t.turns.size())
            throw FormatError("final_answer must be the last turn");
        if (isCall)
        {
            for (const auto& a: turn.result->artifacts)
                if (a.produced_by != callIndex)
                    throw FormatError("artifact " + a.path + " has produced_by " + std::to_string(a.produced_by) + ", expected " +
                                      std::to_string(callIndex));
            ++callIndex;
        }
    }
    return t;
}

std::vector<Trace> read_traces_jsonl(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw FormatError("cannot open " + path);
    std::vector<Trace> out;
    std::string line;
    int lineNo = 0;
    while (std::getline(in, line))
    {
        ++lineNo;
        if (trim(line).empty())
            continue;
        try
        {
            out.push_back(Trace::from_json(nlohmann::json::parse(line)));
        }
        catch (const nlohmann::json::parse_error& e)
        {
            throw FormatError(path + ":" + std::to_string(lineNo) + ": " + e.what());
        }
    }
    return out;
}

void write_traces_jsonl(const std::string& path, const std::vector<Trace>& traces)
{
    std::string out;
    for (const auto& t: traces)
        out += t.to_json().dump() + "\n";
    write_file(path, out);
}

void append_trace_jsonl(const std::string& path, const Trace& trace)
{
    if (const auto parent = std::filesystem::path(path).parent_path(); !parent.empty())
        std::filesystem::create_directories(parent);
    std::ofstream out(path, std::ios::app);
    if (!out)
        throw FormatError("cannot append to " + path);
    out << trace.to_json().dump() << "\n";
}

} // namespace tracelab
