// SPDX-License-Identifier: Apache-2.0
#include "tracelab/action.hpp"

#include "tracelab/common.hpp"

namespace tracelab
{

namespace
{
    const char* const kProtocolKeys[] = {"reasoning", "preliminary_findings", "action", "tool_name", "arguments", "answer"};

    bool is_protocol_key(const std::string& k)
    {
        for (const char* p: kProtocolKeys)
            if (k == p)
                return true;
        return false;
    }

    std::string strip_fence(std::string s)
    {
        if (s.rfind("```", 0) != 0)
            return s;
        const auto firstNl = s.find('\n');
        if (firstNl == std::string::npos)
            return s;
        auto body = s.substr(firstNl + 1);
        const auto closing = body.rfind("```");
        if (closing == std::string::npos)
            return s;
        return trim(body.substr(0, closing));
    }
} // namespace

std::string to_string(ActionKind k)
{
    return k == ActionKind::call_tool ? "call_tool" : "final_answer";
}

nlohmann::json AgentAction::to_json() const
{
    nlohmann::json j = extra.is_object() ? extra : nlohmann::json::object();
    j["reasoning"] = reasoning;
    j["preliminary_findings"] = preliminary_findings;
    j["action"] = to_string(kind);
    if (kind == ActionKind::call_tool)
    {
        j["tool_name"] = tool_name.value_or("");
        j["arguments"] = arguments;
    }
    else
        j["answer"] = answer.value_or("");
    return j;
}

AgentAction AgentAction::from_json(const nlohmann::json& j)
{
    if (!j.is_object())
        throw MalformedAction("expected a JSON object");
    AgentAction a;

    const auto reasoning = j.find("reasoning");
    if (reasoning == j.end() || !reasoning->is_string())
        throw MalformedAction("missing string field \"reasoning\"");
    a.reasoning = reasoning->get<std::string>();

    const auto findings = j.find("preliminary_findings");
    if (findings == j.end())
        throw MalformedAction("missing field \"preliminary_findings\"");
    if (findings->is_string())
    {
        if (auto s = findings->get<std::string>(); !trim(s).empty())
            a.preliminary_findings.push_back(std::move(s));
    }
    else if (findings->is_array())
    {
        for (const auto& f: *findings)
        {
            if (!f.is_string())
                throw MalformedAction("\"preliminary_findings\" entries must be strings");
            a.preliminary_findings.push_back(f.get<std::string>());
        }
    }
    else
        throw MalformedAction("\"preliminary_findings\" must be a list or a string");

    const auto action = j.find("action");
    if (action == j.end() || !action->is_string())
        throw MalformedAction("missing string field \"action\"");
    const auto kind = action->get<std::string>();
    if (kind == "call_tool")
    {
        a.kind = ActionKind::call_tool;
        const auto name = j.find("tool_name");
        if (name == j.end() || !name->is_string() || name->get<std::string>().empty())
            throw MalformedAction("\"call_tool\" requires a nonempty string \"tool_name\"");
        a.tool_name = name->get<std::string>();
        if (const auto args = j.find("arguments"); args != j.end() && !args->is_null())
        {
            if (!args->is_object())
                throw MalformedAction("\"arguments\" must be an object");
            a.arguments = *args;
        }
    }
    else if (kind == "final_answer")
    {
        a.kind = ActionKind::final_answer;
        const auto answer = j.find("answer");
        if (answer == j.end() || !answer->is_string())
            throw MalformedAction("\"final_answer\" requires a string \"answer\"");
        a.answer = answer->get<std::string>();
    }
    else
        throw MalformedAction("unknown action \"" + kind + "\" (expected call_tool or final_answer)");

    for (const auto& [k, v]: j.items())
        if (!is_protocol_key(k))
            a.extra[k] = v;
    // Keys that belong to the other action kind are not part of this action.
    if (a.kind == ActionKind::call_tool && j.contains("answer"))
        a.extra["answer"] = j.at("answer");
    if (a.kind == ActionKind::final_answer)
        for (const char* k: {"tool_name", "arguments"})
            if (j.contains(k))
                a.extra[k] = j.at(k);
    return a;
}

AgentAction parse_action(std::string_view completion)
{
    const auto text = strip_fence(trim(completion));
    if (text.empty())
        throw MalformedAction("empty completion");
    nlohmann::json j;
    try
    {
        j = nlohmann::json::parse(text);
    }
    catch (const nlohmann::json::parse_error& e)
    {
        throw MalformedAction(std::string("not a JSON object: ") + e.what());
    }
    return AgentAction::from_json(j);
}

std::string serialize_action(const AgentAction& a)
{
    return a.to_json().dump();
}

} // namespace tracelab
