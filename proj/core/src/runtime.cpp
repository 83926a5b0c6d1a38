// SPDX-License-Identifier: Apache-2.0
#include "tracelab/runtime.hpp"

#include "tracelab/common.hpp"
#include "tracelab/prompts.hpp"

#include <cctype>
#include <cstdio>

namespace tracelab::runtime
{

using nlohmann::json;

std::string to_string(AgentMode m)
{
    return m == AgentMode::vqa ? "vqa" : "report_generation";
}

AgentMode agent_mode_from_string(const std::string& s)
{
    if (s == "report_generation")
        return AgentMode::report_generation;
    if (s == "vqa")
        return AgentMode::vqa;
    throw ConfigError("unknown agent mode '" + s + "'");
}

void AgentConfig::validate() const
{
    if (!(temperature >= 0.0))
        throw ConfigError("temperature must be >= 0");
    if (max_turns < 1)
        throw ConfigError("max_turns must be >= 1");
    if (max_completion_tokens < 1)
        throw ConfigError("max_completion_tokens must be >= 1");
    if (malformed_action_retries < 0)
        throw ConfigError("malformed_action_retries must be >= 0");
}

json AgentConfig::to_json() const
{
    return {{"temperature", temperature},
            {"max_completion_tokens", max_completion_tokens},
            {"max_turns", max_turns},
            {"malformed_action_retries", malformed_action_retries},
            {"mode", to_string(mode)}};
}

AgentConfig AgentConfig::from_json(const json& j)
{
    AgentConfig c;
    try
    {
        c.temperature = j.value("temperature", c.temperature);
        c.max_completion_tokens = j.value("max_completion_tokens", c.max_completion_tokens);
        c.max_turns = j.value("max_turns", c.max_turns);
        c.malformed_action_retries = j.value("malformed_action_retries", c.malformed_action_retries);
        c.mode = agent_mode_from_string(j.value("mode", to_string(c.mode)));
    }
    catch (const json::exception& e)
    {
        throw ConfigError(std::string("agent config: ") + e.what());
    }
    c.validate();
    return c;
}

ScriptedPolicy::ScriptedPolicy(std::vector<std::string> completions): _completions(std::move(completions)) {}

ScriptedPolicy ScriptedPolicy::from_json(const json& j)
{
    if (!j.is_array())
        throw ConfigError("policy script must be a JSON array");
    std::vector<std::string> out;
    for (const auto& e: j)
        out.push_back(e.is_string() ? e.get<std::string>() : e.dump());
    return ScriptedPolicy(std::move(out));
}

ScriptedPolicy ScriptedPolicy::from_file(const std::string& path)
{
    try
    {
        return from_json(json::parse(read_file(path)));
    }
    catch (const json::exception& e)
    {
        throw ConfigError("policy script " + path + ": " + e.what());
    }
}

std::string ScriptedPolicy::complete(const std::vector<chat::Message>& messages, const AgentConfig&)
{
    size_t turn = 0;
    for (const auto& m: messages)
        turn += m.role == "assistant" ? 1 : 0;
    if (turn >= _completions.size())
        throw TransportError("policy script exhausted after " + std::to_string(_completions.size()) + " completions");
    return _completions[turn];
}

HttpPolicy::HttpPolicy(chat::Endpoint endpoint, std::optional<std::int64_t> seed): _endpoint(std::move(endpoint)), _seed(seed) {}

std::string HttpPolicy::complete(const std::vector<chat::Message>& messages, const AgentConfig& config)
{
    return chat::complete(_endpoint, messages, {config.temperature, config.max_completion_tokens, _seed});
}

std::string default_episode_id(const std::string& caseRef, const std::string& userPrompt)
{
    std::string safe;
    for (char c: caseRef)
        safe += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(fnv1a64(caseRef + "\n" + userPrompt)));
    return "ep-" + safe + "-" + hex;
}

std::string initial_user_message(const std::string& userPrompt, const std::string& volumePath)
{
    return volumePath.empty() ? userPrompt : userPrompt + "\n\nImage Path: " + volumePath;
}

std::string malformed_action_message(const std::string& reason)
{
    return "Your previous message was not valid JSON in the required format (" + reason +
           "). Respond with a single JSON object containing \"reasoning\", \"preliminary_findings\", \"action\" and either "
           "\"tool_name\" with \"arguments\" or \"answer\", and nothing else.";
}

Scratchpad update_scratchpad(const Scratchpad&, const AgentAction& action, int turn)
{
    return {action.preliminary_findings, turn};
}

Trace run_episode(const std::string& caseRef, PolicyClient& policy, const tools::Toolbox& toolbox, const AgentConfig& config,
                  const std::string& userPrompt, const EpisodeOptions& options)
{
    config.validate();
    if (trim(userPrompt).empty())
        throw ConfigError("user prompt must be nonempty");

    Trace trace;
    trace.episode_id = options.episode_id.empty() ? default_episode_id(caseRef, userPrompt) : options.episode_id;
    trace.case_ref = caseRef;
    trace.user_prompt = userPrompt;

    const std::string system = options.system_prompt.empty()
                                   ? prompts::build_system_prompt(toolbox.descriptors(), prompts::diagnosis_checklist())
                                   : options.system_prompt;
    std::vector<chat::Message> messages {{"system", system}, {"user", initial_user_message(userPrompt, options.volume_path)}};

    tools::EpisodeContext ctx {trace.episode_id, caseRef, options.artifact_root, options.volume_path, 0};
    Scratchpad pad;
    int consecutiveFailures = 0;

    while (static_cast<int>(trace.turns.size()) < config.max_turns)
    {
        std::string completion;
        try
        {
            completion = policy.complete(messages, config);
        }
        catch (const std::exception& e)
        {
            trace.termination = Termination::transport_error;
            trace.error = e.what();
            return trace;
        }
        messages.push_back({"assistant", completion});

        AgentAction action;
        try
        {
            action = parse_action(completion);
        }
        catch (const MalformedAction& e)
        {
            ++trace.parse_failures;
            if (++consecutiveFailures > config.malformed_action_retries)
            {
                trace.termination = Termination::unrecoverable_parse_failure;
                trace.error = e.what();
                return trace;
            }
            messages.push_back({"user", malformed_action_message(e.what())});
            continue;
        }
        consecutiveFailures = 0;

        const int turn = static_cast<int>(trace.turns.size());
        pad = update_scratchpad(pad, action, turn);
        trace.scratchpad_history.push_back(pad);

        if (action.kind == ActionKind::final_answer)
        {
            trace.final_report = action.answer;
            trace.turns.push_back({std::move(action), std::nullopt});
            trace.termination = Termination::final_answer;
            return trace;
        }

        auto result = toolbox.call(*action.tool_name, action.arguments, ctx);
        ++ctx.call_index;
        messages.push_back({"user", result.observation()});
        trace.turns.push_back({std::move(action), std::move(result)});
    }
    trace.termination = Termination::turn_budget;
    return trace;
}

std::vector<chat::Message> transcript(const Trace& trace, const std::string& volumePath, bool excludeFinal)
{
    std::vector<chat::Message> out {{"user", initial_user_message(trace.user_prompt, volumePath)}};
    for (const auto& t: trace.turns)
    {
        if (excludeFinal && t.action.kind == ActionKind::final_answer)
            break;
        out.push_back({"assistant", serialize_action(t.action)});
        if (t.result)
            out.push_back({"user", t.result->observation()});
    }
    return out;
}

} // namespace tracelab::runtime
