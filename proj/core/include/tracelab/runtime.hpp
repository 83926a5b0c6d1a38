// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "tracelab/chat.hpp"
#include "tracelab/tools.hpp"
#include "tracelab/trace.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace tracelab::runtime
{

enum class AgentMode
{
    report_generation,
    vqa
};

std::string to_string(AgentMode m);
AgentMode agent_mode_from_string(const std::string& s);

struct AgentConfig
{
    double temperature = 1.0;
    int max_completion_tokens = 4096;
    int max_turns = 40;
    int malformed_action_retries = 2;
    AgentMode mode = AgentMode::report_generation;

    /// Throws ConfigError.
    void validate() const;
    [[nodiscard]] nlohmann::json to_json() const;
    static AgentConfig from_json(const nlohmann::json& j);
};

/// Produces the next completion given the full message history.
class PolicyClient
{
  public:
    virtual ~PolicyClient() = default;
    /// Throws TransportError when no completion can be obtained.
    virtual std::string complete(const std::vector<chat::Message>& messages, const AgentConfig& config) = 0;
};

/// Replays a fixed list of completions. The n-th assistant message of an
/// episode gets entry n, so one instance can serve many episodes, including
/// concurrently.
class ScriptedPolicy final: public PolicyClient
{
  public:
    explicit ScriptedPolicy(std::vector<std::string> completions);

    /// JSON array whose entries are completion strings or action objects.
    static ScriptedPolicy from_json(const nlohmann::json& j);
    static ScriptedPolicy from_file(const std::string& path);

    std::string complete(const std::vector<chat::Message>& messages, const AgentConfig& config) override;
    [[nodiscard]] const std::vector<std::string>& completions() const noexcept { return _completions; }

  private:
    std::vector<std::string> _completions;
};

class CallbackPolicy final: public PolicyClient
{
  public:
    using Fn = std::function<std::string(const std::vector<chat::Message>&, const AgentConfig&)>;
    explicit CallbackPolicy(Fn fn): _fn(std::move(fn)) {}
    std::string complete(const std::vector<chat::Message>& messages, const AgentConfig& config) override
    {
        return _fn(messages, config);
    }

  private:
    Fn _fn;
};

/// Remote chat-completion policy; temperature and token cap come from the
/// AgentConfig.
class HttpPolicy final: public PolicyClient
{
  public:
    explicit HttpPolicy(chat::Endpoint endpoint, std::optional<std::int64_t> seed = std::nullopt);
    std::string complete(const std::vector<chat::Message>& messages, const AgentConfig& config) override;

  private:
    chat::Endpoint _endpoint;
    std::optional<std::int64_t> _seed;
};

struct EpisodeOptions
{
    std::string episode_id;    // empty: derived from case and prompt
    std::string artifact_root; // where tool outputs go
    std::string volume_path;   // appended to the user prompt when nonempty
    std::string system_prompt; // empty: built from the toolbox and checklist
};

/// Deterministic id: "ep-<case>-<16 hex digits of the prompt hash>".
std::string default_episode_id(const std::string& caseRef, const std::string& userPrompt);

/// First user message: the prompt, plus the image path line when given.
std::string initial_user_message(const std::string& userPrompt, const std::string& volumePath);

/// Feedback sent after an unparseable completion.
std::string malformed_action_message(const std::string& reason);

Scratchpad update_scratchpad(const Scratchpad& current, const AgentAction& action, int turn);

/// Runs one episode to a final answer, the turn budget, an unrecoverable
/// parse failure or a policy transport failure. Never throws for policy or
/// tool problems; those end up in the Trace.
Trace run_episode(const std::string& caseRef, PolicyClient& policy, const tools::Toolbox& toolbox, const AgentConfig& config,
                  const std::string& userPrompt, const EpisodeOptions& options = {});

/// Message history implied by a trace (without the system prompt): the
/// initial user message, then assistant actions and observations. The final
/// answer turn is omitted when `excludeFinal` is set.
std::vector<chat::Message> transcript(const Trace& trace, const std::string& volumePath = {}, bool excludeFinal = true);

} // namespace tracelab::runtime
