// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <nlohmann/json.hpp>

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tracelab
{

/// The policy's completion could not be read as an action.
class MalformedAction: public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

enum class ActionKind
{
    call_tool,
    final_answer
};

std::string to_string(ActionKind k);

/// One ReAct step: a thought, the running findings list, and either a tool
/// call or the final answer.
struct AgentAction
{
    std::string reasoning;
    std::vector<std::string> preliminary_findings;
    ActionKind kind = ActionKind::call_tool;
    std::optional<std::string> tool_name;
    nlohmann::json arguments = nlohmann::json::object();
    std::optional<std::string> answer;
    /// Keys outside the protocol, kept for the record but otherwise ignored.
    nlohmann::json extra = nlohmann::json::object();

    [[nodiscard]] nlohmann::json to_json() const;
    static AgentAction from_json(const nlohmann::json& j);

    friend bool operator==(const AgentAction&, const AgentAction&) = default;
};

/// Strict parse of a single JSON object. Surrounding whitespace and one
/// ``` fence (optionally tagged, e.g. ```json) are tolerated. A string-valued
/// preliminary_findings is coerced to a one-element list (an empty string to
/// an empty list). Throws MalformedAction with the reason.
AgentAction parse_action(std::string_view completion);

/// Canonical single-line JSON text of an action; parse_action round-trips it.
std::string serialize_action(const AgentAction& a);

} // namespace tracelab
