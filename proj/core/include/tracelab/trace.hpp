// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "tracelab/action.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace tracelab
{

enum class ArtifactKind
{
    volume,
    mask,
    slice_array,
    image,
    text
};

std::string to_string(ArtifactKind k);
ArtifactKind artifact_kind_from_string(const std::string& s);

/// A file written by a tool call. `path` is relative to the artifact root and
/// is exactly the string later calls pass as an argument.
struct ArtifactRef
{
    std::string path;
    ArtifactKind kind = ArtifactKind::text;
    int produced_by = 0; // call index within the trace

    friend bool operator==(const ArtifactRef&, const ArtifactRef&) = default;
};

struct ToolResult
{
    bool success = false;
    std::optional<std::string> text;
    std::vector<ArtifactRef> artifacts;
    std::optional<std::string> error;

    static ToolResult ok(std::string text, std::vector<ArtifactRef> artifacts = {});
    static ToolResult failure(std::string error);

    /// The observation fed back to the policy.
    [[nodiscard]] std::string observation() const;

    [[nodiscard]] nlohmann::json to_json() const;
    static ToolResult from_json(const nlohmann::json& j);

    friend bool operator==(const ToolResult&, const ToolResult&) = default;
};

struct Scratchpad
{
    std::vector<std::string> findings;
    int turn_of_last_update = -1;

    friend bool operator==(const Scratchpad&, const Scratchpad&) = default;
};

enum class Termination
{
    final_answer,
    turn_budget,
    unrecoverable_parse_failure,
    transport_error
};

std::string to_string(Termination t);
Termination termination_from_string(const std::string& s);

struct Turn
{
    AgentAction action;
    std::optional<ToolResult> result; // present iff action is call_tool

    friend bool operator==(const Turn&, const Turn&) = default;
};

struct Trace
{
    std::string episode_id;
    std::string case_ref;
    std::string user_prompt;
    std::vector<Turn> turns;
    std::vector<Scratchpad> scratchpad_history;
    std::optional<std::string> final_report;
    Termination termination = Termination::turn_budget;
    std::optional<std::string> error; // transport failure detail
    int parse_failures = 0;

    /// Tool-call turns in order; the position is the call index.
    [[nodiscard]] std::vector<const Turn*> calls() const;

    [[nodiscard]] nlohmann::json to_json() const;
    /// Validates the structural invariants; throws FormatError.
    static Trace from_json(const nlohmann::json& j);

    friend bool operator==(const Trace&, const Trace&) = default;
};

/// One trace per line.
std::vector<Trace> read_traces_jsonl(const std::string& path);
void write_traces_jsonl(const std::string& path, const std::vector<Trace>& traces);
void append_trace_jsonl(const std::string& path, const Trace& trace);

} // namespace tracelab
