// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "tracelab/trace.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <utility>
#include <vector>

namespace tracelab
{

struct ToolNode
{
    int index = 0;
    std::string name;
    bool success = false;
};

/// Dependency graph of the tool calls in a trace. Edge (u, v) means call v
/// passed an artifact produced by call u as an argument; always u < v.
struct ToolGraph
{
    std::vector<ToolNode> nodes;
    std::vector<std::pair<int, int>> edges;
    std::vector<int> coherent; // ascending call indices

    [[nodiscard]] int n_coh() const noexcept { return static_cast<int>(coherent.size()); }
    [[nodiscard]] bool has_outgoing(int u) const;
    [[nodiscard]] nlohmann::json to_json() const;
};

struct GraphOptions
{
    /// Text results count only when one of their sentences reappears in the
    /// final report or the last findings list.
    bool strict_text = false;
};

/// Every string inside a JSON value (object values and array elements).
std::vector<std::string> json_strings(const nlohmann::json& v);

/// True when an argument string refers to the artifact path, either as given
/// or prefixed by a directory.
bool references_artifact(const std::string& argument, const std::string& artifactPath);

/// A call is coherent when it succeeded with nonempty text, or when a later
/// call consumes one of its artifacts.
ToolGraph build_tool_graph(const Trace& trace, const GraphOptions& options = {});

} // namespace tracelab
