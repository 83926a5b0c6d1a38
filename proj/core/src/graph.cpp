// SPDX-License-Identifier: Apache-2.0
#include "tracelab/graph.hpp"

#include "tracelab/common.hpp"

#include <algorithm>

namespace tracelab
{

using nlohmann::json;

bool ToolGraph::has_outgoing(int u) const
{
    return std::any_of(edges.begin(), edges.end(), [u](const auto& e) { return e.first == u; });
}

json ToolGraph::to_json() const
{
    json ns = json::array();
    for (const auto& n: nodes)
        ns.push_back({{"index", n.index}, {"name", n.name}, {"success", n.success}});
    json es = json::array();
    for (const auto& [u, v]: edges)
        es.push_back({u, v});
    return {{"nodes", ns}, {"edges", es}, {"coherent", coherent}, {"n_coh", n_coh()}};
}

std::vector<std::string> json_strings(const json& v)
{
    std::vector<std::string> out;
    if (v.is_string())
        out.push_back(v.get<std::string>());
    else if (v.is_array() || v.is_object())
        for (const auto& e: v)
        {
            auto inner = json_strings(e);
            out.insert(out.end(), inner.begin(), inner.end());
        }
    return out;
}

bool references_artifact(const std::string& argument, const std::string& artifactPath)
{
    if (artifactPath.empty())
        return false;
    if (argument == artifactPath)
        return true;
    return argument.size() > artifactPath.size() && argument.compare(argument.size() - artifactPath.size(), artifactPath.size(), artifactPath) == 0 &&
           argument[argument.size() - artifactPath.size() - 1] == '/';
}

namespace
{
    bool text_used(const std::string& text, const Trace& trace)
    {
        std::vector<std::string> sinks;
        if (trace.final_report)
            sinks.push_back(to_lower(*trace.final_report));
        if (!trace.scratchpad_history.empty())
            for (const auto& f: trace.scratchpad_history.back().findings)
                sinks.push_back(to_lower(f));
        for (const auto& s: split_sentences(text))
        {
            const auto needle = to_lower(s);
            for (const auto& sink: sinks)
                if (!needle.empty() && sink.find(needle) != std::string::npos)
                    return true;
        }
        return false;
    }
} // namespace

ToolGraph build_tool_graph(const Trace& trace, const GraphOptions& options)
{
    ToolGraph g;
    const auto calls = trace.calls();
    std::vector<std::vector<std::string>> args;
    for (size_t i = 0; i < calls.size(); ++i)
    {
        const auto& t = *calls[i];
        g.nodes.push_back({static_cast<int>(i), t.action.tool_name.value_or(""), t.result && t.result->success});
        args.push_back(json_strings(t.action.arguments));
    }
    for (size_t u = 0; u < calls.size(); ++u)
    {
        if (!calls[u]->result)
            continue;
        for (size_t v = u + 1; v < calls.size(); ++v)
        {
            bool linked = false;
            for (const auto& a: calls[u]->result->artifacts)
                for (const auto& s: args[v])
                    linked = linked || references_artifact(s, a.path);
            if (linked)
                g.edges.emplace_back(static_cast<int>(u), static_cast<int>(v));
        }
    }
    for (size_t i = 0; i < calls.size(); ++i)
    {
        const auto& r = calls[i]->result;
        bool useful = r && r->success && r->text && !r->text->empty();
        if (useful && options.strict_text)
            useful = text_used(*r->text, trace);
        if (useful || g.has_outgoing(static_cast<int>(i)))
            g.coherent.push_back(static_cast<int>(i));
    }
    return g;
}

} // namespace tracelab
