// SPDX-License-Identifier: Apache-2.0
#include "tracelab/prompts.hpp"

#include "tracelab/common.hpp"
#include "tracelab/resources.hpp"

namespace tracelab::prompts
{

namespace
{
    // Resource files end with a newline that is not part of the text.
    std::string resource(const char* text)
    {
        std::string s(text);
        while (!s.empty() && (s.back() == '\n' || s.back() == '\r'))
            s.pop_back();
        return s;
    }

    std::string param_text(const tools::ParamSpec& p)
    {
        std::string type = p.allowed.empty() ? tools::to_string(p.type) : join(p.allowed, "|");
        std::string out = p.name + (p.required ? ": " : "?: ") + type;
        if (!p.default_value.is_null())
            out += " = " + p.default_value.dump();
        return out;
    }
} // namespace

const std::string& system_prompt_template()
{
    static const std::string s = resource(embedded::system_prompt);
    return s;
}

const std::string& diagnosis_checklist()
{
    static const std::string s = resource(embedded::checklist);
    return s;
}

const std::string& report_judge_template()
{
    static const std::string s = resource(embedded::report_judge_prompt);
    return s;
}

const std::string& sequence_judge_template()
{
    static const std::string s = resource(embedded::sequence_judge_prompt);
    return s;
}

const std::string& hint_judge_template()
{
    static const std::string s = resource(embedded::hint_judge_prompt);
    return s;
}

std::string substitute(std::string_view templ, const std::map<std::string, std::string>& values)
{
    std::string out;
    out.reserve(templ.size());
    size_t i = 0;
    while (i < templ.size())
    {
        if (templ[i] == '{')
        {
            const auto close = templ.find('}', i + 1);
            if (close != std::string_view::npos)
            {
                const auto it = values.find(std::string(templ.substr(i + 1, close - i - 1)));
                if (it != values.end())
                {
                    out += it->second;
                    i = close + 1;
                    continue;
                }
            }
        }
        out += templ[i++];
    }
    return out;
}

std::string render_tool_docs(const std::vector<tools::ToolDescriptor>& descriptors)
{
    std::vector<std::string> lines;
    for (const auto& d: descriptors)
    {
        std::vector<std::string> params;
        for (const auto& p: d.params)
            params.push_back(param_text(p));
        lines.push_back("- " + d.name + "(" + join(params, ", ") + "): " + d.doc);
    }
    return join(lines, "\n");
}

std::string build_system_prompt(const std::vector<tools::ToolDescriptor>& descriptors, std::string_view checklist, std::string_view templ)
{
    if (descriptors.empty())
        throw ConfigError("system prompt needs at least one tool");
    if (trim(checklist).empty())
        throw ConfigError("system prompt needs a nonempty checklist");
    return substitute(templ, {{"all_tools", render_tool_docs(descriptors)}, {"diagnosis_checklist", std::string(checklist)}});
}

} // namespace tracelab::prompts
