// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "tracelab/tools.hpp"

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace tracelab::prompts
{

/// Bundled templates (placeholders in single braces).
const std::string& system_prompt_template();
const std::string& diagnosis_checklist();
const std::string& report_judge_template();
const std::string& sequence_judge_template();
const std::string& hint_judge_template();

/// Replaces every `{key}` occurring in the template in one pass; substituted
/// text is not rescanned, unknown placeholders are left alone.
std::string substitute(std::string_view templ, const std::map<std::string, std::string>& values);

/// One line per tool, in registry order:
/// "- name(param: type, opt?: type = default): doc".
std::string render_tool_docs(const std::vector<tools::ToolDescriptor>& descriptors);

/// Fills {all_tools} and {diagnosis_checklist}. Throws ConfigError on an
/// empty tool list or checklist.
std::string build_system_prompt(const std::vector<tools::ToolDescriptor>& descriptors, std::string_view checklist,
                                std::string_view templ = system_prompt_template());

} // namespace tracelab::prompts
