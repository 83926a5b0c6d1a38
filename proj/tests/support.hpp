// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "tracelab/common.hpp"
#include "tracelab/trace.hpp"

#include <atomic>
#include <filesystem>
#include <string>
#include <unistd.h>

namespace tracelab::testing
{

/// Scratch directory removed on destruction.
class TempDir
{
  public:
    explicit TempDir(const std::string& tag = "t")
    {
        static std::atomic<int> counter {0};
        _path = std::filesystem::temp_directory_path() /
                ("tracelab-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(_path);
        std::filesystem::create_directories(_path);
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(_path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    [[nodiscard]] const std::filesystem::path& path() const noexcept { return _path; }
    [[nodiscard]] std::string str() const { return _path.string(); }
    [[nodiscard]] std::string operator/(const std::string& rel) const { return (_path / rel).string(); }

  private:
    std::filesystem::path _path;
};

/// Hand-built traces for reward and graph tests.
class TraceBuilder
{
  public:
    explicit TraceBuilder(std::string caseRef = "case-x")
    {
        _trace.episode_id = "ep-test";
        _trace.case_ref = std::move(caseRef);
        _trace.user_prompt = "prompt";
    }

    /// Adds a call; `outputs` become artifacts produced by this call.
    TraceBuilder& call(const std::string& tool, nlohmann::json args, bool success = true, std::string text = {},
                       std::vector<std::string> outputs = {}, std::vector<std::string> findings = {})
    {
        AgentAction a;
        a.reasoning = "r";
        a.kind = ActionKind::call_tool;
        a.tool_name = tool;
        a.arguments = std::move(args);
        a.preliminary_findings = std::move(findings);
        ToolResult r;
        r.success = success;
        if (success)
        {
            if (!text.empty())
                r.text = text;
            for (const auto& o: outputs)
                r.artifacts.push_back({o, ArtifactKind::mask, _calls});
        }
        else
            r.error = text.empty() ? "failed" : text;
        _trace.turns.push_back({a, r});
        _trace.scratchpad_history.push_back({a.preliminary_findings, static_cast<int>(_trace.turns.size()) - 1});
        ++_calls;
        return *this;
    }

    TraceBuilder& answer(const std::string& report, std::vector<std::string> findings = {})
    {
        AgentAction a;
        a.reasoning = "done";
        a.kind = ActionKind::final_answer;
        a.answer = report;
        a.preliminary_findings = std::move(findings);
        _trace.turns.push_back({a, std::nullopt});
        _trace.scratchpad_history.push_back({a.preliminary_findings, static_cast<int>(_trace.turns.size()) - 1});
        _trace.final_report = report;
        _trace.termination = Termination::final_answer;
        return *this;
    }

    [[nodiscard]] Trace build() const { return _trace; }

  private:
    Trace _trace;
    int _calls = 0;
};

} // namespace tracelab::testing
