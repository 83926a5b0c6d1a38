// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "tracelab/config.hpp"
#include "tracelab/hint.hpp"
#include "tracelab/manifest.hpp"
#include "tracelab/rewards.hpp"
#include "tracelab/runtime.hpp"
#include "tracelab/sim.hpp"
#include "tracelab/stats.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

/// The operations behind the CLI subcommands, usable from code and tests.
namespace tracelab::pipeline
{

inline constexpr const char* kDefaultPrompt = "Can you generate the report for the following chest CT volume?";

/// "case-00000", "case-00001", ...
std::string case_id(size_t index);

/// Case i uses seed mix(seed, i); identical options give identical cases.
std::vector<sim::SyntheticCase> generate_cases(size_t n, std::uint64_t seed, const sim::CaseConfig& config, const Vocabulary& vocab);

/// Writes one bundle per case plus index.json listing the ids.
void write_cases(const std::string& dir, const std::vector<sim::SyntheticCase>& cases, const Vocabulary& vocab);
/// Case ids listed in <dir>/index.json.
std::vector<std::string> list_cases(const std::string& dir);

/// simgen: generate and write N cases; records a manifest in the directory.
RunManifest simgen_command(const Config& config, size_t n, std::uint64_t seed, const std::string& outDir);

/// Policy by name: checklist, evidence-anchored, draft-only, hint-echo,
/// hint-ack, http (the configured endpoint) or script:<path>.
std::unique_ptr<runtime::PolicyClient> make_policy(const std::string& spec, const Config& config, const Vocabulary& vocab);

/// One episode on a stored case. The volume is shown to the policy relative
/// to the artifact root when it lies inside it.
Trace run_case(const std::string& caseId, runtime::PolicyClient& policy, const tools::Toolbox& toolbox, const sim::CaseStore& store,
               const runtime::AgentConfig& agent, const std::string& prompt, const std::string& artifactRoot,
               const std::string& systemPrompt = {});

struct RunOptions
{
    std::string cases_dir;
    std::string out_dir;
    std::string agent = "checklist";
    std::string prompt = kDefaultPrompt;
    size_t limit = 0; // 0: all cases
    int workers = 1;
    bool resume = false;

    [[nodiscard]] nlohmann::json to_json() const;
    static RunOptions from_json(const nlohmann::json& j);
};

/// run: episodes for every case, appended in case order to
/// <out>/traces.jsonl, artifacts under <out>/artifacts, manifest at
/// <out>/manifest.json. With `resume`, cases already listed as completed in
/// an existing manifest are skipped.
RunManifest run_command(const Config& config, const RunOptions& options);

/// Reference report by case id.
using ReferenceLookup = std::function<std::string(const std::string& caseId)>;

/// From a case-bundle directory, or a JSONL file of {case_id, report}.
ReferenceLookup reference_lookup(const std::string& source, const Vocabulary& vocab);

/// reward: scores every trace in the file at the given step.
std::vector<rewards::RewardBreakdown> reward_command(const Config& config, const Backends& backends, const std::string& tracesPath,
                                                     const ReferenceLookup& references, int step);

struct SystemReports
{
    std::string name;
    std::vector<std::string> case_ids;
    std::vector<std::string> reports;
};

/// A predictions file: JSONL of traces (final_report, empty when absent) or
/// of {case_id, report}.
SystemReports read_reports(const std::string& path);

struct SystemEval
{
    std::string name;
    eval::F1Table f1;
    eval::MetricResult macro;
    eval::MetricResult micro;
    std::optional<double> p_macro; // permutation test against the first system
    std::optional<double> p_micro;
};

struct EvalResult
{
    std::vector<SystemEval> systems;
    std::vector<std::string> case_ids;
    EvalConfig settings;

    [[nodiscard]] nlohmann::json to_json(const Vocabulary& vocab) const;
    /// One row per (system, metric): point, CI, n, seed and p-value.
    [[nodiscard]] std::string to_csv() const;
};

/// eval: F1 tables with bootstrap CIs for every system and paired
/// permutation tests of each later system against the first. All systems
/// must cover the same cases.
EvalResult eval_command(const std::vector<SystemReports>& systems, const ReferenceLookup& references, const Labeler& labeler,
                        const EvalConfig& settings);

/// Wraps episodes on stored cases as a system under test for the hint
/// experiment. The admission judge sees every reasoning step and the answer.
eval::ReportSystem agent_system(std::shared_ptr<runtime::PolicyClient> policy, std::shared_ptr<const tools::Toolbox> toolbox,
                                std::shared_ptr<const sim::CaseStore> store, runtime::AgentConfig agent, std::string artifactRoot);

struct HintOptions
{
    std::string cases_dir;
    std::string out_dir;
    std::string agent = "checklist";

    [[nodiscard]] nlohmann::json to_json() const;
    static HintOptions from_json(const nlohmann::json& j);
};

/// hint-exp: runs the paired experiment (settings from config.hint) and
/// writes records.jsonl, results.json, results.csv and manifest.json.
RunManifest hint_command(const Config& config, const HintOptions& options);

/// Re-runs the command recorded in a manifest into `outDir` and returns the
/// outputs whose digests differ (empty on a faithful replay).
std::vector<std::string> replay_command(const std::string& manifestPath, const std::string& outDir);

} // namespace tracelab::pipeline
