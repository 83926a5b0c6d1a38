// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "tracelab/chat.hpp"
#include "tracelab/graph.hpp"
#include "tracelab/hint.hpp"
#include "tracelab/judges.hpp"
#include "tracelab/labeler.hpp"
#include "tracelab/rewards.hpp"
#include "tracelab/runtime.hpp"
#include "tracelab/sim.hpp"
#include "tracelab/tools.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <memory>
#include <string>
#include <vector>

namespace tracelab
{

/// Where one MCP server lives: a command spoken to over stdio, or a URL.
struct McpServerConfig
{
    std::vector<std::string> command;
    std::string url;
    int timeout_ms = 60000;
};

struct ToolBindingConfig
{
    std::string binding; // builtin | sim | mcp
    std::string server;  // mcp only: key into Config::mcp_servers
    nlohmann::json metadata = nlohmann::json::object(); // e.g. gpu_group; informational
};

struct BackendConfig
{
    std::string labeler = "rule";           // rule | remote
    std::string labeler_url;
    double labeler_threshold = 0.5;
    std::string findings_judge = "scripted"; // scripted | remote
    std::string sequence_judge = "scripted";
    std::string hint_judge = "scripted";
    chat::Endpoint judge_endpoint;
    std::int64_t judge_seed = 0;
    double hint_judge_temperature = 0.7;
    std::vector<std::string> acknowledgment_patterns = judges::default_acknowledgment_patterns();
};

struct ServiceConfig
{
    std::string host = "127.0.0.1";
    int port = 8080;
    int max_concurrent = 4;
    int request_timeout_ms = 120000;
};

struct EvalConfig
{
    int n_boot = 2000;
    int n_perm = 10000;
    double level = 0.95;
    std::uint64_t seed = 0;
};

/// The single configuration root. Loading rejects unknown keys so typos fail
/// loudly; endpoints and secrets may be overridden from the environment
/// (TRACELAB_POLICY_URL, TRACELAB_JUDGE_URL, TRACELAB_LABELER_URL,
/// TRACELAB_API_KEY).
struct Config
{
    std::string vocabulary_path; // empty: bundled vocabulary
    std::string checklist_path;  // empty: bundled checklist
    runtime::AgentConfig agent;
    chat::Endpoint policy_endpoint;
    rewards::Schedule schedule;
    GraphOptions graph;
    int n_avail = 10;
    sim::NoiseProfile noise;
    sim::CaseConfig cases;
    std::map<std::string, ToolBindingConfig> tools;
    std::map<std::string, McpServerConfig> mcp_servers;
    BackendConfig backends;
    ServiceConfig service;
    EvalConfig eval;
    eval::HintExperimentConfig hint;

    /// Throws ConfigError with the offending key.
    static Config from_json(const nlohmann::json& j);
    static Config load(const std::string& path);
    /// Serializable snapshot; API keys are never included.
    [[nodiscard]] nlohmann::json to_json() const;
    /// sha256 of the canonical snapshot.
    [[nodiscard]] std::string hash() const;

    void apply_env_overrides();
};

/// Vocabulary named by the config (or the bundled one).
std::shared_ptr<const Vocabulary> load_vocabulary(const Config& config);
/// Checklist text named by the config (or the bundled one).
std::string load_checklist(const Config& config);

struct Backends
{
    std::shared_ptr<const Vocabulary> vocab;
    std::unique_ptr<Labeler> labeler;
    std::unique_ptr<judges::FindingsJudge> findings_judge;
    std::unique_ptr<judges::SequenceJudge> sequence_judge;
    std::unique_ptr<judges::HintJudge> hint_judge;

    [[nodiscard]] rewards::ScoringContext scoring(const Config& config) const;
};

Backends make_backends(const Config& config, std::shared_ptr<const Vocabulary> vocab);

/// The ten tools with the configured bindings: sim and builtin tools run
/// in-process, mcp tools are bound from their servers.
std::shared_ptr<tools::Toolbox> make_toolbox(const Config& config, std::shared_ptr<const sim::CaseStore> store);

} // namespace tracelab
