// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <nlohmann/json.hpp>

#include <map>
#include <set>
#include <string>
#include <vector>

namespace tracelab
{

/// Everything needed to replay a run: the command, its options, the full
/// configuration, seeds and the digests of every output file.
struct RunManifest
{
    std::string run_id;
    std::string command;
    nlohmann::json options = nlohmann::json::object();
    nlohmann::json config = nlohmann::json::object();
    std::string config_hash;
    nlohmann::json seeds = nlohmann::json::object();
    std::map<std::string, std::string> outputs; // relative path -> sha256
    std::vector<std::string> completed;         // finished work items (case ids)
    std::vector<std::string> skipped;
    std::string started_at;
    std::string finished_at;
    double elapsed_seconds = 0.0;

    [[nodiscard]] nlohmann::json to_json() const;
    static RunManifest from_json(const nlohmann::json& j);
    void save(const std::string& path) const;
    static RunManifest load(const std::string& path);
};

/// "run-" plus 16 hex digits derived from the command, options and config hash.
std::string make_run_id(const std::string& command, const nlohmann::json& options, const std::string& configHash);

/// sha256 of every regular file below `dir`, keyed by relative path with '/'
/// separators; names in `exclude` (relative paths) are skipped.
std::map<std::string, std::string> digest_tree(const std::string& dir, const std::set<std::string>& exclude = {"manifest.json"});

/// Paths whose digests differ or exist on one side only.
std::vector<std::string> diff_digests(const std::map<std::string, std::string>& expected, const std::map<std::string, std::string>& actual);

/// UTC timestamp, ISO 8601.
std::string utc_now();

} // namespace tracelab
