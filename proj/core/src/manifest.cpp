// SPDX-License-Identifier: Apache-2.0
#include "tracelab/manifest.hpp"

#include "tracelab/common.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>

namespace tracelab
{

namespace fs = std::filesystem;
using nlohmann::json;

json RunManifest::to_json() const
{
    return {{"run_id", run_id},
            {"command", command},
            {"options", options},
            {"config", config},
            {"config_hash", config_hash},
            {"seeds", seeds},
            {"outputs", outputs},
            {"completed", completed},
            {"skipped", skipped},
            {"timing", {{"started_at", started_at}, {"finished_at", finished_at}, {"elapsed_seconds", elapsed_seconds}}}};
}

RunManifest RunManifest::from_json(const json& j)
{
    RunManifest m;
    try
    {
        m.run_id = j.at("run_id").get<std::string>();
        m.command = j.at("command").get<std::string>();
        m.options = j.value("options", json::object());
        m.config = j.value("config", json::object());
        m.config_hash = j.value("config_hash", "");
        m.seeds = j.value("seeds", json::object());
        m.outputs = j.value("outputs", std::map<std::string, std::string> {});
        m.completed = j.value("completed", std::vector<std::string> {});
        m.skipped = j.value("skipped", std::vector<std::string> {});
        if (j.contains("timing"))
        {
            const auto& t = j.at("timing");
            m.started_at = t.value("started_at", "");
            m.finished_at = t.value("finished_at", "");
            m.elapsed_seconds = t.value("elapsed_seconds", 0.0);
        }
    }
    catch (const json::exception& e)
    {
        throw FormatError(std::string("manifest: ") + e.what());
    }
    return m;
}

void RunManifest::save(const std::string& path) const
{
    write_file(path, to_json().dump(2) + "\n");
}

RunManifest RunManifest::load(const std::string& path)
{
    try
    {
        return from_json(json::parse(read_file(path)));
    }
    catch (const json::parse_error& e)
    {
        throw FormatError(path + ": " + e.what());
    }
}

std::string make_run_id(const std::string& command, const json& options, const std::string& configHash)
{
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(fnv1a64(command + "\n" + options.dump() + "\n" + configHash)));
    return std::string("run-") + hex;
}

std::map<std::string, std::string> digest_tree(const std::string& dir, const std::set<std::string>& exclude)
{
    std::map<std::string, std::string> out;
    if (!fs::exists(dir))
        return out;
    for (const auto& e: fs::recursive_directory_iterator(dir))
    {
        if (!e.is_regular_file())
            continue;
        const auto rel = fs::relative(e.path(), dir).generic_string();
        if (!exclude.count(rel))
            out[rel] = sha256_hex(read_file(e.path().string()));
    }
    return out;
}

std::vector<std::string> diff_digests(const std::map<std::string, std::string>& expected, const std::map<std::string, std::string>& actual)
{
    std::vector<std::string> out;
    for (const auto& [path, digest]: expected)
    {
        const auto it = actual.find(path);
        if (it == actual.end() || it->second != digest)
            out.push_back(path);
    }
    for (const auto& [path, digest]: actual)
        if (!expected.count(path))
            out.push_back(path);
    return out;
}

std::string utc_now()
{
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm {};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

} // namespace tracelab
