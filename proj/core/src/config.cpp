// SPDX-License-Identifier: Apache-2.0
#include "tracelab/config.hpp"

#include "tracelab/common.hpp"
#include "tracelab/mcp.hpp"
#include "tracelab/prompts.hpp"

#include <algorithm>
#include <cstdlib>
#include <set>

namespace tracelab
{

using nlohmann::json;

namespace
{
    void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where)
    {
        if (!j.is_object())
            throw ConfigError(where + " must be a JSON object");
        for (const auto& [key, value]: j.items())
            if (!known.count(key))
                throw ConfigError("unknown key '" + key + "' in " + where);
    }

    template <class T>
    void read(const json& j, const char* key, T& out, const std::string& where)
    {
        if (!j.contains(key))
            return;
        try
        {
            out = j.at(key).get<T>();
        }
        catch (const json::exception&)
        {
            throw ConfigError(where + "." + key + " has the wrong type");
        }
    }

    std::string env(const char* name)
    {
        const char* v = std::getenv(name);
        return v ? std::string(v) : std::string();
    }

    chat::Endpoint endpoint_from(const json& j, const std::string& where)
    {
        reject_unknown(j, {"url", "model", "api_key", "timeout_ms", "retries", "backoff_ms"}, where);
        return chat::Endpoint::from_json(j);
    }
} // namespace

Config Config::from_json(const json& j)
{
    reject_unknown(j,
                   {"vocabulary", "checklist", "agent", "policy", "schedule", "graph", "n_avail", "noise", "cases", "tools", "mcp_servers",
                    "backends", "service", "eval", "hint"},
                   "config");
    Config c;
    read(j, "vocabulary", c.vocabulary_path, "config");
    read(j, "checklist", c.checklist_path, "config");
    if (j.contains("agent"))
        c.agent = runtime::AgentConfig::from_json(j.at("agent"));
    if (j.contains("policy"))
        c.policy_endpoint = endpoint_from(j.at("policy"), "policy");
    if (j.contains("schedule"))
        c.schedule = rewards::Schedule::from_json(j.at("schedule"));
    if (j.contains("graph"))
    {
        reject_unknown(j.at("graph"), {"strict_text"}, "graph");
        read(j.at("graph"), "strict_text", c.graph.strict_text, "graph");
    }
    read(j, "n_avail", c.n_avail, "config");
    if (c.n_avail < 1)
        throw ConfigError("n_avail must be >= 1");
    try
    {
        if (j.contains("noise"))
            c.noise = sim::NoiseProfile::from_json(j.at("noise"));
        if (j.contains("cases"))
            c.cases = sim::CaseConfig::from_json(j.at("cases"));
    }
    catch (const json::exception& e)
    {
        throw ConfigError(std::string("noise/cases: ") + e.what());
    }
    catch (const std::invalid_argument& e)
    {
        throw ConfigError(std::string("noise/cases: ") + e.what());
    }

    if (j.contains("mcp_servers"))
        for (const auto& [name, s]: j.at("mcp_servers").items())
        {
            const auto where = "mcp_servers." + name;
            reject_unknown(s, {"command", "url", "timeout_ms"}, where);
            McpServerConfig m;
            read(s, "command", m.command, where);
            read(s, "url", m.url, where);
            read(s, "timeout_ms", m.timeout_ms, where);
            if (m.command.empty() == m.url.empty())
                throw ConfigError(where + " needs exactly one of 'command' or 'url'");
            c.mcp_servers[name] = m;
        }
    if (j.contains("tools"))
    {
        const auto& names = tools::default_tool_names();
        for (const auto& [name, t]: j.at("tools").items())
        {
            const auto where = "tools." + name;
            if (std::find(names.begin(), names.end(), name) == names.end())
                throw ConfigError(where + ": not one of the ten tools");
            reject_unknown(t, {"binding", "server", "gpu_group", "metadata"}, where);
            ToolBindingConfig b;
            read(t, "binding", b.binding, where);
            read(t, "server", b.server, where);
            if (t.contains("gpu_group"))
                b.metadata["gpu_group"] = t.at("gpu_group");
            if (t.contains("metadata"))
                b.metadata.update(t.at("metadata"));
            if (b.binding != "builtin" && b.binding != "sim" && b.binding != "mcp")
                throw ConfigError(where + ".binding must be builtin, sim or mcp");
            if (b.binding == "mcp" && !c.mcp_servers.count(b.server))
                throw ConfigError(where + ".server '" + b.server + "' is not listed in mcp_servers");
            c.tools[name] = b;
        }
    }
    if (j.contains("backends"))
    {
        const auto& b = j.at("backends");
        reject_unknown(b,
                       {"labeler", "labeler_url", "labeler_threshold", "findings_judge", "sequence_judge", "hint_judge", "judge", "judge_seed",
                        "hint_judge_temperature", "acknowledgment_patterns"},
                       "backends");
        auto& o = c.backends;
        read(b, "labeler", o.labeler, "backends");
        read(b, "labeler_url", o.labeler_url, "backends");
        read(b, "labeler_threshold", o.labeler_threshold, "backends");
        read(b, "findings_judge", o.findings_judge, "backends");
        read(b, "sequence_judge", o.sequence_judge, "backends");
        read(b, "hint_judge", o.hint_judge, "backends");
        if (b.contains("judge"))
            o.judge_endpoint = endpoint_from(b.at("judge"), "backends.judge");
        read(b, "judge_seed", o.judge_seed, "backends");
        read(b, "hint_judge_temperature", o.hint_judge_temperature, "backends");
        read(b, "acknowledgment_patterns", o.acknowledgment_patterns, "backends");
        if (o.labeler != "rule" && o.labeler != "remote")
            throw ConfigError("backends.labeler must be rule or remote");
        for (const auto* kind: {&o.findings_judge, &o.sequence_judge, &o.hint_judge})
            if (*kind != "scripted" && *kind != "remote")
                throw ConfigError("judge backends must be scripted or remote, got '" + *kind + "'");
    }
    if (j.contains("service"))
    {
        const auto& s = j.at("service");
        reject_unknown(s, {"host", "port", "max_concurrent", "request_timeout_ms"}, "service");
        read(s, "host", c.service.host, "service");
        read(s, "port", c.service.port, "service");
        read(s, "max_concurrent", c.service.max_concurrent, "service");
        read(s, "request_timeout_ms", c.service.request_timeout_ms, "service");
        if (c.service.max_concurrent < 1 || c.service.request_timeout_ms < 1)
            throw ConfigError("service.max_concurrent and service.request_timeout_ms must be positive");
    }
    if (j.contains("eval"))
    {
        const auto& e = j.at("eval");
        reject_unknown(e, {"n_boot", "n_perm", "level", "seed"}, "eval");
        read(e, "n_boot", c.eval.n_boot, "eval");
        read(e, "n_perm", c.eval.n_perm, "eval");
        read(e, "level", c.eval.level, "eval");
        read(e, "seed", c.eval.seed, "eval");
        if (c.eval.n_boot < 1 || c.eval.n_perm < 1 || !(c.eval.level > 0 && c.eval.level < 1))
            throw ConfigError("eval needs n_boot >= 1, n_perm >= 1 and level in (0, 1)");
    }
    if (j.contains("hint"))
        c.hint = eval::HintExperimentConfig::from_json(j.at("hint"));
    return c;
}

Config Config::load(const std::string& path)
{
    json j;
    try
    {
        j = json::parse(read_file(path));
    }
    catch (const json::parse_error& e)
    {
        throw ConfigError(path + ": " + e.what());
    }
    catch (const std::runtime_error& e)
    {
        throw ConfigError(std::string(e.what()));
    }
    auto c = from_json(j);
    c.apply_env_overrides();
    return c;
}

json Config::to_json() const
{
    json tj = json::object();
    for (const auto& [name, b]: tools)
    {
        json e = {{"binding", b.binding}};
        if (!b.server.empty())
            e["server"] = b.server;
        if (!b.metadata.empty())
            e["metadata"] = b.metadata;
        tj[name] = e;
    }
    json sj = json::object();
    for (const auto& [name, s]: mcp_servers)
    {
        json e = {{"timeout_ms", s.timeout_ms}};
        if (!s.command.empty())
            e["command"] = s.command;
        else
            e["url"] = s.url;
        sj[name] = e;
    }
    return {{"vocabulary", vocabulary_path},
            {"checklist", checklist_path},
            {"agent", agent.to_json()},
            {"policy", policy_endpoint.to_json()},
            {"schedule", schedule.to_json()},
            {"graph", {{"strict_text", graph.strict_text}}},
            {"n_avail", n_avail},
            {"noise", noise.to_json()},
            {"cases", cases.to_json()},
            {"tools", tj},
            {"mcp_servers", sj},
            {"backends",
             {{"labeler", backends.labeler},
              {"labeler_url", backends.labeler_url},
              {"labeler_threshold", backends.labeler_threshold},
              {"findings_judge", backends.findings_judge},
              {"sequence_judge", backends.sequence_judge},
              {"hint_judge", backends.hint_judge},
              {"judge", backends.judge_endpoint.to_json()},
              {"judge_seed", backends.judge_seed},
              {"hint_judge_temperature", backends.hint_judge_temperature},
              {"acknowledgment_patterns", backends.acknowledgment_patterns}}},
            {"service",
             {{"host", service.host},
              {"port", service.port},
              {"max_concurrent", service.max_concurrent},
              {"request_timeout_ms", service.request_timeout_ms}}},
            {"eval", {{"n_boot", eval.n_boot}, {"n_perm", eval.n_perm}, {"level", eval.level}, {"seed", eval.seed}}},
            {"hint", hint.to_json()}};
}

std::string Config::hash() const
{
    return sha256_hex(to_json().dump());
}

void Config::apply_env_overrides()
{
    if (auto v = env("TRACELAB_POLICY_URL"); !v.empty())
        policy_endpoint.url = v;
    if (auto v = env("TRACELAB_JUDGE_URL"); !v.empty())
        backends.judge_endpoint.url = v;
    if (auto v = env("TRACELAB_LABELER_URL"); !v.empty())
        backends.labeler_url = v;
    if (auto v = env("TRACELAB_API_KEY"); !v.empty())
    {
        policy_endpoint.api_key = v;
        backends.judge_endpoint.api_key = v;
    }
}

std::shared_ptr<const Vocabulary> load_vocabulary(const Config& config)
{
    if (config.vocabulary_path.empty())
        return std::shared_ptr<const Vocabulary>(&Vocabulary::default_vocabulary(), [](const Vocabulary*) {});
    return std::make_shared<const Vocabulary>(Vocabulary::load(config.vocabulary_path));
}

std::string load_checklist(const Config& config)
{
    if (config.checklist_path.empty())
        return prompts::diagnosis_checklist();
    auto text = trim(read_file(config.checklist_path));
    if (text.empty())
        throw ConfigError("checklist file " + config.checklist_path + " is empty");
    return text;
}

rewards::ScoringContext Backends::scoring(const Config& config) const
{
    rewards::ScoringContext ctx;
    ctx.labeler = labeler.get();
    ctx.findings_judge = findings_judge.get();
    ctx.sequence_judge = sequence_judge.get();
    ctx.n_avail = config.n_avail;
    ctx.schedule = config.schedule;
    ctx.graph = config.graph;
    return ctx;
}

Backends make_backends(const Config& config, std::shared_ptr<const Vocabulary> vocab)
{
    Backends b;
    b.vocab = std::move(vocab);
    const auto& o = config.backends;
    if (o.labeler == "remote")
    {
        if (o.labeler_url.empty())
            throw ConfigError("remote labeler needs backends.labeler_url");
        b.labeler = std::make_unique<RemoteLabeler>(*b.vocab, o.labeler_url, o.judge_endpoint.timeout, o.labeler_threshold);
    }
    else
        b.labeler = std::make_unique<RuleBasedLabeler>(*b.vocab);

    const auto remote = [&](double temperature) {
        if (o.judge_endpoint.url.empty())
            throw ConfigError("remote judges need backends.judge.url");
        return judges::endpoint_completer(o.judge_endpoint, {temperature, 4096, o.judge_seed});
    };
    if (o.findings_judge == "remote")
        b.findings_judge = std::make_unique<judges::RemoteFindingsJudge>(remote(0.0));
    else
        b.findings_judge = std::make_unique<judges::ScriptedFindingsJudge>(*b.vocab);
    if (o.sequence_judge == "remote")
        b.sequence_judge = std::make_unique<judges::RemoteSequenceJudge>(remote(0.0));
    else
        b.sequence_judge = std::make_unique<judges::ScriptedSequenceJudge>(*b.vocab);
    if (o.hint_judge == "remote")
        b.hint_judge = std::make_unique<judges::RemoteHintJudge>(remote(o.hint_judge_temperature));
    else
        b.hint_judge = std::make_unique<judges::ScriptedHintJudge>(o.acknowledgment_patterns);
    return b;
}

std::shared_ptr<tools::Toolbox> make_toolbox(const Config& config, std::shared_ptr<const sim::CaseStore> store)
{
    auto local = std::make_shared<tools::Toolbox>(tools::make_sim_toolbox(std::move(store), config.noise));
    std::map<std::string, std::vector<std::string>> remoteByServer;
    for (const auto& [name, b]: config.tools)
        if (b.binding == "mcp")
            remoteByServer[b.server].push_back(name);
    if (remoteByServer.empty())
        return local;

    std::map<std::string, std::shared_ptr<tools::Toolbox>> bound;
    for (const auto& [server, names]: remoteByServer)
    {
        const auto& s = config.mcp_servers.at(server);
        std::shared_ptr<mcp::Client> client;
        if (!s.command.empty())
            client = std::make_shared<mcp::StdioClient>(s.command, std::chrono::milliseconds(s.timeout_ms));
        else
            client = std::make_shared<mcp::HttpClient>(s.url, std::chrono::milliseconds(s.timeout_ms));
        auto box = std::make_shared<tools::Toolbox>();
        mcp::bind_tools(*box, client, names);
        bound[server] = box;
    }

    auto out = std::make_shared<tools::Toolbox>();
    for (const auto& d: local->descriptors())
    {
        const auto it = config.tools.find(d.name);
        if (it != config.tools.end() && it->second.binding == "mcp")
        {
            auto box = bound.at(it->second.server);
            out->add(*box->find(d.name), [box, name = d.name](const json& args, const tools::EpisodeContext& ctx) {
                return box->call(name, args, ctx);
            });
        }
        else
            out->add(d, [local, name = d.name](const json& args, const tools::EpisodeContext& ctx) { return local->call(name, args, ctx); });
    }
    return out;
}

} // namespace tracelab
