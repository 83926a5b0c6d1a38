// SPDX-License-Identifier: Apache-2.0
#include "support.hpp"
#include "tracelab/config.hpp"
#include "tracelab/io.hpp"
#include "tracelab/manifest.hpp"
#include "tracelab/pipeline.hpp"
#include "tracelab/service.hpp"

#include <doctest.h>
#include <httplib.h>

#include <cstdlib>
#include <fstream>

using namespace tracelab;
using tracelab::testing::TempDir;
using tracelab::testing::TraceBuilder;
using nlohmann::json;

namespace
{

const Vocabulary& vocab()
{
    return Vocabulary::default_vocabulary();
}

std::vector<std::string> lines(const std::string& path)
{
    std::ifstream in(path);
    std::vector<std::string> out;
    for (std::string l; std::getline(in, l);)
        if (!l.empty())
            out.push_back(l);
    return out;
}

// An unused local port: bind, read it back, release.
int dead_port()
{
    httplib::Server s;
    const int port = s.bind_to_any_port("127.0.0.1");
    return port;
}

struct EnvVar
{
    std::string name;
    EnvVar(std::string n, const std::string& value): name(std::move(n)) { ::setenv(name.c_str(), value.c_str(), 1); }
    ~EnvVar() { ::unsetenv(name.c_str()); }
};

} // namespace

TEST_CASE("config rejects unknown keys and bad values with the key named")
{
    const auto message = [](const json& j) {
        try
        {
            (void)Config::from_json(j);
        }
        catch (const ConfigError& e)
        {
            return std::string(e.what());
        }
        return std::string();
    };
    CHECK(message({{"nosie", json::object()}}).find("nosie") != std::string::npos);
    CHECK(message({{"service", {{"prot", 1}}}}).find("prot") != std::string::npos);
    CHECK(message({{"n_avail", 0}}).find("n_avail") != std::string::npos);
    CHECK(message({{"n_avail", "ten"}}).find("n_avail") != std::string::npos);
    CHECK_FALSE(message({{"tools", {{"not_a_tool", {{"binding", "sim"}}}}}}).empty());
    CHECK_FALSE(message({{"tools", {{"windowing", {{"binding", "mcp"}, {"server", "missing"}}}}}}).empty());
    CHECK_FALSE(message({{"backends", {{"labeler", "magic"}}}}).empty());
    CHECK_FALSE(message({{"mcp_servers", {{"x", {{"command", {"a"}}, {"url", "http://x"}}}}}}).empty());
    CHECK_FALSE(message({{"eval", {{"level", 1.5}}}}).empty());
    CHECK_FALSE(message({{"noise", {{"draft_miss_rate", 2.0}}}}).empty());
    CHECK(message(json::object()).empty());
}

TEST_CASE("config snapshot, hash and secrets")
{
    Config c = Config::from_json({{"noise", {{"draft_miss_rate", 0.5}}}, {"policy", {{"url", "http://p"}, {"api_key", "sk-123"}}}});
    CHECK(c.noise.draft_miss_rate == 0.5);
    const auto snap = c.to_json();
    CHECK(snap.dump().find("sk-123") == std::string::npos);
    const auto back = Config::from_json(snap);
    CHECK(back.hash() == c.hash());
    CHECK(c.hash().size() == 64);
    Config d = c;
    d.noise.draft_miss_rate = 0.4;
    CHECK(d.hash() != c.hash());
}

TEST_CASE("config file load and environment overrides")
{
    TempDir dir("config");
    write_file(dir / "c.json", R"({"policy": {"url": "http://file"}, "backends": {"judge": {"url": "http://judge-file"}}})");
    {
        EnvVar a("TRACELAB_POLICY_URL", "http://env-policy");
        EnvVar b("TRACELAB_API_KEY", "secret");
        const auto c = Config::load(dir / "c.json");
        CHECK(c.policy_endpoint.url == "http://env-policy");
        CHECK(c.policy_endpoint.api_key == "secret");
        CHECK(c.backends.judge_endpoint.url == "http://judge-file");
        CHECK(c.backends.judge_endpoint.api_key == "secret");
        CHECK(c.to_json().dump().find("secret") == std::string::npos);
    }
    CHECK(Config::load(dir / "c.json").policy_endpoint.url == "http://file");
    write_file(dir / "bad.json", "{ not json");
    CHECK_THROWS_AS((void)Config::load(dir / "bad.json"), ConfigError);
    CHECK_THROWS_AS((void)Config::load(dir / "missing.json"), ConfigError);
}

TEST_CASE("manifest round trip and digests")
{
    TempDir dir("manifest");
    write_file(dir / "a.txt", "alpha");
    std::filesystem::create_directories(dir.path() / "sub");
    write_file(dir / "sub/b.txt", "beta");
    write_file(dir / "manifest.json", "{}");
    const auto d = digest_tree(dir.str());
    CHECK(d.size() == 2);
    CHECK(d.count("sub/b.txt") == 1);
    CHECK(d.at("a.txt") == "8ed3f6ad685b959ead7022518e1af76cd816f8e8ec7ccdda1ed4018e8f2223f8");

    auto changed = d;
    changed["a.txt"] = "0";
    changed["c.txt"] = "1";
    CHECK(diff_digests(d, changed) == std::vector<std::string> {"a.txt", "c.txt"});
    CHECK(diff_digests(d, d).empty());

    RunManifest m;
    m.command = "simgen";
    m.options = {{"n", 3}};
    m.config_hash = "abc";
    m.run_id = make_run_id(m.command, m.options, m.config_hash);
    m.outputs = d;
    m.completed = {"x"};
    m.save(dir / "m.json");
    const auto back = RunManifest::load(dir / "m.json");
    CHECK(back.to_json() == m.to_json());
    CHECK(m.run_id.rfind("run-", 0) == 0);
    CHECK(m.run_id.size() == 20);
    CHECK(make_run_id("simgen", {{"n", 4}}, "abc") != m.run_id);
}

TEST_CASE("simgen is deterministic and replayable")
{
    TempDir a("simgen-a"), b("simgen-b"), c("simgen-c");
    const Config config;
    const auto m1 = pipeline::simgen_command(config, 5, 1, a.str());
    const auto m2 = pipeline::simgen_command(config, 5, 1, b.str());
    CHECK(m1.outputs == m2.outputs);
    CHECK(m1.outputs.size() > 5);
    CHECK(pipeline::list_cases(a.str()).size() == 5);
    CHECK(pipeline::list_cases(a.str()).front() == pipeline::case_id(0));
    const auto m3 = pipeline::simgen_command(config, 5, 2, c.str());
    CHECK(m3.outputs != m1.outputs);
    TempDir r("simgen-replay");
    CHECK(pipeline::replay_command(a / "manifest.json", r.str()).empty());
    CHECK_THROWS_AS((void)pipeline::list_cases(r / "nowhere"), ConfigError);
}

TEST_CASE("run, resume and replay")
{
    TempDir cases("run-cases"), full("run-full"), part("run-part");
    Config config;
    config.noise.draft_miss_rate = 0.5;
    (void)pipeline::simgen_command(config, 6, 3, cases.str());

    pipeline::RunOptions o;
    o.cases_dir = cases.str();
    o.out_dir = full.str();
    o.workers = 3;
    const auto m = pipeline::run_command(config, o);
    const auto traces = lines(full / "traces.jsonl");
    REQUIRE(traces.size() == 6);
    for (size_t i = 0; i < traces.size(); ++i)
    {
        const auto t = Trace::from_json(json::parse(traces[i]));
        CHECK(t.case_ref == pipeline::case_id(i));
        CHECK(t.termination == Termination::final_answer);
    }
    CHECK(m.completed.size() == 6);

    // A partial run of the first two cases, then resumed to completion.
    o.out_dir = part.str();
    o.limit = 2;
    o.workers = 1;
    (void)pipeline::run_command(config, o);
    CHECK(lines(part / "traces.jsonl").size() == 2);
    o.limit = 0;
    o.resume = true;
    const auto resumed = pipeline::run_command(config, o);
    CHECK(lines(part / "traces.jsonl") == traces);
    CHECK(resumed.completed.size() == 6);

    Config other = config;
    other.noise.draft_miss_rate = 0.1;
    CHECK_THROWS_AS((void)pipeline::run_command(other, o), ConfigError);

    TempDir r("run-replay");
    CHECK(pipeline::replay_command(full / "manifest.json", r.str()).empty());

    o.agent = "no-such-agent";
    o.resume = false;
    o.out_dir = (r / "x");
    CHECK_THROWS_AS((void)pipeline::run_command(config, o), ConfigError);
}

TEST_CASE("policies by name")
{
    const Config config;
    for (const auto* name: {"checklist", "evidence-anchored", "draft-only", "hint-echo", "hint-ack", "http"})
        CHECK(pipeline::make_policy(name, config, vocab()) != nullptr);
    CHECK_THROWS_AS((void)pipeline::make_policy("unknown", config, vocab()), ConfigError);
}

TEST_CASE("toolbox bindings from config")
{
    auto store = std::make_shared<sim::CaseStore>(vocab());
    const auto box = make_toolbox(Config {}, store);
    REQUIRE(box->size() == 10);
    CHECK(box->find("windowing")->binding.kind == tools::Binding::Kind::builtin);
    CHECK(box->find("ct_vqa")->binding.kind == tools::Binding::Kind::sim);
#ifdef TRACELAB_MCP_BIN
    const auto c = Config::from_json({{"mcp_servers", {{"imaging", {{"command", {TRACELAB_MCP_BIN}}}}}},
                                      {"tools", {{"windowing", {{"binding", "mcp"}, {"server", "imaging"}, {"gpu_group", 1}}}}}});
    const auto mixed = make_toolbox(c, store);
    REQUIRE(mixed->size() == 10);
    CHECK(mixed->descriptors()[9].name == "windowing");
    CHECK(mixed->find("windowing")->binding.kind == tools::Binding::Kind::mcp);
    CHECK(mixed->find("windowing")->same_contract(*box->find("windowing")));
    CHECK(c.tools.at("windowing").metadata["gpu_group"] == 1);
#endif
}

TEST_CASE("eval over prediction files")
{
    TempDir dir("eval");
    const auto cases = pipeline::generate_cases(20, 4, {}, vocab());
    std::ofstream refs(dir / "refs.jsonl"), a(dir / "a.jsonl"), b(dir / "b.jsonl");
    for (const auto& c: cases)
    {
        refs << json {{"case_id", c.case_id}, {"report", c.gt_report}}.dump() << "\n";
        a << json {{"case_id", c.case_id}, {"report", c.gt_report}}.dump() << "\n";
        b << json {{"case_id", c.case_id}, {"report", vocab().normal_impression()}}.dump() << "\n";
    }
    refs.close();
    a.close();
    b.close();
    const RuleBasedLabeler labeler(vocab());
    EvalConfig settings;
    settings.n_boot = 200;
    settings.n_perm = 200;
    const auto result = pipeline::eval_command({pipeline::read_reports(dir / "a.jsonl"), pipeline::read_reports(dir / "b.jsonl")},
                                               pipeline::reference_lookup(dir / "refs.jsonl", vocab()), labeler, settings);
    REQUIRE(result.systems.size() == 2);
    CHECK(result.systems[0].macro.point == 1.0);
    CHECK(result.systems[0].micro.point == 1.0);
    CHECK_FALSE(result.systems[0].p_macro);
    REQUIRE(result.systems[1].p_macro);
    CHECK(*result.systems[1].p_macro < 0.05);
    CHECK(result.systems[1].micro.point == 0.0);
    const auto csv = result.to_csv();
    CHECK(csv.rfind("system,metric,point,ci_low,ci_high,n,n_boot,seed,p_value", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
    CHECK(result.to_json(vocab())["systems"].size() == 2);

    auto shortB = pipeline::read_reports(dir / "b.jsonl");
    shortB.case_ids.pop_back();
    shortB.reports.pop_back();
    CHECK_THROWS_AS((void)pipeline::eval_command({pipeline::read_reports(dir / "a.jsonl"), shortB},
                                                 pipeline::reference_lookup(dir / "refs.jsonl", vocab()), labeler, settings),
                    std::invalid_argument);
    CHECK_THROWS_AS((void)pipeline::reference_lookup(dir / "refs.jsonl", vocab())("case-missing"), std::out_of_range);
}

TEST_CASE("scoring service")
{
    TempDir cases("svc");
    const Config config;
    (void)pipeline::simgen_command(config, 2, 8, cases.str());
    auto backends = make_backends(config, load_vocabulary(config));
    const auto refs = pipeline::reference_lookup(cases.str(), vocab());

    TempDir out("svc-run");
    pipeline::RunOptions o;
    o.cases_dir = cases.str();
    o.out_dir = out.str();
    (void)pipeline::run_command(config, o);
    const auto traceLine = lines(out / "traces.jsonl").front();
    const auto trace = Trace::from_json(json::parse(traceLine));
    const auto expected = pipeline::reward_command(config, backends, out / "traces.jsonl", refs, 120).front();

    ScoringService service(config, make_backends(config, load_vocabulary(config)));
    const json request {{"trace", trace.to_json()}, {"reference_report", refs(trace.case_ref)}, {"step", 120}};
    const auto [status, body] = service.handle_score(request.dump());
    CHECK(status == 200);
    CHECK(rewards::RewardBreakdown::from_json(body) == expected);
    CHECK(body["phase"] == "late");

    auto noFinal = request;
    noFinal["trace"] = TraceBuilder(trace.case_ref).call("report_generation", {}, true, "x").build().to_json();
    CHECK(service.handle_score(noFinal.dump()).first == 400);
    auto noStep = request;
    noStep.erase("step");
    CHECK(service.handle_score(noStep.dump()).first == 400);
    auto negative = request;
    negative["step"] = -1;
    CHECK(service.handle_score(negative.dump()).first == 400);
    CHECK(service.handle_score("not json").first == 400);
    CHECK(service.handle_score(json {{"trace", 1}, {"reference_report", "r"}, {"step", 0}}.dump()).first == 400);
    const auto errorBody = service.handle_score(noStep.dump()).second;
    CHECK(errorBody.contains("error"));
    CHECK_FALSE(errorBody.contains("total"));

    const int port = service.start("127.0.0.1", 0);
    httplib::Client client("127.0.0.1", port);
    const auto health = client.Get("/health");
    REQUIRE(health);
    CHECK(health->status == 200);
    CHECK(json::parse(health->body)["config_hash"] == config.hash());
    const auto res = client.Post("/score", request.dump(), "application/json");
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(rewards::RewardBreakdown::from_json(json::parse(res->body)) == expected);
    service.stop();
}

TEST_CASE("service reports an unreachable judge as 503")
{
    Config config = Config::from_json({{"backends",
                                        {{"sequence_judge", "remote"},
                                         {"judge", {{"url", "http://127.0.0.1:" + std::to_string(dead_port()) + "/v1/chat/completions"},
                                                    {"retries", 0},
                                                    {"timeout_ms", 500}}}}}});
    ScoringService service(config, make_backends(config, load_vocabulary(config)));
    const auto trace = TraceBuilder().call("report_generation", {}, true, "x").answer(vocab().normal_impression()).build();
    const json early {{"trace", trace.to_json()}, {"reference_report", vocab().normal_impression()}, {"step", 10}};
    CHECK(service.handle_score(early.dump()).first == 200);
    auto late = early;
    late["step"] = 120;
    const auto [status, body] = service.handle_score(late.dump());
    CHECK(status == 503);
    CHECK_FALSE(body.contains("total"));

    const RemoteLabeler labeler(vocab(), "http://127.0.0.1:" + std::to_string(dead_port()) + "/label", std::chrono::milliseconds(500));
    CHECK_THROWS_AS((void)labeler.extract("text"), TransportError);
}

#ifdef TRACELAB_CLI_BIN
TEST_CASE("CLI exit codes")
{
    TempDir dir("cli");
    write_file(dir / "bad.json", R"({"unknown_key": 1})");
    const std::string cli = TRACELAB_CLI_BIN;
    const auto run = [](const std::string& cmd) {
        const int rc = std::system((cmd + " >/dev/null 2>&1").c_str());
        return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
    };
    CHECK(run(cli + " -c " + (dir / "bad.json") + " simgen --n 1 -o " + (dir / "x")) == 2);
    CHECK(run(cli + " simgen --n 2 --seed 1 -o " + (dir / "a")) == 0);
    CHECK(run(cli + " simgen --n 2 --seed 1 -o " + (dir / "b")) == 0);
    CHECK(read_file(dir / "a/index.json") == read_file(dir / "b/index.json"));
    CHECK(run(cli + " run --cases " + (dir / "nowhere") + " -o " + (dir / "r")) != 0);
    CHECK(run(cli + " --help") == 0);
}
#endif
