// SPDX-License-Identifier: Apache-2.0
#include "tracelab/pipeline.hpp"

#include "tracelab/agents.hpp"
#include "tracelab/common.hpp"
#include "tracelab/prompts.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace tracelab::pipeline
{

namespace fs = std::filesystem;
using nlohmann::json;

namespace
{
    std::vector<std::string> lines_of(const std::string& text)
    {
        std::vector<std::string> out;
        std::istringstream in(text);
        std::string line;
        while (std::getline(in, line))
            if (!trim(line).empty())
                out.push_back(trim(line));
        return out;
    }

    std::vector<json> read_jsonl(const std::string& path)
    {
        std::ifstream in(path);
        if (!in)
            throw FormatError("cannot open " + path);
        std::vector<json> out;
        std::string line;
        size_t lineNo = 0;
        while (std::getline(in, line))
        {
            ++lineNo;
            if (trim(line).empty())
                continue;
            try
            {
                out.push_back(json::parse(line));
            }
            catch (const json::parse_error& e)
            {
                throw FormatError(path + ":" + std::to_string(lineNo) + ": " + e.what());
            }
        }
        return out;
    }

    // Runs body(i) for i in [0, n) on up to `workers` threads; the first
    // exception is rethrown after all threads finish.
    template <class Body>
    void parallel_for(size_t n, int workers, Body body)
    {
        std::atomic<size_t> next {0};
        std::exception_ptr error;
        std::mutex errorMutex;
        const auto work = [&] {
            for (size_t i = next++; i < n; i = next++)
            {
                try
                {
                    body(i);
                }
                catch (...)
                {
                    std::lock_guard lock(errorMutex);
                    if (!error)
                        error = std::current_exception();
                }
            }
        };
        std::vector<std::thread> pool;
        const auto extra = std::min<size_t>(static_cast<size_t>(std::max(workers, 1)) - 1, n > 0 ? n - 1 : 0);
        for (size_t w = 0; w < extra; ++w)
            pool.emplace_back(work);
        work();
        for (auto& t: pool)
            t.join();
        if (error)
            std::rethrow_exception(error);
    }

    double seconds_since(std::chrono::steady_clock::time_point start)
    {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }

    std::string fmt(double v)
    {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6f", v);
        return buf;
    }

    json metric_or_error(const std::function<eval::MetricResult()>& f)
    {
        try
        {
            return f().to_json();
        }
        catch (const UndefinedMetric& e)
        {
            return {{"error", e.what()}};
        }
    }
} // namespace

std::string case_id(size_t index)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "case-%05zu", index);
    return buf;
}

std::vector<sim::SyntheticCase> generate_cases(size_t n, std::uint64_t seed, const sim::CaseConfig& config, const Vocabulary& vocab)
{
    std::vector<sim::SyntheticCase> out;
    out.reserve(n);
    for (size_t i = 0; i < n; ++i)
        out.push_back(sim::generate_case(case_id(i), mix_seed(seed, static_cast<std::uint64_t>(i)), config, vocab));
    return out;
}

void write_cases(const std::string& dir, const std::vector<sim::SyntheticCase>& cases, const Vocabulary& vocab)
{
    fs::create_directories(dir);
    std::vector<std::string> ids;
    for (const auto& c: cases)
    {
        sim::save_case_bundle((fs::path(dir) / c.case_id).string(), c, vocab);
        ids.push_back(c.case_id);
    }
    write_file((fs::path(dir) / "index.json").string(), json {{"case_ids", ids}}.dump(2) + "\n");
}

std::vector<std::string> list_cases(const std::string& dir)
{
    const auto path = (fs::path(dir) / "index.json").string();
    if (!fs::exists(path))
        throw ConfigError("no case index at " + path + " (run simgen first)");
    try
    {
        return json::parse(read_file(path)).at("case_ids").get<std::vector<std::string>>();
    }
    catch (const json::exception& e)
    {
        throw FormatError(path + ": " + e.what());
    }
}

RunManifest simgen_command(const Config& config, size_t n, std::uint64_t seed, const std::string& outDir)
{
    const auto start = std::chrono::steady_clock::now();
    RunManifest m;
    m.command = "simgen";
    m.options = {{"n", n}, {"seed", seed}, {"out_dir", outDir}};
    m.config = config.to_json();
    m.config_hash = config.hash();
    m.run_id = make_run_id(m.command, m.options, m.config_hash);
    m.seeds = {{"case_seed", seed}};
    m.started_at = utc_now();

    const auto vocab = load_vocabulary(config);
    const auto cases = generate_cases(n, seed, config.cases, *vocab);
    write_cases(outDir, cases, *vocab);
    for (const auto& c: cases)
        m.completed.push_back(c.case_id);

    m.outputs = digest_tree(outDir);
    m.finished_at = utc_now();
    m.elapsed_seconds = seconds_since(start);
    m.save((fs::path(outDir) / "manifest.json").string());
    return m;
}

std::unique_ptr<runtime::PolicyClient> make_policy(const std::string& spec, const Config& config, const Vocabulary& vocab)
{
    if (spec == "checklist" || spec == "evidence-anchored")
        return std::make_unique<agents::ChecklistAgent>(vocab, lines_of(load_checklist(config)));
    if (spec == "draft-only")
        return std::make_unique<agents::DraftOnlyAgent>(vocab);
    if (spec == "hint-echo")
        return std::make_unique<agents::HintEchoAgent>(vocab, false);
    if (spec == "hint-ack")
        return std::make_unique<agents::HintEchoAgent>(vocab, true);
    if (spec == "http")
        return std::make_unique<runtime::HttpPolicy>(config.policy_endpoint);
    if (starts_with_ci(spec, "script:"))
        return std::make_unique<runtime::ScriptedPolicy>(runtime::ScriptedPolicy::from_file(spec.substr(7)));
    throw ConfigError("unknown agent '" + spec + "' (checklist, evidence-anchored, draft-only, hint-echo, hint-ack, http, script:<path>)");
}

Trace run_case(const std::string& caseId, runtime::PolicyClient& policy, const tools::Toolbox& toolbox, const sim::CaseStore& store,
               const runtime::AgentConfig& agent, const std::string& prompt, const std::string& artifactRoot, const std::string& systemPrompt)
{
    const auto volume = store.volume_path(caseId, artifactRoot);
    std::string presented = fs::absolute(volume).lexically_normal().string();
    const auto rel = fs::path(volume).lexically_relative(artifactRoot);
    if (!rel.empty() && *rel.begin() != "..")
        presented = rel.generic_string();
    runtime::EpisodeOptions options;
    options.artifact_root = artifactRoot;
    options.volume_path = presented;
    options.system_prompt = systemPrompt;
    return runtime::run_episode(caseId, policy, toolbox, agent, prompt, options);
}

json RunOptions::to_json() const
{
    return {{"cases_dir", cases_dir}, {"out_dir", out_dir}, {"agent", agent}, {"prompt", prompt},
            {"limit", limit},         {"workers", workers}, {"resume", resume}};
}

RunOptions RunOptions::from_json(const json& j)
{
    RunOptions o;
    o.cases_dir = j.value("cases_dir", "");
    o.out_dir = j.value("out_dir", "");
    o.agent = j.value("agent", o.agent);
    o.prompt = j.value("prompt", o.prompt);
    o.limit = j.value("limit", o.limit);
    o.workers = j.value("workers", o.workers);
    o.resume = j.value("resume", false);
    return o;
}

RunManifest run_command(const Config& config, const RunOptions& options)
{
    const auto start = std::chrono::steady_clock::now();
    if (options.cases_dir.empty() || options.out_dir.empty())
        throw ConfigError("run needs a cases directory and an output directory");
    fs::create_directories(options.out_dir);
    const auto manifestPath = (fs::path(options.out_dir) / "manifest.json").string();
    const auto tracesPath = (fs::path(options.out_dir) / "traces.jsonl").string();
    const auto artifactRoot = (fs::path(options.out_dir) / "artifacts").string();

    RunManifest m;
    m.command = "run";
    auto recorded = options;
    recorded.resume = false;
    m.options = recorded.to_json();
    m.config = config.to_json();
    m.config_hash = config.hash();
    m.run_id = make_run_id(m.command, m.options, m.config_hash);
    m.seeds = {{"noise_seed", config.noise.seed}};
    m.started_at = utc_now();

    std::set<std::string> done;
    if (options.resume && fs::exists(manifestPath))
    {
        const auto previous = RunManifest::load(manifestPath);
        if (previous.config_hash != m.config_hash)
            throw ConfigError("cannot resume: the configuration changed since the interrupted run");
        m.completed = previous.completed;
        m.started_at = previous.started_at;
        done.insert(previous.completed.begin(), previous.completed.end());
    }
    else
        write_file(tracesPath, "");

    const auto vocab = load_vocabulary(config);
    auto store = std::make_shared<sim::CaseStore>(*vocab, options.cases_dir);
    const auto toolbox = make_toolbox(config, store);
    const auto policy = make_policy(options.agent, config, *vocab);
    const auto system = prompts::build_system_prompt(toolbox->descriptors(), load_checklist(config));

    auto ids = list_cases(options.cases_dir);
    if (options.limit > 0 && ids.size() > options.limit)
        ids.resize(options.limit);
    std::vector<std::string> pending;
    for (const auto& id: ids)
        if (!done.count(id))
            pending.push_back(id);

    // Episodes run in parallel; traces are appended strictly in case order.
    std::vector<std::optional<Trace>> results(pending.size());
    std::mutex writeMutex;
    size_t nextToWrite = 0;
    parallel_for(pending.size(), options.workers, [&](size_t i) {
        auto trace = run_case(pending[i], *policy, *toolbox, *store, config.agent, options.prompt, artifactRoot, system);
        std::lock_guard lock(writeMutex);
        results[i] = std::move(trace);
        while (nextToWrite < results.size() && results[nextToWrite])
        {
            append_trace_jsonl(tracesPath, *results[nextToWrite]);
            m.completed.push_back(pending[nextToWrite]);
            results[nextToWrite].reset();
            ++nextToWrite;
            m.save(manifestPath);
        }
    });

    m.outputs = digest_tree(options.out_dir);
    m.finished_at = utc_now();
    m.elapsed_seconds = seconds_since(start);
    m.save(manifestPath);
    return m;
}

ReferenceLookup reference_lookup(const std::string& source, const Vocabulary& vocab)
{
    if (fs::is_directory(source))
    {
        auto store = std::make_shared<sim::CaseStore>(vocab, source);
        return [store](const std::string& id) { return store->get(id)->gt_report; };
    }
    auto refs = std::make_shared<std::map<std::string, std::string>>();
    for (const auto& j: read_jsonl(source))
    {
        try
        {
            const auto id = j.at("case_id").get<std::string>();
            (*refs)[id] = j.contains("report") ? j.at("report").get<std::string>() : j.at("gt_report").get<std::string>();
        }
        catch (const json::exception& e)
        {
            throw FormatError(source + ": reference lines need case_id and report: " + e.what());
        }
    }
    return [refs, source](const std::string& id) {
        const auto it = refs->find(id);
        if (it == refs->end())
            throw std::out_of_range("no reference report for '" + id + "' in " + source);
        return it->second;
    };
}

std::vector<rewards::RewardBreakdown> reward_command(const Config& config, const Backends& backends, const std::string& tracesPath,
                                                     const ReferenceLookup& references, int step)
{
    const auto ctx = backends.scoring(config);
    std::vector<rewards::RewardBreakdown> out;
    for (const auto& t: read_traces_jsonl(tracesPath))
        out.push_back(rewards::score_trace(t, references(t.case_ref), step, ctx));
    return out;
}

SystemReports read_reports(const std::string& path)
{
    SystemReports s;
    const fs::path file(path);
    s.name = file.has_parent_path() ? (file.parent_path().filename() / file.stem()).generic_string() : file.stem().string();
    for (const auto& j: read_jsonl(path))
    {
        if (j.contains("turns"))
        {
            const auto t = Trace::from_json(j);
            s.case_ids.push_back(t.case_ref);
            s.reports.push_back(t.final_report.value_or(""));
        }
        else
        {
            try
            {
                s.case_ids.push_back(j.at("case_id").get<std::string>());
                s.reports.push_back(j.at("report").get<std::string>());
            }
            catch (const json::exception& e)
            {
                throw FormatError(path + ": prediction lines need case_id and report: " + e.what());
            }
        }
    }
    return s;
}

json EvalResult::to_json(const Vocabulary& vocab) const
{
    std::vector<std::string> names;
    for (const auto& p: vocab.pathologies())
        names.push_back(p.name);
    json systemsJson = json::array();
    for (const auto& s: systems)
    {
        json e = {{"system", s.name}, {"macro", s.macro.to_json()}, {"micro", s.micro.to_json()}, {"f1", s.f1.to_json(names)}};
        e["p_value_macro"] = s.p_macro ? json(*s.p_macro) : json(nullptr);
        e["p_value_micro"] = s.p_micro ? json(*s.p_micro) : json(nullptr);
        systemsJson.push_back(e);
    }
    return {{"n_cases", case_ids.size()},
            {"settings", {{"n_boot", settings.n_boot}, {"n_perm", settings.n_perm}, {"level", settings.level}, {"seed", settings.seed}}},
            {"systems", systemsJson}};
}

std::string EvalResult::to_csv() const
{
    std::string out = "system,metric,point,ci_low,ci_high,n,n_boot,seed,p_value\n";
    for (const auto& s: systems)
        for (const auto& [metric, r, p]: {std::tuple {"macro_f1", &s.macro, s.p_macro}, std::tuple {"micro_f1", &s.micro, s.p_micro}})
            out += s.name + "," + metric + "," + fmt(r->point) + "," + fmt(r->ci_low) + "," + fmt(r->ci_high) + "," + std::to_string(r->n) +
                   "," + std::to_string(r->n_boot) + "," + std::to_string(r->seed) + "," + (p ? fmt(*p) : std::string()) + "\n";
    return out;
}

EvalResult eval_command(const std::vector<SystemReports>& systems, const ReferenceLookup& references, const Labeler& labeler,
                        const EvalConfig& settings)
{
    if (systems.empty())
        throw ConfigError("eval needs at least one predictions file");
    EvalResult result;
    result.settings = settings;
    result.case_ids = systems.front().case_ids;
    std::map<std::string, size_t> position;
    for (size_t i = 0; i < result.case_ids.size(); ++i)
        if (!position.emplace(result.case_ids[i], i).second)
            throw std::invalid_argument("duplicate case '" + result.case_ids[i] + "' in " + systems.front().name);

    std::vector<LabelVector> refs;
    for (const auto& id: result.case_ids)
        refs.push_back(labeler.extract(references(id)));

    std::vector<std::vector<LabelVector>> preds;
    for (const auto& s: systems)
    {
        if (s.case_ids.size() != result.case_ids.size())
            throw std::invalid_argument(s.name + " covers " + std::to_string(s.case_ids.size()) + " cases, expected " +
                                        std::to_string(result.case_ids.size()));
        std::vector<LabelVector> p(result.case_ids.size());
        std::vector<bool> seen(result.case_ids.size(), false);
        for (size_t i = 0; i < s.case_ids.size(); ++i)
        {
            const auto it = position.find(s.case_ids[i]);
            if (it == position.end() || seen[it->second])
                throw std::invalid_argument(s.name + " is not aligned with " + systems.front().name + " at case '" + s.case_ids[i] + "'");
            seen[it->second] = true;
            p[it->second] = labeler.extract(s.reports[i]);
        }
        preds.push_back(std::move(p));
    }

    for (size_t k = 0; k < systems.size(); ++k)
    {
        SystemEval e;
        e.name = systems[k].name;
        e.f1 = eval::f1_scores(preds[k], refs);
        const auto& pk = preds[k];
        for (auto kind: {eval::F1Kind::macro, eval::F1Kind::micro})
        {
            auto r = eval::bootstrap_ci(
                refs.size(),
                [&](const std::vector<size_t>& idx) {
                    eval::Counts c(refs.front().size());
                    for (auto i: idx)
                        c.add(pk[i], refs[i]);
                    return eval::f1_from_counts(c, kind);
                },
                settings.n_boot, settings.level, settings.seed);
            (kind == eval::F1Kind::macro ? e.macro : e.micro) = r;
        }
        if (k > 0)
        {
            e.p_macro = eval::permutation_test(preds.front(), pk, refs, eval::F1Kind::macro, settings.n_perm, settings.seed);
            e.p_micro = eval::permutation_test(preds.front(), pk, refs, eval::F1Kind::micro, settings.n_perm, settings.seed);
        }
        result.systems.push_back(std::move(e));
    }
    return result;
}

eval::ReportSystem agent_system(std::shared_ptr<runtime::PolicyClient> policy, std::shared_ptr<const tools::Toolbox> toolbox,
                                std::shared_ptr<const sim::CaseStore> store, runtime::AgentConfig agent, std::string artifactRoot)
{
    return [=](const std::string& caseId, const std::string& prompt) {
        const auto trace = run_case(caseId, *policy, *toolbox, *store, agent, prompt, artifactRoot);
        eval::SystemOutput out;
        out.report = trace.final_report.value_or("");
        std::vector<std::string> process;
        for (const auto& t: trace.turns)
            process.push_back(t.action.reasoning);
        process.push_back(out.report);
        out.process = join(process, "\n");
        return out;
    };
}

json HintOptions::to_json() const
{
    return {{"cases_dir", cases_dir}, {"out_dir", out_dir}, {"agent", agent}};
}

HintOptions HintOptions::from_json(const json& j)
{
    HintOptions o;
    o.cases_dir = j.value("cases_dir", "");
    o.out_dir = j.value("out_dir", "");
    o.agent = j.value("agent", o.agent);
    return o;
}

RunManifest hint_command(const Config& config, const HintOptions& options)
{
    const auto start = std::chrono::steady_clock::now();
    if (options.cases_dir.empty() || options.out_dir.empty())
        throw ConfigError("hint-exp needs a cases directory and an output directory");
    fs::create_directories(options.out_dir);

    RunManifest m;
    m.command = "hint-exp";
    m.options = options.to_json();
    m.config = config.to_json();
    m.config_hash = config.hash();
    m.run_id = make_run_id(m.command, m.options, m.config_hash);
    m.seeds = {{"hint_seed", config.hint.seed}, {"noise_seed", config.noise.seed}, {"bootstrap_seed", config.eval.seed}};
    m.started_at = utc_now();

    const auto vocab = load_vocabulary(config);
    auto store = std::make_shared<sim::CaseStore>(*vocab, options.cases_dir);
    const auto toolbox = make_toolbox(config, store);
    std::shared_ptr<runtime::PolicyClient> policy = make_policy(options.agent, config, *vocab);
    const auto backends = make_backends(config, vocab);

    std::vector<eval::HintCase> cases;
    for (const auto& id: list_cases(options.cases_dir))
        cases.push_back({id, store->get(id)->gt_report});
    const auto artifactRoot = (fs::path(options.out_dir) / "artifacts").string();
    const auto system = agent_system(policy, toolbox, store, config.agent, artifactRoot);
    const auto result = eval::run_hint_experiment(cases, system, *backends.labeler, *backends.hint_judge, *vocab, config.hint);

    eval::write_records_jsonl((fs::path(options.out_dir) / "records.jsonl").string(), result.records);
    const auto& e = config.eval;
    const json robust = metric_or_error([&] { return eval::robustness(result.records, e.n_boot, e.level, e.seed); });
    const json faithful = metric_or_error([&] { return eval::faithfulness(result.records, e.n_boot, e.level, e.seed); });
    const auto rc = eval::robustness_counts(result.records);
    const auto fc = eval::faithfulness_counts(result.records);
    const json results = {{"agent", options.agent},
                          {"n_records", result.records.size()},
                          {"n_sampled", result.sampled.size()},
                          {"n_skipped", result.skipped.size()},
                          {"robustness", robust},
                          {"robustness_counts", {{"numerator", rc.numerator}, {"denominator", rc.denominator}}},
                          {"faithfulness", faithful},
                          {"faithfulness_counts", {{"numerator", fc.numerator}, {"denominator", fc.denominator}}}};
    write_file((fs::path(options.out_dir) / "results.json").string(), results.dump(2) + "\n");

    std::string csv = "metric,point,ci_low,ci_high,n,n_boot,seed\n";
    for (const auto& [name, r]: {std::pair {"robustness", &robust}, std::pair {"faithfulness", &faithful}})
    {
        if (r->contains("error"))
            csv += std::string(name) + ",,,,,,\n";
        else
            csv += std::string(name) + "," + fmt(r->at("point").get<double>()) + "," + fmt(r->at("ci_low").get<double>()) + "," +
                   fmt(r->at("ci_high").get<double>()) + "," + std::to_string(r->at("n").get<size_t>()) + "," +
                   std::to_string(r->at("n_boot").get<int>()) + "," + std::to_string(r->at("seed").get<std::uint64_t>()) + "\n";
    }
    write_file((fs::path(options.out_dir) / "results.csv").string(), csv);

    for (const auto& r: result.records)
        m.completed.push_back(r.case_id);
    m.skipped = result.skipped;
    m.outputs = digest_tree(options.out_dir);
    m.finished_at = utc_now();
    m.elapsed_seconds = seconds_since(start);
    m.save((fs::path(options.out_dir) / "manifest.json").string());
    return m;
}

std::vector<std::string> replay_command(const std::string& manifestPath, const std::string& outDir)
{
    const auto m = RunManifest::load(manifestPath);
    auto config = Config::from_json(m.config);
    config.apply_env_overrides();
    RunManifest replayed;
    if (m.command == "simgen")
        replayed = simgen_command(config, m.options.at("n").get<size_t>(), m.options.at("seed").get<std::uint64_t>(), outDir);
    else if (m.command == "run")
    {
        auto o = RunOptions::from_json(m.options);
        o.out_dir = outDir;
        o.resume = false;
        replayed = run_command(config, o);
    }
    else if (m.command == "hint-exp")
    {
        auto o = HintOptions::from_json(m.options);
        o.out_dir = outDir;
        replayed = hint_command(config, o);
    }
    else
        throw ConfigError("manifest command '" + m.command + "' cannot be replayed");
    return diff_digests(m.outputs, replayed.outputs);
}

} // namespace tracelab::pipeline
