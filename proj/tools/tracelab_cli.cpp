// SPDX-License-Identifier: Apache-2.0
#include "tracelab/common.hpp"
#include "tracelab/config.hpp"
#include "tracelab/pipeline.hpp"
#include "tracelab/service.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

using namespace tracelab;
namespace fs = std::filesystem;

namespace
{

Config load_config(const std::string& path)
{
    if (path.empty())
    {
        Config c;
        c.apply_env_overrides();
        return c;
    }
    return Config::load(path);
}

void print_eval(const pipeline::EvalResult& r)
{
    std::printf("%-24s %-9s %8s %17s %9s\n", "system", "metric", "point", "ci", "p");
    for (const auto& s: r.systems)
        for (const auto& [metric, m, p]: {std::tuple {"macro_f1", &s.macro, s.p_macro}, std::tuple {"micro_f1", &s.micro, s.p_micro}})
        {
            char pText[16] = "-";
            if (p)
                std::snprintf(pText, sizeof pText, "%.4f", *p);
            std::printf("%-24s %-9s %8.4f  [%6.4f, %6.4f] %9s\n", s.name.c_str(), metric, m->point, m->ci_low, m->ci_high, pText);
        }
}

ScoringService* g_service = nullptr;

void on_signal(int)
{
    if (g_service)
        g_service->stop();
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app {"tracelab: tool-using report agents on a simulated CT world"};
    app.require_subcommand(1);
    std::string configPath;
    app.add_option("-c,--config", configPath, "JSON configuration file")->check(CLI::ExistingFile);

    auto* simgen = app.add_subcommand("simgen", "Generate synthetic case bundles");
    size_t n = 100;
    std::uint64_t seed = 1;
    std::string outDir;
    simgen->add_option("--n", n, "Number of cases")->capture_default_str();
    simgen->add_option("--seed", seed, "Case seed")->capture_default_str();
    simgen->add_option("-o,--out", outDir, "Output directory")->required();

    auto* run = app.add_subcommand("run", "Run episodes over a case directory");
    pipeline::RunOptions runOptions;
    run->add_option("--cases", runOptions.cases_dir, "Case directory from simgen")->required();
    run->add_option("-o,--out", runOptions.out_dir, "Output directory")->required();
    run->add_option("--agent", runOptions.agent,
                    "checklist | evidence-anchored | draft-only | hint-echo | hint-ack | http | script:<path>")
        ->capture_default_str();
    run->add_option("--prompt", runOptions.prompt, "User prompt")->capture_default_str();
    run->add_option("--limit", runOptions.limit, "Run at most this many cases (0: all)");
    run->add_option("--workers", runOptions.workers, "Parallel episodes")->capture_default_str();
    run->add_flag("--resume", runOptions.resume, "Continue an interrupted run from its manifest");

    auto* reward = app.add_subcommand("reward", "Score traces into RewardBreakdown JSON lines");
    std::string tracePath, refsPath, rewardOut;
    int step = 0;
    reward->add_option("--trace", tracePath, "Trace JSONL file")->required()->check(CLI::ExistingFile);
    reward->add_option("--refs", refsPath, "Case directory or reference JSONL {case_id, report}")->required()->check(CLI::ExistingPath);
    reward->add_option("--step", step, "Training step (selects the reward phase)")->check(CLI::NonNegativeNumber)->capture_default_str();
    reward->add_option("-o,--out", rewardOut, "Output JSONL (default: stdout)");

    auto* evalCmd = app.add_subcommand("eval", "F1 tables with bootstrap CIs and permutation p-values");
    std::vector<std::string> predsPaths;
    std::string evalRefs, evalOut;
    std::optional<int> nBoot, nPerm;
    std::optional<std::uint64_t> evalSeed;
    evalCmd->add_option("--preds", predsPaths, "Predictions (traces or {case_id, report} JSONL); the first is the baseline")
        ->required()
        ->check(CLI::ExistingFile);
    evalCmd->add_option("--refs", evalRefs, "Case directory or reference JSONL")->required()->check(CLI::ExistingPath);
    evalCmd->add_option("-o,--out", evalOut, "Output directory for eval.json and eval.csv");
    evalCmd->add_option("--n-boot", nBoot, "Bootstrap replicates");
    evalCmd->add_option("--n-perm", nPerm, "Permutations");
    evalCmd->add_option("--seed", evalSeed, "Resampling seed");

    auto* hint = app.add_subcommand("hint-exp", "Paired hint experiment: robustness and faithfulness");
    pipeline::HintOptions hintOptions;
    hint->add_option("--cases", hintOptions.cases_dir, "Case directory from simgen")->required();
    hint->add_option("-o,--out", hintOptions.out_dir, "Output directory")->required();
    hint->add_option("--agent", hintOptions.agent, "Agent spec, as for run")->capture_default_str();

    auto* serve = app.add_subcommand("serve", "HTTP scoring service (POST /score, GET /health)");
    std::optional<std::string> host;
    std::optional<int> port;
    serve->add_option("--host", host, "Bind address (default from config)");
    serve->add_option("--port", port, "Port (default from config)");

    auto* replay = app.add_subcommand("replay", "Re-run from a manifest and compare output digests");
    std::string manifestPath;
    replay->add_option("--manifest", manifestPath, "manifest.json of a previous run")->required()->check(CLI::ExistingFile);
    replay->add_option("-o,--out", outDir, "Fresh output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try
    {
        if (*simgen)
        {
            const auto config = load_config(configPath);
            const auto m = pipeline::simgen_command(config, n, seed, outDir);
            std::cerr << "wrote " << m.completed.size() << " cases to " << outDir << "\n";
        }
        else if (*run)
        {
            const auto config = load_config(configPath);
            const auto m = pipeline::run_command(config, runOptions);
            std::cerr << "completed " << m.completed.size() << " episodes; traces in " << (fs::path(runOptions.out_dir) / "traces.jsonl").string()
                      << "\n";
        }
        else if (*reward)
        {
            const auto config = load_config(configPath);
            const auto vocab = load_vocabulary(config);
            const auto backends = make_backends(config, vocab);
            const auto breakdowns = pipeline::reward_command(config, backends, tracePath, pipeline::reference_lookup(refsPath, *vocab), step);
            std::ofstream file;
            if (!rewardOut.empty())
            {
                file.open(rewardOut);
                if (!file)
                    throw FormatError("cannot write " + rewardOut);
            }
            std::ostream& out = rewardOut.empty() ? std::cout : file;
            for (const auto& b: breakdowns)
                out << b.to_json().dump() << "\n";
        }
        else if (*evalCmd)
        {
            const auto config = load_config(configPath);
            const auto vocab = load_vocabulary(config);
            const auto backends = make_backends(config, vocab);
            auto settings = config.eval;
            if (nBoot)
                settings.n_boot = *nBoot;
            if (nPerm)
                settings.n_perm = *nPerm;
            if (evalSeed)
                settings.seed = *evalSeed;
            std::vector<pipeline::SystemReports> systems;
            for (const auto& p: predsPaths)
                systems.push_back(pipeline::read_reports(p));
            const auto result = pipeline::eval_command(systems, pipeline::reference_lookup(evalRefs, *vocab), *backends.labeler, settings);
            print_eval(result);
            if (!evalOut.empty())
            {
                fs::create_directories(evalOut);
                write_file((fs::path(evalOut) / "eval.json").string(), result.to_json(*vocab).dump(2) + "\n");
                write_file((fs::path(evalOut) / "eval.csv").string(), result.to_csv());
            }
        }
        else if (*hint)
        {
            const auto config = load_config(configPath);
            pipeline::hint_command(config, hintOptions);
            std::cout << read_file((fs::path(hintOptions.out_dir) / "results.json").string());
        }
        else if (*serve)
        {
            auto config = load_config(configPath);
            const auto vocab = load_vocabulary(config);
            auto backends = make_backends(config, vocab);
            const auto bindHost = host.value_or(config.service.host);
            const auto bindPort = port.value_or(config.service.port);
            ScoringService service(std::move(config), std::move(backends));
            g_service = &service;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            std::cerr << "scoring service on http://" << bindHost << ":" << bindPort << "\n";
            service.listen_blocking(bindHost, bindPort);
            g_service = nullptr;
        }
        else if (*replay)
        {
            const auto mismatches = pipeline::replay_command(manifestPath, outDir);
            if (!mismatches.empty())
            {
                std::cerr << "replay differs in " << mismatches.size() << " file(s):\n";
                for (const auto& m: mismatches)
                    std::cerr << "  " << m << "\n";
                return 3;
            }
            std::cerr << "replay reproduced every output digest\n";
        }
    }
    catch (const ConfigError& e)
    {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }
    catch (const std::exception& e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
