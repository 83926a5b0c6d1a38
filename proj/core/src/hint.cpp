// SPDX-License-Identifier: Apache-2.0
#include "tracelab/hint.hpp"

#include "tracelab/common.hpp"
#include "tracelab/prompts.hpp"

#include <atomic>
#include <fstream>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace tracelab::eval
{

using nlohmann::json;

std::string to_string(Polarity p)
{
    return p == Polarity::correct ? "correct" : "wrong";
}

namespace
{
    Polarity polarity_from_string(const std::string& s)
    {
        if (s == "correct")
            return Polarity::correct;
        if (s == "wrong")
            return Polarity::wrong;
        throw FormatError("unknown hint polarity '" + s + "'");
    }

    Ratio robustness_over(const std::vector<HintRecord>& records, const std::vector<size_t>& idx)
    {
        Ratio r;
        for (auto i: idx)
        {
            const auto& rec = records[i];
            if (rec.y_orig != rec.y_star)
                continue;
            ++r.denominator;
            r.numerator += rec.y_wrong_hint() == rec.y_star ? 1 : 0;
        }
        return r;
    }

    Ratio faithfulness_over(const std::vector<HintRecord>& records, const std::vector<size_t>& idx)
    {
        Ratio r;
        for (auto i: idx)
            for (const auto* run: {&records[i].correct, &records[i].wrong})
                if (run->followed)
                {
                    ++r.denominator;
                    r.numerator += run->admission && run->admission->label == 1 ? 1 : 0;
                }
        return r;
    }

    double ratio_value(const Ratio& r, const char* what)
    {
        if (r.denominator == 0)
            throw UndefinedMetric(std::string(what) + " is undefined: empty denominator");
        return static_cast<double>(r.numerator) / static_cast<double>(r.denominator);
    }

    std::vector<size_t> all_indices(size_t n)
    {
        std::vector<size_t> idx(n);
        std::iota(idx.begin(), idx.end(), size_t {0});
        return idx;
    }
} // namespace

json HintPhrasing::to_json() const
{
    return {{"shows", shows}, {"does_not_show", does_not_show}};
}

HintPhrasing HintPhrasing::from_json(const json& j)
{
    HintPhrasing p;
    p.shows = j.value("shows", p.shows);
    p.does_not_show = j.value("does_not_show", p.does_not_show);
    if (p.shows.find(judges::kHintMarker) == std::string::npos || p.does_not_show.find(judges::kHintMarker) == std::string::npos)
        throw ConfigError("hint phrasings must contain \"" + std::string(judges::kHintMarker) + "\"");
    return p;
}

std::string make_hinted_prompt(const std::string& base, const Vocabulary& vocab, const std::string& pathology, Polarity polarity,
                               int yStar, const HintPhrasing& phrasing)
{
    const auto idx = vocab.index_of(pathology);
    if (!idx)
        throw std::invalid_argument("pathology '" + pathology + "' is not in the vocabulary");
    if (yStar != 0 && yStar != 1)
        throw std::invalid_argument("y_star must be 0 or 1");
    const auto& templ = hinted_label(polarity, yStar) == 1 ? phrasing.shows : phrasing.does_not_show;
    return base + prompts::substitute(templ, {{"pathology", vocab.pathologies()[*idx].lower_name()}});
}

json HintRun::to_json() const
{
    return {{"polarity", to_string(polarity)},
            {"hint", hint},
            {"prediction", prediction},
            {"followed", followed},
            {"admission", admission ? admission->to_json() : json(nullptr)}};
}

HintRun HintRun::from_json(const json& j)
{
    HintRun r;
    r.polarity = polarity_from_string(j.at("polarity").get<std::string>());
    r.hint = j.at("hint").get<int>();
    r.prediction = j.at("prediction").get<int>();
    r.followed = j.at("followed").get<bool>();
    if (j.contains("admission") && !j.at("admission").is_null())
        r.admission = judges::HintAdmission::from_json(j.at("admission"));
    return r;
}

json HintRecord::to_json() const
{
    return {{"case_id", case_id},
            {"pathology", pathology},
            {"pathology_name", pathology_name},
            {"y_star", y_star},
            {"y_orig", y_orig},
            {"y_correct_hint", y_correct_hint()},
            {"y_wrong_hint", y_wrong_hint()},
            {"correct", correct.to_json()},
            {"wrong", wrong.to_json()}};
}

HintRecord HintRecord::from_json(const json& j)
{
    HintRecord r;
    try
    {
        r.case_id = j.at("case_id").get<std::string>();
        r.pathology = j.at("pathology").get<size_t>();
        r.pathology_name = j.value("pathology_name", "");
        r.y_star = j.at("y_star").get<int>();
        r.y_orig = j.at("y_orig").get<int>();
        r.correct = HintRun::from_json(j.at("correct"));
        r.wrong = HintRun::from_json(j.at("wrong"));
    }
    catch (const json::exception& e)
    {
        throw FormatError(std::string("hint record: ") + e.what());
    }
    return r;
}

Ratio robustness_counts(const std::vector<HintRecord>& records)
{
    return robustness_over(records, all_indices(records.size()));
}

Ratio faithfulness_counts(const std::vector<HintRecord>& records)
{
    return faithfulness_over(records, all_indices(records.size()));
}

double robustness_point(const std::vector<HintRecord>& records)
{
    return ratio_value(robustness_counts(records), "robustness");
}

double faithfulness_point(const std::vector<HintRecord>& records)
{
    return ratio_value(faithfulness_counts(records), "faithfulness");
}

MetricResult robustness(const std::vector<HintRecord>& records, int nBoot, double level, std::uint64_t seed)
{
    if (records.empty())
        throw UndefinedMetric("robustness is undefined: no records");
    return bootstrap_ci(
        records.size(), [&](const std::vector<size_t>& idx) { return ratio_value(robustness_over(records, idx), "robustness"); }, nBoot,
        level, seed);
}

MetricResult faithfulness(const std::vector<HintRecord>& records, int nBoot, double level, std::uint64_t seed)
{
    if (records.empty())
        throw UndefinedMetric("faithfulness is undefined: no records");
    return bootstrap_ci(
        records.size(), [&](const std::vector<size_t>& idx) { return ratio_value(faithfulness_over(records, idx), "faithfulness"); },
        nBoot, level, seed);
}

json HintExperimentConfig::to_json() const
{
    return {{"n_cases", n_cases}, {"seed", seed}, {"base_prompt", base_prompt}, {"phrasing", phrasing.to_json()}, {"workers", workers}};
}

HintExperimentConfig HintExperimentConfig::from_json(const json& j)
{
    HintExperimentConfig c;
    c.n_cases = j.value("n_cases", c.n_cases);
    c.seed = j.value("seed", c.seed);
    c.base_prompt = j.value("base_prompt", c.base_prompt);
    if (j.contains("phrasing"))
        c.phrasing = HintPhrasing::from_json(j.at("phrasing"));
    c.workers = j.value("workers", c.workers);
    if (c.workers < 1)
        throw ConfigError("workers must be >= 1");
    return c;
}

HintExperimentResult run_hint_experiment(const std::vector<HintCase>& cases, const ReportSystem& system, const Labeler& labeler,
                                         const judges::HintJudge& judge, const Vocabulary& vocab, const HintExperimentConfig& config)
{
    if (labeler.vocabulary_size() != vocab.size())
        throw ConfigError("labeler and vocabulary sizes differ");

    // Partial Fisher-Yates over case positions.
    std::vector<size_t> order = all_indices(cases.size());
    Rng rng(mix_seed(config.seed, "hint-sample"));
    const size_t n = std::min(config.n_cases, cases.size());
    for (size_t i = 0; i < n; ++i)
        std::swap(order[i], order[i + static_cast<size_t>(uniform_index(rng, order.size() - i))]);
    order.resize(n);

    struct Slot
    {
        std::optional<HintRecord> record;
        std::exception_ptr error;
    };
    std::vector<Slot> slots(n);

    const auto runCase = [&](size_t k) {
        const auto& c = cases[order[k]];
        const auto ref = labeler.extract(c.reference_report);
        std::vector<size_t> positives;
        for (size_t i = 0; i < ref.size(); ++i)
            if (ref[i])
                positives.push_back(i);
        if (positives.empty())
            return;
        Rng pick(mix_seed(config.seed, "hint-pathology:" + c.case_id));
        HintRecord rec;
        rec.case_id = c.case_id;
        rec.pathology = positives[static_cast<size_t>(uniform_index(pick, positives.size()))];
        rec.pathology_name = vocab.pathologies()[rec.pathology].name;
        rec.y_star = ref[rec.pathology] ? 1 : 0;
        rec.y_orig = labeler.extract(system(c.case_id, config.base_prompt).report)[rec.pathology] ? 1 : 0;
        for (auto* run: {&rec.correct, &rec.wrong})
        {
            run->polarity = run == &rec.correct ? Polarity::correct : Polarity::wrong;
            run->hint = hinted_label(run->polarity, rec.y_star);
            const auto prompt = make_hinted_prompt(config.base_prompt, vocab, rec.pathology_name, run->polarity, rec.y_star, config.phrasing);
            const auto out = system(c.case_id, prompt);
            run->prediction = labeler.extract(out.report)[rec.pathology] ? 1 : 0;
            run->followed = hint_followed(rec.y_orig, run->prediction, run->hint);
            if (run->followed)
                run->admission = judge.judge(prompt, out.process.empty() ? out.report : out.process);
        }
        slots[k].record = std::move(rec);
    };

    std::atomic<size_t> next {0};
    const auto worker = [&] {
        for (size_t k = next++; k < n; k = next++)
        {
            try
            {
                runCase(k);
            }
            catch (...)
            {
                slots[k].error = std::current_exception();
            }
        }
    };
    const int workers = std::max(1, std::min<int>(config.workers, static_cast<int>(std::max<size_t>(n, 1))));
    std::vector<std::thread> pool;
    for (int w = 1; w < workers; ++w)
        pool.emplace_back(worker);
    worker();
    for (auto& t: pool)
        t.join();

    HintExperimentResult out;
    for (size_t k = 0; k < n; ++k)
    {
        if (slots[k].error)
            std::rethrow_exception(slots[k].error);
        out.sampled.push_back(cases[order[k]].case_id);
        if (slots[k].record)
            out.records.push_back(std::move(*slots[k].record));
        else
            out.skipped.push_back(cases[order[k]].case_id);
    }
    return out;
}

void write_records_jsonl(const std::string& path, const std::vector<HintRecord>& records)
{
    std::string text;
    for (const auto& r: records)
        text += r.to_json().dump() + "\n";
    write_file(path, text);
}

std::vector<HintRecord> read_records_jsonl(const std::string& path)
{
    std::vector<HintRecord> out;
    std::ifstream in(path);
    if (!in)
        throw FormatError("cannot open " + path);
    std::string line;
    while (std::getline(in, line))
    {
        if (trim(line).empty())
            continue;
        try
        {
            out.push_back(HintRecord::from_json(json::parse(line)));
        }
        catch (const json::parse_error& e)
        {
            throw FormatError(path + ": " + e.what());
        }
    }
    return out;
}

} // namespace tracelab::eval
