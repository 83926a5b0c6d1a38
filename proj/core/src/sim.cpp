// SPDX-License-Identifier: Apache-2.0
#include "tracelab/sim.hpp"

#include "tracelab/common.hpp"
#include "tracelab/io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <regex>
#include <utility>

namespace fs = std::filesystem;

namespace tracelab::sim
{

namespace
{
    constexpr int kMinExtent = 8;
    constexpr int kMaxExtent = 64;
    constexpr double kLesionJitter = 0.02;

    constexpr float kAirHu = -1000.f;
    constexpr float kSoftTissueHu = 40.f;
    constexpr float kLungHu = -850.f;
    constexpr float kHeartHu = 40.f;
    constexpr float kAortaHu = 45.f;
    constexpr float kSpineHu = 400.f;

    struct Ellipsoid
    {
        double cx, cy, cz; // voxel coordinates
        double rx, ry, rz; // voxel radii

        [[nodiscard]] bool inside(int x, int y, int z) const noexcept
        {
            const double dx = (x - cx) / rx, dy = (y - cy) / ry, dz = (z - cz) / rz;
            return dx * dx + dy * dy + dz * dz <= 1.0;
        }
    };

    double to_voxel(double normalised, int extent) { return normalised * (extent - 1); }

    Ellipsoid scaled(const Dims& d, double cx, double cy, double cz, double rx, double ry, double rz)
    {
        return {to_voxel(cx, d.nx), to_voxel(cy, d.ny), to_voxel(cz, d.nz), std::max(rx * d.nx, 0.75), std::max(ry * d.ny, 0.75),
                std::max(rz * d.nz, 0.75)};
    }

    template <typename Pred>
    Mask make_mask(const Dims& d, Pred&& inside)
    {
        Mask m(d);
        for (int z = 0; z < d.nz; ++z)
            for (int y = 0; y < d.ny; ++y)
                for (int x = 0; x < d.nx; ++x)
                    if (inside(x, y, z))
                        m(x, y, z) = 1;
        return m;
    }

    // Cylinder along z restricted to [z0, z1] (normalised).
    Mask cylinder(const Dims& d, double cx, double cy, double r, double z0, double z1)
    {
        const double vx = to_voxel(cx, d.nx), vy = to_voxel(cy, d.ny);
        const double rx = std::max(r * d.nx, 0.75), ry = std::max(r * d.ny, 0.75);
        const double lo = to_voxel(z0, d.nz), hi = to_voxel(z1, d.nz);
        return make_mask(d, [&](int x, int y, int z) {
            const double dx = (x - vx) / rx, dy = (y - vy) / ry;
            return z >= lo && z <= hi && dx * dx + dy * dy <= 1.0;
        });
    }

    std::map<std::string, Mask> plant_organs(const Dims& d)
    {
        std::map<std::string, Mask> organs;
        const auto rl = scaled(d, 0.30, 0.55, 0.5, 0.17, 0.25, 0.42);
        const auto ll = scaled(d, 0.70, 0.55, 0.5, 0.17, 0.25, 0.42);
        const auto heart = scaled(d, 0.56, 0.45, 0.40, 0.14, 0.12, 0.14);
        organs["right_lung"] = make_mask(d, [&](int x, int y, int z) { return rl.inside(x, y, z) && !heart.inside(x, y, z); });
        organs["left_lung"] = make_mask(d, [&](int x, int y, int z) { return ll.inside(x, y, z) && !heart.inside(x, y, z); });
        organs["heart"] = make_mask(d, [&](int x, int y, int z) { return heart.inside(x, y, z); });
        organs["aorta"] = cylinder(d, 0.50, 0.35, 0.05, 0.20, 0.90);
        organs["spine"] = cylinder(d, 0.50, 0.82, 0.06, 0.0, 1.0);
        organs["trachea"] = cylinder(d, 0.50, 0.45, 0.03, 0.65, 1.0);
        return organs;
    }

    Volume paint(const Dims& d, const std::map<std::string, Mask>& organs)
    {
        Volume v(d, kAirHu);
        const auto body = scaled(d, 0.5, 0.55, 0.5, 0.46, 0.40, 10.0);
        for (int z = 0; z < d.nz; ++z)
            for (int y = 0; y < d.ny; ++y)
                for (int x = 0; x < d.nx; ++x)
                    if (body.inside(x, y, static_cast<int>(body.cz)))
                        v(x, y, z) = kSoftTissueHu;
        const std::pair<const char*, float> order[] = {{"right_lung", kLungHu}, {"left_lung", kLungHu}, {"heart", kHeartHu},
                                                       {"aorta", kAortaHu},     {"trachea", kAirHu},    {"spine", kSpineHu}};
        for (const auto& [name, hu]: order)
        {
            const auto& m = organs.at(name);
            for (size_t i = 0; i < m.size(); ++i)
                if (m.data()[i])
                    v.data()[i] = hu;
        }
        return v;
    }

    Lesion plant_lesion(const Dims& d, const Pathology& p, size_t pathologyIdx, size_t siteIdx, Rng& rng)
    {
        const auto& site = p.locations.at(siteIdx);
        auto jitter = [&](double c) { return std::clamp(c + (2.0 * uniform01(rng) - 1.0) * kLesionJitter, 0.0, 1.0); };
        const double cx = jitter(site.center[0]), cy = jitter(site.center[1]), cz = jitter(site.center[2]);
        const auto e = scaled(d, cx, cy, cz, p.radius, p.radius, p.radius);
        auto mask = make_mask(d, [&](int x, int y, int z) { return e.inside(x, y, z); });
        // The rounded centre is always part of the lesion, so masks are never empty.
        mask(static_cast<int>(std::lround(e.cx)), static_cast<int>(std::lround(e.cy)), static_cast<int>(std::lround(e.cz))) = 1;
        return Lesion {Finding {pathologyIdx, site.name}, std::move(mask), p.sentence(site.name)};
    }

    // Partial Fisher-Yates: k distinct values from `pool`.
    std::vector<size_t> sample_without_replacement(std::vector<size_t> pool, size_t k, Rng& rng)
    {
        for (size_t i = 0; i < k; ++i)
            std::swap(pool[i], pool[i + uniform_index(rng, pool.size() - i)]);
        pool.resize(k);
        return pool;
    }

    std::string fmt4(double v)
    {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.4f", v);
        return buf;
    }

    std::string list_or(const std::vector<std::string>& items)
    {
        if (items.size() == 1)
            return items.front();
        std::vector<std::string> head(items.begin(), items.end() - 1);
        return join(head, ", ") + " or " + items.back();
    }

    size_t levenshtein(std::string_view a, std::string_view b)
    {
        std::vector<size_t> prev(b.size() + 1), cur(b.size() + 1);
        for (size_t j = 0; j <= b.size(); ++j)
            prev[j] = j;
        for (size_t i = 1; i <= a.size(); ++i)
        {
            cur[0] = i;
            for (size_t j = 1; j <= b.size(); ++j)
                cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
            std::swap(prev, cur);
        }
        return prev[b.size()];
    }

    std::vector<std::string> words_of(std::string_view lower)
    {
        std::vector<std::string> out;
        std::string cur;
        for (char c: lower)
        {
            if (std::isalnum(static_cast<unsigned char>(c)) || c == '-')
                cur.push_back(c);
            else if (!cur.empty())
                out.push_back(std::exchange(cur, {}));
        }
        if (!cur.empty())
            out.push_back(cur);
        return out;
    }

    // Keyword (from pathology and category tables) closest to any same-length
    // word window of the question.
    std::string nearest_keyword(const Vocabulary& vocab, std::string_view lowerQuestion)
    {
        std::vector<std::string> keywords;
        for (const auto& p: vocab.pathologies())
            keywords.insert(keywords.end(), p.keywords.begin(), p.keywords.end());
        for (const auto& c: vocab.categories())
            keywords.insert(keywords.end(), c.keywords.begin(), c.keywords.end());
        const auto words = words_of(lowerQuestion);
        std::string best;
        size_t bestDist = std::numeric_limits<size_t>::max();
        for (const auto& kw: keywords)
        {
            const auto n = std::max<size_t>(1, words_of(kw).size());
            const size_t windows = words.size() >= n ? words.size() - n + 1 : 1;
            for (size_t i = 0; i < windows && !words.empty(); ++i)
            {
                const auto first = words.begin() + static_cast<long>(i);
                const auto last = words.begin() + static_cast<long>(std::min(i + n, words.size()));
                const auto dist = levenshtein(join(std::vector<std::string>(first, last), " "), kw);
                if (dist < bestDist)
                {
                    bestDist = dist;
                    best = kw;
                }
            }
        }
        return best.empty() ? std::string(trim(lowerQuestion)) : best;
    }

    bool intersects(const Mask& m, Direction d, int index)
    {
        const auto& dims = m.dims();
        if (index < 0 || index >= m.extent(d))
            return false;
        for (int a = 0; a < (d == Direction::sagittal ? dims.ny : dims.nx); ++a)
            for (int b = 0; b < (d == Direction::axial ? dims.ny : dims.nz); ++b)
            {
                const bool hit = d == Direction::axial     ? m(a, b, index) != 0
                                 : d == Direction::coronal ? m(a, index, b) != 0
                                                           : m(index, a, b) != 0;
                if (hit)
                    return true;
            }
        return false;
    }

    bool in_scope(const Lesion& l, const QueryScope& scope)
    {
        if (scope.whole_volume())
            return true;
        return std::any_of(scope.slices.begin(), scope.slices.end(), [&](const auto& s) { return intersects(l.mask, s.first, s.second); });
    }

    std::uint64_t noise_seed(const SyntheticCase& c, const NoiseProfile& noise, std::string_view tag)
    {
        return mix_seed(mix_seed(c.seed, noise.seed), tag);
    }

    std::string mask_file_name(const std::string& name) { return "masks/" + name + ".nii.gz"; }
} // namespace

void NoiseProfile::validate() const
{
    for (auto [name, v]: {std::pair {"draft_miss_rate", draft_miss_rate},
                          {"draft_hallucination_rate", draft_hallucination_rate},
                          {"vqa_error_rate", vqa_error_rate}})
        if (!(v >= 0.0 && v <= 1.0))
            throw ConfigError(std::string(name) + " must lie in [0, 1]");
    if (!(classifier_sigma >= 0.0))
        throw ConfigError("classifier_sigma must be non-negative");
}

nlohmann::json NoiseProfile::to_json() const
{
    return {{"draft_miss_rate", draft_miss_rate},
            {"draft_hallucination_rate", draft_hallucination_rate},
            {"classifier_sigma", classifier_sigma},
            {"vqa_error_rate", vqa_error_rate},
            {"seed", seed}};
}

NoiseProfile NoiseProfile::from_json(const nlohmann::json& j)
{
    NoiseProfile n;
    n.draft_miss_rate = j.value("draft_miss_rate", 0.0);
    n.draft_hallucination_rate = j.value("draft_hallucination_rate", 0.0);
    n.classifier_sigma = j.value("classifier_sigma", 0.0);
    n.vqa_error_rate = j.value("vqa_error_rate", 0.0);
    n.seed = j.value("seed", std::uint64_t {0});
    n.validate();
    return n;
}

std::vector<Finding> SyntheticCase::findings() const
{
    std::vector<Finding> out;
    out.reserve(lesions.size());
    for (const auto& l: lesions)
        out.push_back(l.finding);
    return out;
}

nlohmann::json CaseConfig::to_json() const
{
    return {{"dims", {dims.nx, dims.ny, dims.nz}},
            {"min_lesions", min_lesions},
            {"max_lesions", max_lesions},
            {"forced_pathologies", forced_pathologies}};
}

CaseConfig CaseConfig::from_json(const nlohmann::json& j)
{
    CaseConfig c;
    if (j.contains("dims"))
    {
        const auto& d = j.at("dims");
        c.dims = {d.at(0).get<int>(), d.at(1).get<int>(), d.at(2).get<int>()};
    }
    c.min_lesions = j.value("min_lesions", c.min_lesions);
    c.max_lesions = j.value("max_lesions", c.max_lesions);
    c.forced_pathologies = j.value("forced_pathologies", std::vector<size_t> {});
    return c;
}

const std::vector<std::string>& organ_names()
{
    static const std::vector<std::string> names = {"aorta", "heart", "left_lung", "right_lung", "spine", "trachea"};
    return names;
}

SyntheticCase generate_case(const std::string& caseId, std::uint64_t seed, const CaseConfig& config, const Vocabulary& vocab)
{
    const auto& d = config.dims;
    for (int e: {d.nx, d.ny, d.nz})
        if (e < kMinExtent || e > kMaxExtent)
            throw ConfigError("case dimensions must lie in [" + std::to_string(kMinExtent) + ", " + std::to_string(kMaxExtent) + "]");
    if (vocab.size() == 0)
        throw ConfigError("vocabulary is empty");
    if (config.min_lesions < 0 || config.min_lesions > config.max_lesions)
        throw ConfigError("invalid lesion count range");
    if (static_cast<size_t>(config.max_lesions) > vocab.size() && config.forced_pathologies.empty())
        throw ConfigError("cannot plant more distinct lesions than there are pathologies");

    Rng rng(mix_seed(seed, "case"));
    SyntheticCase c;
    c.case_id = caseId;
    c.seed = seed;
    c.dims = d;
    c.organs = plant_organs(d);
    c.voxels = paint(d, c.organs);
    c.labels = LabelVector(vocab.size());

    std::vector<size_t> chosen;
    if (!config.forced_pathologies.empty())
    {
        chosen = config.forced_pathologies;
        std::sort(chosen.begin(), chosen.end());
        if (std::adjacent_find(chosen.begin(), chosen.end()) != chosen.end() || chosen.back() >= vocab.size())
            throw ConfigError("forced pathologies must be distinct vocabulary indices");
    }
    else
    {
        const auto span = static_cast<std::uint64_t>(config.max_lesions - config.min_lesions + 1);
        const auto n = static_cast<size_t>(config.min_lesions) + uniform_index(rng, span);
        std::vector<size_t> pool(vocab.size());
        for (size_t i = 0; i < pool.size(); ++i)
            pool[i] = i;
        chosen = sample_without_replacement(std::move(pool), n, rng);
        std::sort(chosen.begin(), chosen.end());
    }

    for (auto p: chosen)
    {
        const auto& path = vocab.pathologies()[p];
        if (path.locations.empty())
            throw ConfigError("pathology '" + path.name + "' has no locations");
        const auto site = uniform_index(rng, path.locations.size());
        auto lesion = plant_lesion(d, path, p, site, rng);
        for (size_t i = 0; i < lesion.mask.size(); ++i)
            if (lesion.mask.data()[i])
                c.voxels.data()[i] = static_cast<float>(path.hu);
        c.labels.set(p);
        c.lesions.push_back(std::move(lesion));
    }
    c.gt_report = render_report(c, vocab);
    return c;
}

std::string render_report(std::span<const Finding> findings, const Vocabulary& vocab)
{
    std::vector<std::string> blocks, impression;
    for (const auto& cat: vocab.categories())
    {
        std::vector<std::string> sentences;
        for (const auto& f: findings)
        {
            const auto& p = vocab.pathologies().at(f.pathology);
            if (p.category == cat.id)
                sentences.push_back(p.sentence(f.location));
        }
        if (sentences.empty())
            blocks.push_back(cat.normal_sentence);
        else
        {
            blocks.push_back(join(sentences, " "));
            impression.insert(impression.end(), sentences.begin(), sentences.end());
        }
    }
    return "Findings: " + join(blocks, " ") + "\nImpression: " + (impression.empty() ? vocab.normal_impression() : join(impression, " "));
}

std::string render_report(const SyntheticCase& c, const Vocabulary& vocab)
{
    const auto f = c.findings();
    return render_report(std::span<const Finding>(f), vocab);
}

QueryScope QueryScope::from_slice_paths(const std::vector<std::string>& paths)
{
    static const std::regex re(R"((axial|coronal|sagittal)_slice_(\d+))");
    QueryScope scope;
    for (const auto& p: paths)
    {
        const auto name = fs::path(p).filename().string();
        std::smatch m;
        if (std::regex_search(name, m, re))
            scope.slices.emplace_back(direction_from_string(m[1]), std::stoi(m[2]));
    }
    return scope;
}

std::string oracle_answer(const SyntheticCase& c, const Vocabulary& vocab, std::string_view question, const QueryScope& scope,
                          const NoiseProfile& noise)
{
    const auto lower = to_lower(trim(question));
    if (lower.empty())
        throw std::invalid_argument("question must be nonempty");

    auto topics = vocab.mentioned_pathologies(lower);
    const auto categories = vocab.mentioned_categories(lower);
    std::vector<int> bareCategories; // routed categories without any pathology
    for (int id: categories)
    {
        bool any = false;
        for (size_t i = 0; i < vocab.size(); ++i)
            if (vocab.pathologies()[i].category == id)
            {
                topics.insert(i);
                any = true;
            }
        if (!any)
            bareCategories.push_back(id);
    }
    if (topics.empty() && bareCategories.empty())
        return "No abnormality identified regarding " + nearest_keyword(vocab, lower) + ".";

    std::string scopeTag = lower;
    for (const auto& [dir, idx]: scope.slices)
        scopeTag += "|" + to_string(dir) + ":" + std::to_string(idx);
    const auto base = noise_seed(c, noise, "vqa:" + scopeTag);

    std::vector<std::string> positives, negatives;
    for (auto p: topics)
    {
        const auto& path = vocab.pathologies()[p];
        std::vector<std::string> sentences;
        for (const auto& l: c.lesions)
            if (l.finding.pathology == p && in_scope(l, scope))
                sentences.push_back(l.descriptor);
        Rng rng(mix_seed(base, p));
        if (bernoulli(rng, noise.vqa_error_rate))
        {
            if (sentences.empty())
                sentences.push_back(path.sentence(path.locations.at(uniform_index(rng, path.locations.size())).name));
            else
                sentences.clear();
        }
        if (sentences.empty())
            negatives.push_back(path.lower_name());
        else
            positives.insert(positives.end(), sentences.begin(), sentences.end());
    }

    std::vector<std::string> parts = positives;
    if (!negatives.empty())
        parts.push_back("No " + list_or(negatives) + " was observed.");
    for (int id: bareCategories)
        parts.push_back(vocab.category(id).normal_sentence);
    return join(parts, " ");
}

std::string oracle_draft(const SyntheticCase& c, const Vocabulary& vocab, const NoiseProfile& noise)
{
    Rng rng(noise_seed(c, noise, "draft"));
    std::vector<Finding> kept;
    for (const auto& l: c.lesions)
        if (!bernoulli(rng, noise.draft_miss_rate))
            kept.push_back(l.finding);
    if (bernoulli(rng, noise.draft_hallucination_rate))
    {
        std::vector<size_t> absent;
        for (size_t i = 0; i < vocab.size(); ++i)
            if (!c.labels[i])
                absent.push_back(i);
        if (!absent.empty())
        {
            const auto p = absent[uniform_index(rng, absent.size())];
            const auto& locs = vocab.pathologies()[p].locations;
            kept.push_back({p, locs.at(uniform_index(rng, locs.size())).name});
        }
    }
    return render_report(std::span<const Finding>(kept), vocab);
}

std::vector<double> oracle_probs(const SyntheticCase& c, const Vocabulary& vocab, const NoiseProfile& noise)
{
    const auto base = noise_seed(c, noise, "classifier");
    std::vector<double> probs(vocab.size());
    for (size_t i = 0; i < vocab.size(); ++i)
    {
        const double y = c.labels[i] ? 1.0 : 0.0;
        double p = 0.9 * y + 0.1 * (1.0 - y);
        if (noise.classifier_sigma > 0)
        {
            Rng rng(mix_seed(base, i));
            p += noise.classifier_sigma * standard_normal(rng);
        }
        probs[i] = std::clamp(p, 0.0, 1.0);
    }
    return probs;
}

std::string format_probabilities(const std::vector<double>& probs, const Vocabulary& vocab, double threshold)
{
    if (probs.size() != vocab.size())
        throw std::invalid_argument("probability vector does not match vocabulary");
    std::vector<std::string> parts;
    for (size_t i = 0; i < probs.size(); ++i)
        parts.push_back(vocab.pathologies()[i].name + ": " + (probs[i] >= threshold ? "Positive" : "Negative") + " (Prob: " + fmt4(probs[i]) + ")");
    return join(parts, " | ");
}

std::optional<Mask> oracle_mask(const SyntheticCase& c, const Vocabulary& vocab, std::string_view target)
{
    auto key = replace_all(to_lower(trim(target)), " ", "_");
    if (auto it = c.organs.find(key); it != c.organs.end())
        return it->second;
    if (key == "lungs")
    {
        Mask m = c.organs.at("right_lung");
        const auto& left = c.organs.at("left_lung");
        for (size_t i = 0; i < m.size(); ++i)
            m.data()[i] |= left.data()[i];
        return m;
    }
    const auto idx = vocab.index_of(target);
    if (!idx)
        return std::nullopt;
    Mask m(c.dims);
    for (const auto& l: c.lesions)
        if (l.finding.pathology == *idx)
            for (size_t i = 0; i < m.size(); ++i)
                m.data()[i] |= l.mask.data()[i];
    return m;
}

void save_case_bundle(const std::string& dir, const SyntheticCase& c, const Vocabulary& vocab)
{
    fs::create_directories(fs::path(dir) / "masks");
    io::write_nifti((fs::path(dir) / "volume.nii.gz").string(), c.voxels);
    nlohmann::json organs = nlohmann::json::object();
    for (const auto& [name, mask]: c.organs)
    {
        io::write_nifti((fs::path(dir) / mask_file_name(name)).string(), mask);
        organs[name] = mask_file_name(name);
    }
    nlohmann::json lesions = nlohmann::json::array();
    for (size_t k = 0; k < c.lesions.size(); ++k)
    {
        const auto& l = c.lesions[k];
        const auto file = mask_file_name("lesion_" + std::to_string(k));
        io::write_nifti((fs::path(dir) / file).string(), l.mask);
        lesions.push_back({{"pathology", vocab.pathologies().at(l.finding.pathology).name},
                           {"location", l.finding.location},
                           {"descriptor", l.descriptor},
                           {"mask", file}});
    }
    const nlohmann::json meta = {{"case_id", c.case_id},  {"seed", c.seed},       {"dims", {c.dims.nx, c.dims.ny, c.dims.nz}},
                                 {"labels", c.labels.values}, {"gt_report", c.gt_report}, {"organs", organs},
                                 {"lesions", lesions}};
    write_file((fs::path(dir) / "case.json").string(), meta.dump(2) + "\n");
}

SyntheticCase load_case_bundle(const std::string& dir, const Vocabulary& vocab)
{
    const auto root = fs::path(dir);
    nlohmann::json meta;
    try
    {
        meta = nlohmann::json::parse(read_file((root / "case.json").string()));
    }
    catch (const nlohmann::json::exception& e)
    {
        throw FormatError("malformed case.json in " + dir + ": " + e.what());
    }
    SyntheticCase c;
    c.case_id = meta.at("case_id").get<std::string>();
    c.seed = meta.at("seed").get<std::uint64_t>();
    const auto& d = meta.at("dims");
    c.dims = {d.at(0).get<int>(), d.at(1).get<int>(), d.at(2).get<int>()};
    c.voxels = io::read_nifti_volume((root / "volume.nii.gz").string());
    if (c.voxels.dims() != c.dims)
        throw FormatError("volume dimensions do not match case.json in " + dir);
    for (const auto& [name, file]: meta.at("organs").items())
        c.organs[name] = io::read_nifti_mask((root / file.get<std::string>()).string());
    c.labels = LabelVector(vocab.size());
    for (const auto& l: meta.at("lesions"))
    {
        const auto name = l.at("pathology").get<std::string>();
        const auto idx = vocab.index_of(name);
        if (!idx)
            throw FormatError("unknown pathology '" + name + "' in " + dir);
        c.lesions.push_back({Finding {*idx, l.at("location").get<std::string>()}, io::read_nifti_mask((root / l.at("mask").get<std::string>()).string()),
                             l.at("descriptor").get<std::string>()});
        c.labels.set(*idx);
    }
    c.gt_report = meta.at("gt_report").get<std::string>();
    if (LabelVector(meta.at("labels").get<std::vector<std::uint8_t>>()) != c.labels)
        throw FormatError("labels in case.json disagree with the lesion list in " + dir);
    return c;
}

CaseStore::CaseStore(const Vocabulary& vocab, std::string bundleRoot): _vocab(vocab), _bundleRoot(std::move(bundleRoot)) {}

void CaseStore::add(SyntheticCase c)
{
    std::lock_guard lock(_mutex);
    auto id = c.case_id;
    _cases[id] = std::make_shared<const SyntheticCase>(std::move(c));
}

std::shared_ptr<const SyntheticCase> CaseStore::find(const std::string& caseId) const
{
    std::lock_guard lock(_mutex);
    if (auto it = _cases.find(caseId); it != _cases.end())
        return it->second;
    if (_bundleRoot.empty())
        return nullptr;
    const auto dir = fs::path(_bundleRoot) / caseId;
    if (caseId.empty() || caseId.find("..") != std::string::npos || !fs::exists(dir / "case.json"))
        return nullptr;
    auto c = std::make_shared<const SyntheticCase>(load_case_bundle(dir.string(), _vocab));
    _cases[caseId] = c;
    _volumePaths[caseId] = (dir / "volume.nii.gz").string();
    return c;
}

std::shared_ptr<const SyntheticCase> CaseStore::get(const std::string& caseId) const
{
    auto c = find(caseId);
    if (!c)
        throw std::out_of_range("unknown case reference '" + caseId + "'");
    return c;
}

std::string CaseStore::volume_path(const std::string& caseId, const std::string& root) const
{
    const auto c = get(caseId);
    std::lock_guard lock(_mutex);
    if (auto it = _volumePaths.find(caseId); it != _volumePaths.end())
        return it->second;
    const auto path = (fs::path(root) / "cases" / caseId / "volume.nii.gz").string();
    fs::create_directories(fs::path(path).parent_path());
    io::write_nifti(path, c->voxels);
    _volumePaths[caseId] = path;
    return path;
}

} // namespace tracelab::sim
