// SPDX-License-Identifier: Apache-2.0
#include "tracelab/stats.hpp"

#include "tracelab/common.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tracelab::eval
{

using nlohmann::json;

namespace
{
    constexpr double kTieTolerance = 1e-12;

    double f1_of(std::int64_t tp, std::int64_t fp, std::int64_t fn)
    {
        if (tp + fp + fn == 0)
            return 1.0;
        return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
    }

    void check_aligned(const std::vector<LabelVector>& a, const std::vector<LabelVector>& b)
    {
        if (a.size() != b.size())
            throw std::invalid_argument("prediction and reference lists differ in length");
        for (size_t i = 0; i < a.size(); ++i)
            if (a[i].size() != b[i].size() || a[i].size() != a.front().size())
                throw std::invalid_argument("label vectors differ in vocabulary size");
    }

    // Per-case count deltas for swapping A and B, stored sparsely.
    struct Delta
    {
        size_t label;
        int dtp, dfp, dfn;
    };
} // namespace

json MetricResult::to_json() const
{
    return {{"point", point}, {"ci_low", ci_low}, {"ci_high", ci_high}, {"n_boot", n_boot},
            {"n_valid", n_valid}, {"level", level}, {"seed", seed}, {"n", n}};
}

json F1Table::to_json(const std::vector<std::string>& names) const
{
    json per = json::array();
    for (size_t i = 0; i < per_pathology.size(); ++i)
    {
        json e = {{"f1", per_pathology[i]}, {"zero_support", static_cast<bool>(zero_support[i])}};
        if (i < names.size())
            e["pathology"] = names[i];
        per.push_back(e);
    }
    return {{"macro", macro}, {"micro", micro}, {"per_pathology", per}};
}

void Counts::add(const LabelVector& pred, const LabelVector& ref, int sign)
{
    for (size_t i = 0; i < tp.size(); ++i)
    {
        tp[i] += sign * (pred[i] && ref[i]);
        fp[i] += sign * (pred[i] && !ref[i]);
        fn[i] += sign * (!pred[i] && ref[i]);
    }
}

std::string to_string(F1Kind k)
{
    return k == F1Kind::macro ? "macro" : "micro";
}

F1Kind f1_kind_from_string(const std::string& s)
{
    if (s == "macro")
        return F1Kind::macro;
    if (s == "micro")
        return F1Kind::micro;
    throw ConfigError("unknown F1 kind '" + s + "'");
}

F1Table f1_from_counts(const Counts& c)
{
    F1Table t;
    std::int64_t tp = 0, fp = 0, fn = 0;
    double sum = 0;
    for (size_t i = 0; i < c.tp.size(); ++i)
    {
        const double f = f1_of(c.tp[i], c.fp[i], c.fn[i]);
        t.per_pathology.push_back(f);
        t.zero_support.push_back(c.tp[i] + c.fp[i] + c.fn[i] == 0);
        sum += f;
        tp += c.tp[i];
        fp += c.fp[i];
        fn += c.fn[i];
    }
    t.macro = c.tp.empty() ? 1.0 : sum / static_cast<double>(c.tp.size());
    t.micro = f1_of(tp, fp, fn);
    return t;
}

double f1_from_counts(const Counts& c, F1Kind kind)
{
    if (kind == F1Kind::micro)
    {
        std::int64_t tp = 0, fp = 0, fn = 0;
        for (size_t i = 0; i < c.tp.size(); ++i)
        {
            tp += c.tp[i];
            fp += c.fp[i];
            fn += c.fn[i];
        }
        return f1_of(tp, fp, fn);
    }
    if (c.tp.empty())
        return 1.0;
    double sum = 0;
    for (size_t i = 0; i < c.tp.size(); ++i)
        sum += f1_of(c.tp[i], c.fp[i], c.fn[i]);
    return sum / static_cast<double>(c.tp.size());
}

F1Table f1_scores(const std::vector<LabelVector>& preds, const std::vector<LabelVector>& refs)
{
    check_aligned(preds, refs);
    Counts c(preds.empty() ? 0 : preds.front().size());
    for (size_t i = 0; i < preds.size(); ++i)
        c.add(preds[i], refs[i]);
    return f1_from_counts(c);
}

double f1_score(const std::vector<LabelVector>& preds, const std::vector<LabelVector>& refs, F1Kind kind)
{
    const auto t = f1_scores(preds, refs);
    return kind == F1Kind::macro ? t.macro : t.micro;
}

double quantile_sorted(const std::vector<double>& sorted, double q)
{
    if (sorted.empty())
        throw std::invalid_argument("quantile of an empty sample");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
    const auto lo = static_cast<size_t>(std::floor(h));
    if (lo + 1 >= sorted.size())
        return sorted.back();
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

MetricResult bootstrap_ci(size_t n, const ResampledMetric& metric, int nBoot, double level, std::uint64_t seed)
{
    if (n == 0)
        throw std::invalid_argument("bootstrap needs at least one sample");
    if (nBoot < 1 || !(level > 0.0 && level < 1.0))
        throw std::invalid_argument("bootstrap needs n_boot >= 1 and level in (0, 1)");
    MetricResult r;
    r.n = n;
    r.n_boot = nBoot;
    r.level = level;
    r.seed = seed;

    std::vector<size_t> all(n);
    for (size_t i = 0; i < n; ++i)
        all[i] = i;
    r.point = metric(all);

    Rng rng(mix_seed(seed, "bootstrap"));
    std::vector<double> stats;
    stats.reserve(static_cast<size_t>(nBoot));
    std::vector<size_t> idx(n);
    for (int b = 0; b < nBoot; ++b)
    {
        for (auto& i: idx)
            i = static_cast<size_t>(uniform_index(rng, n));
        try
        {
            stats.push_back(metric(idx));
        }
        catch (const UndefinedMetric&)
        {
        }
    }
    r.n_valid = static_cast<int>(stats.size());
    if (stats.empty())
    {
        r.ci_low = r.ci_high = r.point;
        return r;
    }
    std::sort(stats.begin(), stats.end());
    const double alpha = 1.0 - level;
    r.ci_low = std::min(quantile_sorted(stats, alpha / 2.0), r.point);
    r.ci_high = std::max(quantile_sorted(stats, 1.0 - alpha / 2.0), r.point);
    return r;
}

MetricResult bootstrap_mean(const std::vector<double>& values, int nBoot, double level, std::uint64_t seed)
{
    return bootstrap_ci(
        values.size(),
        [&](const std::vector<size_t>& idx) {
            double s = 0;
            for (auto i: idx)
                s += values[i];
            return s / static_cast<double>(idx.size());
        },
        nBoot, level, seed);
}

double permutation_test(const std::vector<LabelVector>& a, const std::vector<LabelVector>& b, const std::vector<LabelVector>& refs,
                        F1Kind kind, int nPerm, std::uint64_t seed)
{
    check_aligned(a, refs);
    check_aligned(b, refs);
    if (nPerm < 1)
        throw std::invalid_argument("n_perm must be >= 1");
    const size_t labels = refs.empty() ? 0 : refs.front().size();
    Counts ca(labels), cb(labels);
    std::vector<std::vector<Delta>> deltas(refs.size());
    for (size_t i = 0; i < refs.size(); ++i)
    {
        ca.add(a[i], refs[i]);
        cb.add(b[i], refs[i]);
        for (size_t l = 0; l < labels; ++l)
        {
            // Change of A's counts when case i takes B's prediction.
            const int dtp = (b[i][l] && refs[i][l]) - (a[i][l] && refs[i][l]);
            const int dfp = (b[i][l] && !refs[i][l]) - (a[i][l] && !refs[i][l]);
            const int dfn = (!b[i][l] && refs[i][l]) - (!a[i][l] && refs[i][l]);
            if (dtp || dfp || dfn)
                deltas[i].push_back({l, dtp, dfp, dfn});
        }
    }
    const double observed = std::abs(f1_from_counts(ca, kind) - f1_from_counts(cb, kind));

    Rng rng(mix_seed(seed, "permutation"));
    long long extreme = 0;
    Counts pa(labels), pb(labels);
    for (int p = 0; p < nPerm; ++p)
    {
        pa = ca;
        pb = cb;
        for (size_t i = 0; i < refs.size(); ++i)
        {
            if (!bernoulli(rng, 0.5))
                continue;
            for (const auto& d: deltas[i])
            {
                pa.tp[d.label] += d.dtp;
                pa.fp[d.label] += d.dfp;
                pa.fn[d.label] += d.dfn;
                pb.tp[d.label] -= d.dtp;
                pb.fp[d.label] -= d.dfp;
                pb.fn[d.label] -= d.dfn;
            }
        }
        if (std::abs(f1_from_counts(pa, kind) - f1_from_counts(pb, kind)) >= observed - kTieTolerance)
            ++extreme;
    }
    return static_cast<double>(1 + extreme) / static_cast<double>(nPerm + 1);
}

double permutation_test(const std::vector<LabelVector>& a, const std::vector<LabelVector>& b, const std::vector<LabelVector>& refs,
                        const CorpusMetric& metric, int nPerm, std::uint64_t seed)
{
    check_aligned(a, refs);
    check_aligned(b, refs);
    if (nPerm < 1)
        throw std::invalid_argument("n_perm must be >= 1");
    const double observed = std::abs(metric(a, refs) - metric(b, refs));
    Rng rng(mix_seed(seed, "permutation"));
    long long extreme = 0;
    std::vector<LabelVector> pa(a.size()), pb(b.size());
    for (int p = 0; p < nPerm; ++p)
    {
        for (size_t i = 0; i < refs.size(); ++i)
        {
            const bool swap = bernoulli(rng, 0.5);
            pa[i] = swap ? b[i] : a[i];
            pb[i] = swap ? a[i] : b[i];
        }
        if (std::abs(metric(pa, refs) - metric(pb, refs)) >= observed - kTieTolerance)
            ++extreme;
    }
    return static_cast<double>(1 + extreme) / static_cast<double>(nPerm + 1);
}

} // namespace tracelab::eval
