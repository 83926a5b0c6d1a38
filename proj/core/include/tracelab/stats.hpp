// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "tracelab/labeler.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace tracelab::eval
{

struct MetricResult
{
    double point = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    int n_boot = 0;      // replicates requested
    int n_valid = 0;     // replicates where the metric was defined
    double level = 0.95;
    std::uint64_t seed = 0;
    size_t n = 0;        // sample size

    [[nodiscard]] nlohmann::json to_json() const;
};

struct F1Table
{
    double macro = 0.0;
    double micro = 0.0;
    std::vector<double> per_pathology;
    /// Pathologies with no positive in predictions or references; their F1 is
    /// 1 by convention.
    std::vector<bool> zero_support;

    [[nodiscard]] nlohmann::json to_json(const std::vector<std::string>& names = {}) const;
};

/// Per-label true/false positive and false negative counts over a corpus.
struct Counts
{
    std::vector<std::int64_t> tp, fp, fn;

    explicit Counts(size_t labels = 0): tp(labels, 0), fp(labels, 0), fn(labels, 0) {}
    void add(const LabelVector& pred, const LabelVector& ref, int sign = 1);
};

enum class F1Kind
{
    macro,
    micro
};

std::string to_string(F1Kind k);
F1Kind f1_kind_from_string(const std::string& s);

F1Table f1_from_counts(const Counts& c);
double f1_from_counts(const Counts& c, F1Kind kind);

/// Throws std::invalid_argument on length or vocabulary mismatch.
F1Table f1_scores(const std::vector<LabelVector>& preds, const std::vector<LabelVector>& refs);
double f1_score(const std::vector<LabelVector>& preds, const std::vector<LabelVector>& refs, F1Kind kind);

/// Metric over a resample, given as case indices (with repetition). May throw
/// UndefinedMetric, in which case the replicate is dropped.
using ResampledMetric = std::function<double(const std::vector<size_t>& indices)>;

/// Case-level percentile bootstrap (linear interpolation between order
/// statistics). The interval is widened to contain the point estimate.
/// Throws std::invalid_argument for n = 0 and UndefinedMetric when the point
/// estimate is undefined.
MetricResult bootstrap_ci(size_t n, const ResampledMetric& metric, int nBoot = 2000, double level = 0.95, std::uint64_t seed = 0);

/// Bootstrap of the sample mean.
MetricResult bootstrap_mean(const std::vector<double>& values, int nBoot = 2000, double level = 0.95, std::uint64_t seed = 0);

/// Percentile of sorted data, linear interpolation (q in [0, 1]).
double quantile_sorted(const std::vector<double>& sorted, double q);

/// Paired two-sided permutation test of metric(A) - metric(B): each case's
/// A/B assignment is swapped with probability 1/2. Returns
/// (1 + #{|stat_perm| >= |stat_obs|}) / (nPerm + 1).
double permutation_test(const std::vector<LabelVector>& a, const std::vector<LabelVector>& b, const std::vector<LabelVector>& refs,
                        F1Kind kind, int nPerm = 10000, std::uint64_t seed = 0);

using CorpusMetric = std::function<double(const std::vector<LabelVector>& preds, const std::vector<LabelVector>& refs)>;

/// Same scheme for an arbitrary corpus metric (recomputed per permutation;
/// consumes the random stream exactly like the F1 overload).
double permutation_test(const std::vector<LabelVector>& a, const std::vector<LabelVector>& b, const std::vector<LabelVector>& refs,
                        const CorpusMetric& metric, int nPerm = 10000, std::uint64_t seed = 0);

} // namespace tracelab::eval
