// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "tracelab/labeler.hpp"
#include "tracelab/volume.hpp"
#include "tracelab/vocabulary.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

/// Deterministic synthetic chest-CT world: labelled volumes with planted
/// lesions, templated reports, and ground-truth-backed answers for every
/// model-backed tool.
namespace tracelab::sim
{

/// Error model for the model-backed tool stubs. All rates are probabilities.
struct NoiseProfile
{
    double draft_miss_rate = 0.0;
    double draft_hallucination_rate = 0.0;
    double classifier_sigma = 0.0;
    double vqa_error_rate = 0.0;
    std::uint64_t seed = 0;

    void validate() const;
    [[nodiscard]] nlohmann::json to_json() const;
    static NoiseProfile from_json(const nlohmann::json& j);
};

struct Finding
{
    size_t pathology = 0;
    std::string location;

    friend bool operator==(const Finding&, const Finding&) = default;
};

struct Lesion
{
    Finding finding;
    Mask mask;
    std::string descriptor; // the rendered finding sentence
};

struct SyntheticCase
{
    std::string case_id;
    std::uint64_t seed = 0;
    Dims dims;
    Volume voxels;
    std::map<std::string, Mask> organs;
    std::vector<Lesion> lesions;
    LabelVector labels;
    std::string gt_report;

    [[nodiscard]] std::vector<Finding> findings() const;
};

struct CaseConfig
{
    Dims dims {32, 32, 32};
    int min_lesions = 0;
    int max_lesions = 4;
    /// When non-empty, exactly these pathologies are planted (random locations).
    std::vector<size_t> forced_pathologies;

    [[nodiscard]] nlohmann::json to_json() const;
    static CaseConfig from_json(const nlohmann::json& j);
};

/// Organ names produced by generate_case.
const std::vector<std::string>& organ_names();

/// Deterministic for a fixed (seed, config, vocabulary). Throws ConfigError on
/// impossible requests (dimensions outside 8..64, more lesions than pathologies).
SyntheticCase generate_case(const std::string& caseId, std::uint64_t seed, const CaseConfig& config, const Vocabulary& vocab);

/// "Findings:" with one sentence per checklist category (normal template or
/// the lesion sentences), then "Impression:" listing each abnormal finding.
std::string render_report(std::span<const Finding> findings, const Vocabulary& vocab);
std::string render_report(const SyntheticCase& c, const Vocabulary& vocab);

/// Slices a question is restricted to; empty means the whole volume.
struct QueryScope
{
    std::vector<std::pair<Direction, int>> slices;

    [[nodiscard]] bool whole_volume() const noexcept { return slices.empty(); }
    static QueryScope from_slice_paths(const std::vector<std::string>& paths);
};

std::string oracle_answer(const SyntheticCase& c, const Vocabulary& vocab, std::string_view question, const QueryScope& scope,
                          const NoiseProfile& noise);

std::string oracle_draft(const SyntheticCase& c, const Vocabulary& vocab, const NoiseProfile& noise);

/// 0.9*label + 0.1*(1-label) plus Gaussian noise of scale classifier_sigma,
/// clamped to [0,1].
std::vector<double> oracle_probs(const SyntheticCase& c, const Vocabulary& vocab, const NoiseProfile& noise);

/// "Name: Positive (Prob: 0.9000) | Name: Negative (Prob: 0.1000) | ..."
std::string format_probabilities(const std::vector<double>& probs, const Vocabulary& vocab, double threshold = 0.5);

/// Planted geometry for an organ name ("heart", "lungs", ...) or a pathology
/// name ("pleural effusion"). nullopt for unknown targets.
std::optional<Mask> oracle_mask(const SyntheticCase& c, const Vocabulary& vocab, std::string_view target);

// Case bundles: <dir>/volume.nii.gz, <dir>/masks/*.nii.gz, <dir>/case.json.

void save_case_bundle(const std::string& dir, const SyntheticCase& c, const Vocabulary& vocab);
SyntheticCase load_case_bundle(const std::string& dir, const Vocabulary& vocab);

/// Resolves case references for the sim-bound tools. Cases are registered in
/// memory or loaded lazily from `<bundleRoot>/<case_id>/`. Thread-safe.
class CaseStore
{
  public:
    explicit CaseStore(const Vocabulary& vocab, std::string bundleRoot = {});

    void add(SyntheticCase c);
    [[nodiscard]] std::shared_ptr<const SyntheticCase> find(const std::string& caseId) const;
    [[nodiscard]] std::shared_ptr<const SyntheticCase> get(const std::string& caseId) const;

    /// Path of the case volume on disk, writing it under `root` on first use
    /// when the case is memory-only.
    std::string volume_path(const std::string& caseId, const std::string& root) const;

    [[nodiscard]] const Vocabulary& vocabulary() const noexcept { return _vocab; }

  private:
    const Vocabulary& _vocab;
    std::string _bundleRoot;
    mutable std::mutex _mutex;
    mutable std::map<std::string, std::shared_ptr<const SyntheticCase>> _cases;
    mutable std::map<std::string, std::string> _volumePaths;
};

} // namespace tracelab::sim
