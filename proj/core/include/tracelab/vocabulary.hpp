// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <nlohmann/json.hpp>

#include <array>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace tracelab
{

struct LesionSite
{
    std::string name;
    std::array<double, 3> center {}; // normalised (x, y, z) in [0,1]
};

struct Pathology
{
    std::string name;                  // e.g. "Pleural effusion"
    int category = 0;                  // checklist item 1..9
    std::vector<std::string> keywords; // lower case
    std::string sentence_template;     // contains "{location}"
    std::vector<LesionSite> locations;
    double hu = 0;                     // intensity painted for planted lesions
    double radius = 0.05;              // normalised lesion radius

    [[nodiscard]] std::string sentence(std::string_view location) const;
    [[nodiscard]] std::string lower_name() const;
};

/// One of the nine diagnostic checklist categories.
struct ChecklistCategory
{
    int id = 0;
    std::string name;
    std::vector<std::string> keywords; // lower-case word prefixes used for routing
    std::string normal_sentence;
};

/// Pathology vocabulary plus the fixed sentence grammar used by the synthetic
/// world, the rule-based labeler and the scripted judges.
class Vocabulary
{
  public:
    static Vocabulary from_json(const nlohmann::json& j);
    static Vocabulary load(const std::string& path);
    /// The 18 CT-RATE labels with the bundled template tables.
    static const Vocabulary& default_vocabulary();

    [[nodiscard]] const std::vector<Pathology>& pathologies() const noexcept { return _pathologies; }
    [[nodiscard]] const std::vector<ChecklistCategory>& categories() const noexcept { return _categories; }
    [[nodiscard]] const std::vector<std::string>& negation_cues() const noexcept { return _negationCues; }
    [[nodiscard]] const std::string& normal_impression() const noexcept { return _normalImpression; }
    [[nodiscard]] size_t size() const noexcept { return _pathologies.size(); }

    [[nodiscard]] std::optional<size_t> index_of(std::string_view name) const;
    [[nodiscard]] const ChecklistCategory& category(int id) const;

    /// True when the (lower-cased) sentence contains a negation cue.
    [[nodiscard]] bool is_negated(std::string_view lowerSentence) const;

    /// Pathologies whose keywords occur in the (lower-cased) text.
    [[nodiscard]] std::set<size_t> mentioned_pathologies(std::string_view lowerText) const;

    /// Checklist categories whose routing keywords occur in the text.
    [[nodiscard]] std::set<int> mentioned_categories(std::string_view lowerText) const;

    /// Location of `pathology` mentioned in the sentence, if any.
    [[nodiscard]] std::optional<std::string> mentioned_location(size_t pathology, std::string_view lowerSentence) const;

    [[nodiscard]] nlohmann::json to_json() const;

  private:
    std::vector<Pathology> _pathologies;
    std::vector<ChecklistCategory> _categories;
    std::vector<std::string> _negationCues;
    std::string _normalImpression;
};

} // namespace tracelab
