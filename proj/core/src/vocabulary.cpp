// SPDX-License-Identifier: Apache-2.0
#include "tracelab/vocabulary.hpp"

#include "tracelab/common.hpp"
#include "tracelab/resources.hpp"

namespace tracelab
{

std::string Pathology::sentence(std::string_view location) const
{
    return replace_all(sentence_template, "{location}", location);
}

std::string Pathology::lower_name() const
{
    return to_lower(name);
}

Vocabulary Vocabulary::from_json(const nlohmann::json& j)
{
    Vocabulary v;
    try
    {
        for (const auto& p: j.at("pathologies"))
        {
            Pathology path;
            path.name = p.at("name").get<std::string>();
            path.category = p.at("category").get<int>();
            for (const auto& k: p.at("keywords"))
                path.keywords.push_back(to_lower(k.get<std::string>()));
            path.sentence_template = p.at("template").get<std::string>();
            for (const auto& l: p.at("locations"))
            {
                LesionSite site;
                site.name = l.at("name").get<std::string>();
                const auto c = l.at("center");
                site.center = {c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>()};
                path.locations.push_back(std::move(site));
            }
            path.hu = p.value("hu", 0.0);
            path.radius = p.value("radius", 0.05);
            if (path.keywords.empty() || path.locations.empty())
                throw ConfigError("pathology '" + path.name + "' needs keywords and locations");
            if (path.sentence_template.find("{location}") == std::string::npos)
                throw ConfigError("template of '" + path.name + "' lacks {location}");
            v._pathologies.push_back(std::move(path));
        }
        for (const auto& c: j.at("categories"))
        {
            ChecklistCategory cat;
            cat.id = c.at("id").get<int>();
            cat.name = c.at("name").get<std::string>();
            for (const auto& k: c.at("keywords"))
                cat.keywords.push_back(to_lower(k.get<std::string>()));
            cat.normal_sentence = c.at("normal").get<std::string>();
            v._categories.push_back(std::move(cat));
        }
        for (const auto& n: j.at("negation_cues"))
            v._negationCues.push_back(to_lower(n.get<std::string>()));
        v._normalImpression = j.value("normal_impression", "No acute abnormality.");
    }
    catch (const nlohmann::json::exception& e)
    {
        throw ConfigError(std::string("invalid vocabulary: ") + e.what());
    }
    if (v._pathologies.empty())
        throw ConfigError("vocabulary must contain at least one pathology");
    for (const auto& p: v._pathologies)
    {
        bool found = false;
        for (const auto& c: v._categories)
            found = found || c.id == p.category;
        if (!found)
            throw ConfigError("pathology '" + p.name + "' refers to unknown category " + std::to_string(p.category));
    }
    return v;
}

Vocabulary Vocabulary::load(const std::string& path)
{
    try
    {
        return from_json(nlohmann::json::parse(read_file(path)));
    }
    catch (const nlohmann::json::parse_error& e)
    {
        throw ConfigError("cannot parse vocabulary " + path + ": " + e.what());
    }
}

const Vocabulary& Vocabulary::default_vocabulary()
{
    static const Vocabulary v = from_json(nlohmann::json::parse(embedded::vocabulary));
    return v;
}

std::optional<size_t> Vocabulary::index_of(std::string_view name) const
{
    const auto key = to_lower(trim(name));
    for (size_t i = 0; i < _pathologies.size(); ++i)
        if (_pathologies[i].lower_name() == key)
            return i;
    return std::nullopt;
}

const ChecklistCategory& Vocabulary::category(int id) const
{
    for (const auto& c: _categories)
        if (c.id == id)
            return c;
    throw std::out_of_range("unknown checklist category " + std::to_string(id));
}

bool Vocabulary::is_negated(std::string_view lowerSentence) const
{
    for (const auto& cue: _negationCues)
        if (contains_word(lowerSentence, cue))
            return true;
    return false;
}

std::set<size_t> Vocabulary::mentioned_pathologies(std::string_view lowerText) const
{
    std::set<size_t> out;
    for (size_t i = 0; i < _pathologies.size(); ++i)
        for (const auto& k: _pathologies[i].keywords)
            if (contains_word_prefix(lowerText, k))
            {
                out.insert(i);
                break;
            }
    return out;
}

std::set<int> Vocabulary::mentioned_categories(std::string_view lowerText) const
{
    std::set<int> out;
    for (const auto& c: _categories)
        for (const auto& k: c.keywords)
            if (contains_word_prefix(lowerText, k))
            {
                out.insert(c.id);
                break;
            }
    return out;
}

std::optional<std::string> Vocabulary::mentioned_location(size_t pathology, std::string_view lowerSentence) const
{
    for (const auto& loc: _pathologies.at(pathology).locations)
        if (contains_word(lowerSentence, to_lower(loc.name)))
            return loc.name;
    return std::nullopt;
}

nlohmann::json Vocabulary::to_json() const
{
    nlohmann::json j;
    auto& paths = j["pathologies"] = nlohmann::json::array();
    for (const auto& p: _pathologies)
    {
        nlohmann::json locs = nlohmann::json::array();
        for (const auto& l: p.locations)
            locs.push_back({{"name", l.name}, {"center", l.center}});
        paths.push_back({{"name", p.name},
                         {"category", p.category},
                         {"keywords", p.keywords},
                         {"template", p.sentence_template},
                         {"locations", locs},
                         {"hu", p.hu},
                         {"radius", p.radius}});
    }
    auto& cats = j["categories"] = nlohmann::json::array();
    for (const auto& c: _categories)
        cats.push_back({{"id", c.id}, {"name", c.name}, {"keywords", c.keywords}, {"normal", c.normal_sentence}});
    j["negation_cues"] = _negationCues;
    j["normal_impression"] = _normalImpression;
    return j;
}

} // namespace tracelab
