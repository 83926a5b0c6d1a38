// SPDX-License-Identifier: Apache-2.0
#include "tracelab/tools.hpp"

#include "tracelab/common.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

namespace fs = std::filesystem;

namespace tracelab::tools
{

namespace
{
    ParamSpec image_param()
    {
        return {"image_path", ParamType::path, false, nullptr, "CT volume (.nii.gz); defaults to the study volume", {}, {}};
    }

    nlohmann::json schema_type(ParamType t)
    {
        switch (t)
        {
            case ParamType::string: return {{"type", "string"}};
            case ParamType::integer: return {{"type", "integer"}};
            case ParamType::number: return {{"type", "number"}};
            case ParamType::boolean: return {{"type", "boolean"}};
            case ParamType::string_list: return {{"type", "array"}, {"items", {{"type", "string"}}}};
            case ParamType::path: return {{"type", "string"}, {"format", "path"}};
            case ParamType::path_list: return {{"type", "array"}, {"items", {{"type", "string"}, {"format", "path"}}}};
            case ParamType::any: return nlohmann::json::object();
        }
        return nlohmann::json::object();
    }

    ParamType type_from_schema(const nlohmann::json& s)
    {
        const auto type = s.value("type", std::string {});
        if (type == "string")
            return s.value("format", std::string {}) == "path" ? ParamType::path : ParamType::string;
        if (type == "integer")
            return ParamType::integer;
        if (type == "number")
            return ParamType::number;
        if (type == "boolean")
            return ParamType::boolean;
        if (type == "array")
        {
            const auto items = s.value("items", nlohmann::json::object());
            return items.value("format", std::string {}) == "path" ? ParamType::path_list : ParamType::string_list;
        }
        return ParamType::any;
    }

    bool is_missing(const nlohmann::json& v)
    {
        return v.is_null() || (v.is_string() && trim(v.get<std::string>()).empty()) || (v.is_array() && v.empty());
    }

    std::optional<nlohmann::json> coerce(const ParamSpec& p, const nlohmann::json& v)
    {
        switch (p.type)
        {
            case ParamType::string:
            case ParamType::path:
            {
                if (!v.is_string())
                    return std::nullopt;
                if (p.allowed.empty())
                    return std::optional<nlohmann::json>(std::in_place, v);
                const auto lower = to_lower(trim(v.get<std::string>()));
                if (std::find(p.allowed.begin(), p.allowed.end(), lower) == p.allowed.end())
                    return std::nullopt;
                return std::optional<nlohmann::json>(std::in_place, lower);
            }
            case ParamType::integer:
            {
                if (v.is_number_integer())
                    return std::optional<nlohmann::json>(std::in_place, v);
                if (v.is_number_float() && std::floor(v.get<double>()) == v.get<double>())
                    return std::optional<nlohmann::json>(std::in_place, static_cast<long long>(v.get<double>()));
                if (v.is_string())
                {
                    const auto s = trim(v.get<std::string>());
                    char* end = nullptr;
                    const long long n = std::strtoll(s.c_str(), &end, 10);
                    if (!s.empty() && end == s.c_str() + s.size())
                        return std::optional<nlohmann::json>(std::in_place, n);
                }
                return std::nullopt;
            }
            case ParamType::number:
            {
                if (v.is_number())
                    return std::optional<nlohmann::json>(std::in_place, v.get<double>());
                if (v.is_string())
                {
                    const auto s = trim(v.get<std::string>());
                    char* end = nullptr;
                    const double d = std::strtod(s.c_str(), &end);
                    if (!s.empty() && end == s.c_str() + s.size() && std::isfinite(d))
                        return std::optional<nlohmann::json>(std::in_place, d);
                }
                return std::nullopt;
            }
            case ParamType::boolean:
                if (!v.is_boolean())
                    return std::nullopt;
                return std::optional<nlohmann::json>(std::in_place, v);
            case ParamType::string_list:
            case ParamType::path_list:
            {
                if (v.is_string())
                    return std::optional<nlohmann::json>(std::in_place, nlohmann::json::array({v}));
                if (!v.is_array())
                    return std::nullopt;
                for (const auto& e: v)
                    if (!e.is_string())
                        return std::nullopt;
                return std::optional<nlohmann::json>(std::in_place, v);
            }
            case ParamType::any: return std::optional<nlohmann::json>(std::in_place, v);
        }
        return std::nullopt;
    }

    std::string describe_type(const ParamSpec& p)
    {
        if (!p.allowed.empty())
            return "one of " + join(p.allowed, ", ");
        return "a " + to_string(p.type);
    }

    bool has_parent_ref(const fs::path& p)
    {
        return std::any_of(p.begin(), p.end(), [](const fs::path& part) { return part == ".."; });
    }
} // namespace

std::string to_string(ParamType t)
{
    switch (t)
    {
        case ParamType::string: return "string";
        case ParamType::integer: return "integer";
        case ParamType::number: return "number";
        case ParamType::boolean: return "boolean";
        case ParamType::string_list: return "list of strings";
        case ParamType::path: return "path";
        case ParamType::path_list: return "list of paths";
        case ParamType::any: return "value";
    }
    return "value";
}

std::string to_string(Binding::Kind k)
{
    switch (k)
    {
        case Binding::Kind::builtin: return "builtin";
        case Binding::Kind::sim: return "sim";
        case Binding::Kind::mcp: return "mcp";
    }
    return "builtin";
}

const ParamSpec* ToolDescriptor::param(const std::string& n) const
{
    for (const auto& p: params)
        if (p.name == n)
            return &p;
    return nullptr;
}

nlohmann::json ToolDescriptor::to_mcp_json() const
{
    nlohmann::json props = nlohmann::json::object();
    nlohmann::json required = nlohmann::json::array();
    nlohmann::json order = nlohmann::json::array();
    for (const auto& p: params)
    {
        auto s = schema_type(p.type);
        if (!p.doc.empty())
            s["description"] = p.doc;
        if (!p.default_value.is_null())
            s["default"] = p.default_value;
        if (!p.allowed.empty())
            s["enum"] = p.allowed;
        if (!p.missing_message.empty())
            s["x-missing-message"] = p.missing_message;
        props[p.name] = s;
        order.push_back(p.name);
        if (p.required)
            required.push_back(p.name);
    }
    return {{"name", name},
            {"description", doc},
            {"inputSchema", {{"type", "object"}, {"properties", props}, {"required", required}, {"x-order", order}}}};
}

ToolDescriptor ToolDescriptor::from_mcp_json(const nlohmann::json& j, Binding binding)
{
    ToolDescriptor d;
    d.name = j.at("name").get<std::string>();
    d.doc = j.value("description", std::string {});
    d.binding = std::move(binding);
    const auto schema = j.value("inputSchema", nlohmann::json::object());
    const auto props = schema.value("properties", nlohmann::json::object());
    const auto required = schema.value("required", std::vector<std::string> {});
    std::vector<std::string> order = schema.value("x-order", std::vector<std::string> {});
    for (const auto& [k, v]: props.items())
        if (std::find(order.begin(), order.end(), k) == order.end())
            order.push_back(k);
    for (const auto& k: order)
    {
        if (!props.contains(k))
            continue;
        const auto& s = props.at(k);
        ParamSpec p;
        p.name = k;
        p.type = type_from_schema(s);
        p.required = std::find(required.begin(), required.end(), k) != required.end();
        p.default_value = s.value("default", nlohmann::json());
        p.doc = s.value("description", std::string {});
        p.allowed = s.value("enum", std::vector<std::string> {});
        p.missing_message = s.value("x-missing-message", std::string {});
        d.params.push_back(std::move(p));
    }
    return d;
}

bool ToolDescriptor::same_contract(const ToolDescriptor& other) const
{
    return name == other.name && params == other.params && doc == other.doc;
}

const std::vector<std::string>& default_tool_names()
{
    static const std::vector<std::string> names = {"report_generation",
                                                   "ct_vqa",
                                                   "slice_vqa",
                                                   "disease_classifier",
                                                   "anatomy_segmentation",
                                                   "effusion_segmentation",
                                                   "biggest_slice_selection",
                                                   "get_several_slices_from_segmentation",
                                                   "extract_slices_from_ct",
                                                   "windowing"};
    return names;
}

const std::vector<std::string>& anatomy_structures()
{
    static const std::vector<std::string> names = {"right_lung", "left_lung", "lungs", "heart", "aorta", "spine", "trachea"};
    return names;
}

std::vector<ToolDescriptor> default_descriptors()
{
    using K = Binding::Kind;
    const ParamSpec question {"question", ParamType::string, true, nullptr, "natural-language question", {}, {}};
    const ParamSpec mask {"mask_path", ParamType::path, true, nullptr, "segmentation mask (.nii.gz) in the volume frame", {},
                          "Please provide a segmentation mask."};
    std::vector<ToolDescriptor> d;
    d.push_back({"report_generation", {image_param()}, "Generates a preliminary radiology report (findings and impression) for a CT volume.",
                 {K::sim, {}}});
    d.push_back({"ct_vqa",
                 {question, {"image_path", ParamType::path, true, nullptr, "CT volume (.nii.gz)", {}, "Please provide the CT volume."}},
                 "Answers a free-form question about a whole 3D CT volume with a short text answer.",
                 {K::sim, {}}});
    d.push_back({"slice_vqa",
                 {question, {"image_paths", ParamType::path_list, true, nullptr, "one or more extracted 2D slices (.npy)", {},
                             "Please provide the CT slices."}},
                 "Answers a question over one or more extracted 2D CT slices; slices must be extracted first.",
                 {K::sim, {}}});
    d.push_back({"disease_classifier", {image_param()},
                 "Estimates the probability of each of the 18 thoracic pathologies in a CT volume.", {K::sim, {}}});
    d.push_back({"anatomy_segmentation",
                 {image_param(),
                  {"structures", ParamType::string_list, false, anatomy_structures(), "structures to segment", anatomy_structures(), {}}},
                 "Segments anatomical structures and returns one mask per structure.",
                 {K::sim, {}}});
    d.push_back({"effusion_segmentation", {image_param()}, "Segments pleural and pericardial effusion and returns one mask for each.",
                 {K::sim, {}}});
    d.push_back({"biggest_slice_selection", {image_param(), mask},
                 "Returns, for each connected region of a mask, the axial slice where the region is largest.", {K::builtin, {}}});
    d.push_back({"get_several_slices_from_segmentation",
                 {image_param(), mask, {"n_slices", ParamType::integer, false, 3, "slices per region", {}, {}}},
                 "Returns approximately equidistant axial slices spanning each connected region of a mask.",
                 {K::builtin, {}}});
    d.push_back({"extract_slices_from_ct",
                 {image_param(),
                  {"n_slices", ParamType::integer, false, 5, "number of slices", {}, {}},
                  {"direction", ParamType::string, false, "axial", "slicing direction", {"axial", "coronal", "sagittal"}, {}}},
                 "Returns evenly spaced slices of a CT volume along one direction.",
                 {K::builtin, {}}});
    d.push_back({"windowing",
                 {{"input", ParamType::path_list, true, nullptr, "CT volume or extracted slices (.npy)", {},
                   "Please provide a CT volume or slices to window."},
                  {"preset", ParamType::string, false, nullptr, "HU window preset", {"lung", "bone", "abdomen", "mediastinum"}, {}},
                  {"center", ParamType::number, false, nullptr, "window center in HU (with width)", {}, {}},
                  {"width", ParamType::number, false, nullptr, "window width in HU (with center)", {}, {}}},
                 "Clips intensities to a HU window; slices are written as 8-bit PNG images, volumes as windowed volumes.",
                 {K::builtin, {}}});
    return d;
}

nlohmann::json EpisodeContext::to_json() const
{
    return {{"episode_id", episode_id}, {"case_ref", case_ref}, {"artifact_root", artifact_root}, {"volume_path", volume_path},
            {"call_index", call_index}};
}

EpisodeContext EpisodeContext::from_json(const nlohmann::json& j)
{
    EpisodeContext c;
    c.episode_id = j.value("episode_id", std::string {});
    c.case_ref = j.value("case_ref", std::string {});
    c.artifact_root = j.value("artifact_root", std::string {});
    c.volume_path = j.value("volume_path", std::string {});
    c.call_index = j.value("call_index", 0);
    return c;
}

std::string EpisodeContext::resolve(const std::string& path) const
{
    const fs::path p(path);
    if (has_parent_ref(p))
        throw std::invalid_argument("path may not contain '..': " + path);
    if (p.is_absolute() || artifact_root.empty())
        return p.string();
    return (fs::path(artifact_root) / p).string();
}

std::string EpisodeContext::output_dir() const
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "call_%02d", call_index);
    const auto rel = fs::path(episode_id.empty() ? "episode" : episode_id) / buf;
    if (has_parent_ref(rel))
        throw std::invalid_argument("episode id may not contain '..'");
    const auto dir = artifact_root.empty() ? rel : fs::path(artifact_root) / rel;
    fs::create_directories(dir);
    return dir.string();
}

ArtifactRef EpisodeContext::artifact(const std::string& fileName, ArtifactKind kind) const
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "call_%02d", call_index);
    const auto rel = fs::path(episode_id.empty() ? "episode" : episode_id) / buf / fileName;
    return {rel.generic_string(), kind, call_index};
}

void Toolbox::add(ToolDescriptor descriptor, ToolFn fn)
{
    if (descriptor.name.empty())
        throw ConfigError("tool name must be nonempty");
    if (find(descriptor.name))
        throw ConfigError("duplicate tool '" + descriptor.name + "'");
    _fns[descriptor.name] = std::move(fn);
    _descriptors.push_back(std::move(descriptor));
}

const ToolDescriptor* Toolbox::find(const std::string& name) const
{
    for (const auto& d: _descriptors)
        if (d.name == name)
            return &d;
    return nullptr;
}

std::variant<nlohmann::json, std::string> Toolbox::validate(const ToolDescriptor& d, const nlohmann::json& args)
{
    if (!args.is_null() && !args.is_object())
        return "Arguments for " + d.name + " must be a JSON object.";
    nlohmann::json out = nlohmann::json::object();
    const auto in = args.is_null() ? nlohmann::json::object() : args;
    for (const auto& [k, v]: in.items())
        if (!d.param(k))
        {
            std::vector<std::string> names;
            for (const auto& p: d.params)
                names.push_back(p.name);
            return "Unknown argument '" + k + "' for " + d.name + ". Accepted arguments: " + (names.empty() ? "none" : join(names, ", ")) + ".";
        }
    for (const auto& p: d.params)
    {
        const auto it = in.find(p.name);
        if (it == in.end() || is_missing(*it))
        {
            if (p.required)
                return p.missing_message.empty() ? "Missing required argument '" + p.name + "' for " + d.name + "." : p.missing_message;
            if (!p.default_value.is_null())
                out[p.name] = p.default_value;
            continue;
        }
        auto coerced = coerce(p, *it);
        if (!coerced)
            return "Argument '" + p.name + "' for " + d.name + " must be " + describe_type(p) + ".";
        out[p.name] = std::move(*coerced);
    }
    return out;
}

ToolResult Toolbox::call(const std::string& name, const nlohmann::json& args, const EpisodeContext& ctx) const
{
    const auto* d = find(name);
    if (!d)
    {
        std::vector<std::string> names;
        for (const auto& t: _descriptors)
            names.push_back(t.name);
        return ToolResult::failure("Unknown tool '" + name + "'. Available tools: " + join(names, ", ") + ".");
    }
    auto validated = validate(*d, args);
    if (auto* err = std::get_if<std::string>(&validated))
        return ToolResult::failure(*err);
    try
    {
        auto r = _fns.at(name)(std::get<nlohmann::json>(validated), ctx);
        if (r.success)
            r.error.reset();
        else if (!r.error)
            r.error = name + " failed.";
        return r;
    }
    catch (const std::exception& e)
    {
        return ToolResult::failure(name + " failed: " + e.what());
    }
}

} // namespace tracelab::tools
