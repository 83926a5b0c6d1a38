// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "tracelab/sim.hpp"
#include "tracelab/trace.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace tracelab::tools
{

enum class ParamType
{
    string,
    integer,
    number,
    boolean,
    string_list,
    path,      // a file, relative to the artifact root or absolute
    path_list, // one or more files; a single string is accepted
    any
};

std::string to_string(ParamType t);

struct ParamSpec
{
    std::string name;
    ParamType type = ParamType::string;
    bool required = false;
    nlohmann::json default_value; // null: no default
    std::string doc;
    std::vector<std::string> allowed; // enum values for string parameters
    /// Observation returned when a required parameter is missing or empty.
    std::string missing_message;

    friend bool operator==(const ParamSpec&, const ParamSpec&) = default;
};

struct Binding
{
    enum class Kind
    {
        builtin,
        sim,
        mcp
    };
    Kind kind = Kind::builtin;
    std::string server; // mcp only

    friend bool operator==(const Binding&, const Binding&) = default;
};

std::string to_string(Binding::Kind k);

struct ToolDescriptor
{
    std::string name;
    std::vector<ParamSpec> params;
    std::string doc;
    Binding binding;

    [[nodiscard]] const ParamSpec* param(const std::string& name) const;

    /// MCP tools/list entry: {name, description, inputSchema}.
    [[nodiscard]] nlohmann::json to_mcp_json() const;
    static ToolDescriptor from_mcp_json(const nlohmann::json& j, Binding binding);

    /// Name, parameters and doc agree; the binding is ignored.
    [[nodiscard]] bool same_contract(const ToolDescriptor& other) const;

    friend bool operator==(const ToolDescriptor&, const ToolDescriptor&) = default;
};

/// Names of the ten default tools in registry order.
const std::vector<std::string>& default_tool_names();

/// The ten default descriptors (registry order), with their default bindings.
std::vector<ToolDescriptor> default_descriptors();

/// Per-call environment: which case the episode is about, where artifacts go.
struct EpisodeContext
{
    std::string episode_id;
    std::string case_ref;
    std::string artifact_root;
    std::string volume_path; // the episode's CT volume as shown to the policy
    int call_index = 0;

    [[nodiscard]] nlohmann::json to_json() const;
    static EpisodeContext from_json(const nlohmann::json& j);

    /// Absolute (or root-relative) filesystem path for a tool argument. Throws
    /// std::invalid_argument for paths escaping the root via "..".
    [[nodiscard]] std::string resolve(const std::string& path) const;
    /// Output directory of the current call, created on demand.
    [[nodiscard]] std::string output_dir() const;
    /// Artifact reference for `fileName` inside the current call directory.
    [[nodiscard]] ArtifactRef artifact(const std::string& fileName, ArtifactKind kind) const;
};

using ToolFn = std::function<ToolResult(const nlohmann::json& args, const EpisodeContext& ctx)>;

/// Registry plus dispatch. Immutable once handed to episodes; `call` is
/// reentrant and never throws for tool-level problems: unknown tools, bad
/// arguments and tool exceptions come back as failed ToolResults.
class Toolbox
{
  public:
    void add(ToolDescriptor descriptor, ToolFn fn);

    [[nodiscard]] const std::vector<ToolDescriptor>& descriptors() const noexcept { return _descriptors; }
    [[nodiscard]] const ToolDescriptor* find(const std::string& name) const;
    [[nodiscard]] size_t size() const noexcept { return _descriptors.size(); }

    ToolResult call(const std::string& name, const nlohmann::json& args, const EpisodeContext& ctx) const;

    /// Argument validation alone: returns the normalized arguments (defaults
    /// filled, single paths wrapped into lists) or the failure observation.
    static std::variant<nlohmann::json, std::string> validate(const ToolDescriptor& d, const nlohmann::json& args);

  private:
    std::vector<ToolDescriptor> _descriptors;
    std::map<std::string, ToolFn> _fns;
};

/// windowing, biggest_slice_selection, get_several_slices_from_segmentation,
/// extract_slices_from_ct.
void register_builtin_tools(Toolbox& box);

/// report_generation, ct_vqa, slice_vqa, disease_classifier,
/// anatomy_segmentation, effusion_segmentation backed by simworld oracles.
void register_sim_tools(Toolbox& box, std::shared_ptr<const sim::CaseStore> store, sim::NoiseProfile noise);

/// All ten tools in registry order, sim-bound where model-backed.
Toolbox make_sim_toolbox(std::shared_ptr<const sim::CaseStore> store, sim::NoiseProfile noise);

/// Structure names accepted by anatomy_segmentation.
const std::vector<std::string>& anatomy_structures();

} // namespace tracelab::tools
