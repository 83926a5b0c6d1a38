// SPDX-License-Identifier: Apache-2.0
// Internal helpers shared by the builtin and sim tool implementations.
#pragma once

#include "tracelab/tools.hpp"

#include "tracelab/io.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>

namespace tracelab::tools::detail
{

constexpr const char* kProvideVolume = "Please provide the CT volume.";

/// The volume argument of a tool (image_path, falling back to the episode
/// volume). Returns the resolved filesystem path or the failure observation.
struct VolumeArg
{
    std::optional<std::string> path;
    std::string failure;
};

inline VolumeArg volume_arg(const nlohmann::json& args, const EpisodeContext& ctx)
{
    std::string p = args.contains("image_path") ? args.at("image_path").get<std::string>() : ctx.volume_path;
    if (p.empty())
        return {std::nullopt, kProvideVolume};
    const auto resolved = ctx.resolve(p);
    if (!std::filesystem::exists(resolved))
        return {std::nullopt, "File not found: " + p};
    if (!io::is_nifti_path(resolved))
        return {std::nullopt, kProvideVolume};
    return {resolved, {}};
}

std::map<std::string, ToolFn> builtin_fns();
std::map<std::string, ToolFn> sim_fns(std::shared_ptr<const sim::CaseStore> store, sim::NoiseProfile noise);

inline std::string file_stem(const std::string& path)
{
    auto name = std::filesystem::path(path).filename().string();
    for (const char* ext: {".nii.gz", ".nii", ".npy", ".png"})
    {
        const std::string e(ext);
        if (name.size() > e.size() && name.compare(name.size() - e.size(), e.size(), e) == 0)
            return name.substr(0, name.size() - e.size());
    }
    return name;
}

} // namespace tracelab::tools::detail
