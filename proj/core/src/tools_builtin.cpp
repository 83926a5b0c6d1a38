// SPDX-License-Identifier: Apache-2.0
#include "tool_support.hpp"

#include "tracelab/imaging.hpp"
#include "tracelab/io.hpp"

#include <cstdio>
#include <filesystem>
#include <set>

namespace fs = std::filesystem;

namespace tracelab::tools
{

namespace
{
    std::string slice_name(const char* direction, int index, int region = 0)
    {
        char buf[64];
        if (region > 0)
            std::snprintf(buf, sizeof buf, "region_%d_%s_slice_%03d.npy", region, direction, index);
        else
            std::snprintf(buf, sizeof buf, "%s_slice_%03d.npy", direction, index);
        return buf;
    }

    std::string dims_text(const Dims& d)
    {
        return std::to_string(d.nx) + "x" + std::to_string(d.ny) + "x" + std::to_string(d.nz);
    }

    struct VolumeAndMask
    {
        Volume volume;
        imaging::Components components;
    };

    // Loads the volume and the labelled mask regions, or returns a failure.
    std::variant<VolumeAndMask, ToolResult> load_regions(const nlohmann::json& args, const EpisodeContext& ctx)
    {
        const auto vol = detail::volume_arg(args, ctx);
        if (!vol.path)
            return ToolResult::failure(vol.failure);
        const auto maskArg = args.at("mask_path").get<std::string>();
        const auto maskPath = ctx.resolve(maskArg);
        if (!fs::exists(maskPath))
            return ToolResult::failure("File not found: " + maskArg);
        VolumeAndMask out {io::read_nifti_volume(*vol.path), {}};
        const auto mask = io::read_nifti_mask(maskPath);
        if (mask.dims() != out.volume.dims())
            return ToolResult::failure("The mask shape (" + dims_text(mask.dims()) + ") does not match the volume shape ("
                                       + dims_text(out.volume.dims()) + ").");
        out.components = imaging::connected_components(mask);
        if (out.components.count == 0)
            return ToolResult::failure("No segmented voxels in the mask.");
        return out;
    }

    ToolResult write_axial(const Volume& v, const std::vector<std::pair<int, int>>& regionSlices, const EpisodeContext& ctx)
    {
        const auto dir = ctx.output_dir();
        std::vector<ArtifactRef> arts;
        for (const auto& [region, z]: regionSlices)
        {
            const auto name = slice_name("axial", z, region);
            io::write_npy((fs::path(dir) / name).string(), extract_slice(v, Direction::axial, z));
            arts.push_back(ctx.artifact(name, ArtifactKind::slice_array));
        }
        return ToolResult::ok("", std::move(arts));
    }

    ToolResult extract_slices_from_ct(const nlohmann::json& args, const EpisodeContext& ctx)
    {
        const auto vol = detail::volume_arg(args, ctx);
        if (!vol.path)
            return ToolResult::failure(vol.failure);
        const auto direction = direction_from_string(args.at("direction").get<std::string>());
        const auto n = args.at("n_slices").get<long long>();
        const auto v = io::read_nifti_volume(*vol.path);
        const int extent = v.extent(direction);
        if (n < 1 || n > extent)
            return ToolResult::failure("n_slices (" + std::to_string(n) + ") must be between 1 and the number of available " + to_string(direction)
                                       + " slices (" + std::to_string(extent) + "); request at most " + std::to_string(extent) + ".");
        const auto dir = ctx.output_dir();
        const auto dirName = to_string(direction);
        std::vector<ArtifactRef> arts;
        for (int idx: imaging::evenly_spaced_indices(extent, static_cast<int>(n)))
        {
            const auto name = slice_name(dirName.c_str(), idx);
            io::write_npy((fs::path(dir) / name).string(), extract_slice(v, direction, idx));
            arts.push_back(ctx.artifact(name, ArtifactKind::slice_array));
        }
        return ToolResult::ok("", std::move(arts));
    }

    ToolResult biggest_slice_selection(const nlohmann::json& args, const EpisodeContext& ctx)
    {
        auto loaded = load_regions(args, ctx);
        if (auto* failure = std::get_if<ToolResult>(&loaded))
            return *failure;
        const auto& [volume, cc] = std::get<VolumeAndMask>(loaded);
        std::vector<std::pair<int, int>> picks;
        const auto zs = imaging::biggest_axial_slices(cc);
        for (size_t k = 0; k < zs.size(); ++k)
            picks.emplace_back(static_cast<int>(k) + 1, zs[k]);
        return write_axial(volume, picks, ctx);
    }

    ToolResult get_several_slices_from_segmentation(const nlohmann::json& args, const EpisodeContext& ctx)
    {
        const auto n = args.at("n_slices").get<long long>();
        if (n < 1)
            return ToolResult::failure("n_slices must be at least 1.");
        auto loaded = load_regions(args, ctx);
        if (auto* failure = std::get_if<ToolResult>(&loaded))
            return *failure;
        const auto& [volume, cc] = std::get<VolumeAndMask>(loaded);
        std::vector<std::pair<int, int>> picks;
        const auto extents = imaging::axial_extents(cc);
        for (size_t k = 0; k < extents.size(); ++k)
            for (int z: imaging::equidistant_indices(extents[k].first, extents[k].second, static_cast<int>(n)))
                picks.emplace_back(static_cast<int>(k) + 1, z);
        return write_axial(volume, picks, ctx);
    }

    ToolResult windowing(const nlohmann::json& args, const EpisodeContext& ctx)
    {
        const bool hasPreset = args.contains("preset");
        const bool hasCenter = args.contains("center");
        const bool hasWidth = args.contains("width");
        imaging::WindowPreset window;
        if (hasPreset && (hasCenter || hasWidth))
            return ToolResult::failure("Provide either a preset or center and width, not both.");
        if (hasPreset)
            window = *imaging::find_preset(args.at("preset").get<std::string>());
        else if (hasCenter && hasWidth)
            window = {"custom", args.at("center").get<double>(), args.at("width").get<double>()};
        else
            return ToolResult::failure("Provide a preset (lung, bone, abdomen, mediastinum) or both center and width.");
        if (!(window.width > 0))
            return ToolResult::failure("Window width must be positive.");

        const auto dir = ctx.output_dir();
        std::vector<ArtifactRef> arts;
        std::set<std::string> used;
        for (const auto& in: args.at("input"))
        {
            const auto arg = in.get<std::string>();
            const auto path = ctx.resolve(arg);
            if (!fs::exists(path))
                return ToolResult::failure("File not found: " + arg);
            auto stem = "windowed_" + detail::file_stem(path);
            for (int k = 2; used.count(stem); ++k)
                stem = "windowed_" + detail::file_stem(path) + "_" + std::to_string(k);
            used.insert(stem);
            if (io::is_nifti_path(path))
            {
                io::write_nifti((fs::path(dir) / (stem + ".nii.gz")).string(), imaging::window_volume(io::read_nifti_volume(path), window));
                arts.push_back(ctx.artifact(stem + ".nii.gz", ArtifactKind::volume));
            }
            else if (path.size() > 4 && path.compare(path.size() - 4, 4, ".npy") == 0)
            {
                io::write_png((fs::path(dir) / (stem + ".png")).string(), imaging::window_slice(io::read_npy(path), window));
                arts.push_back(ctx.artifact(stem + ".png", ArtifactKind::image));
            }
            else
                return ToolResult::failure("Unsupported input '" + arg + "': expected a .nii.gz volume or a .npy slice.");
        }
        return ToolResult::ok("", std::move(arts));
    }

} // namespace

std::map<std::string, ToolFn> detail::builtin_fns()
{
    return {{"biggest_slice_selection", biggest_slice_selection},
            {"get_several_slices_from_segmentation", get_several_slices_from_segmentation},
            {"extract_slices_from_ct", extract_slices_from_ct},
            {"windowing", windowing}};
}

void register_builtin_tools(Toolbox& box)
{
    const auto fns = detail::builtin_fns();
    for (auto& d: default_descriptors())
        if (auto it = fns.find(d.name); it != fns.end())
            box.add(std::move(d), it->second);
}

} // namespace tracelab::tools
