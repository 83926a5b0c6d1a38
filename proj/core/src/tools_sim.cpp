// SPDX-License-Identifier: Apache-2.0
#include "tool_support.hpp"

#include "tracelab/common.hpp"
#include "tracelab/io.hpp"

#include <algorithm>
#include <filesystem>

namespace fs = std::filesystem;

namespace tracelab::tools
{

namespace
{
    using CasePtr = std::shared_ptr<const sim::SyntheticCase>;

    struct SimEnv
    {
        std::shared_ptr<const sim::CaseStore> store;
        sim::NoiseProfile noise;

        [[nodiscard]] const Vocabulary& vocab() const { return store->vocabulary(); }
    };

    // Resolves the bound case and the volume argument, or a failure.
    std::variant<CasePtr, ToolResult> bound_case(const SimEnv& env, const nlohmann::json& args, const EpisodeContext& ctx)
    {
        const auto vol = detail::volume_arg(args, ctx);
        if (!vol.path)
            return ToolResult::failure(vol.failure);
        auto c = env.store->find(ctx.case_ref);
        if (!c)
            return ToolResult::failure("No study is bound to case reference '" + ctx.case_ref + "'.");
        return c;
    }

    ToolResult write_masks(const std::vector<std::pair<std::string, Mask>>& masks, const EpisodeContext& ctx)
    {
        const auto dir = ctx.output_dir();
        std::vector<ArtifactRef> arts;
        for (const auto& [name, m]: masks)
        {
            io::write_nifti((fs::path(dir) / (name + ".nii.gz")).string(), m);
            arts.push_back(ctx.artifact(name + ".nii.gz", ArtifactKind::mask));
        }
        return ToolResult::ok("", std::move(arts));
    }

    // Wraps a tool body that needs the bound case and a valid volume argument.
    template <typename Body>
    ToolFn with_case(std::shared_ptr<const SimEnv> env, Body body)
    {
        return [env = std::move(env), body = std::move(body)](const nlohmann::json& args, const EpisodeContext& ctx) -> ToolResult {
            auto bound = bound_case(*env, args, ctx);
            if (auto* failure = std::get_if<ToolResult>(&bound))
                return *failure;
            return body(*env, *std::get<CasePtr>(bound), args, ctx);
        };
    }
} // namespace

std::map<std::string, ToolFn> detail::sim_fns(std::shared_ptr<const sim::CaseStore> store, sim::NoiseProfile noise)
{
    if (!store)
        throw ConfigError("sim tools need a case store");
    noise.validate();
    const auto env = std::make_shared<const SimEnv>(SimEnv {std::move(store), noise});
    std::map<std::string, ToolFn> fns;

    fns["report_generation"] = with_case(env, [](const SimEnv& e, const sim::SyntheticCase& c, const nlohmann::json&, const EpisodeContext&) {
        return ToolResult::ok(sim::oracle_draft(c, e.vocab(), e.noise));
    });

    fns["ct_vqa"] = with_case(env, [](const SimEnv& e, const sim::SyntheticCase& c, const nlohmann::json& args, const EpisodeContext&) {
        return ToolResult::ok(sim::oracle_answer(c, e.vocab(), args.at("question").get<std::string>(), {}, e.noise));
    });

    fns["slice_vqa"] = [env](const nlohmann::json& args, const EpisodeContext& ctx) {
        std::vector<std::string> paths;
        for (const auto& p: args.at("image_paths"))
        {
            const auto arg = p.get<std::string>();
            if (!fs::exists(ctx.resolve(arg)))
                return ToolResult::failure("File not found: " + arg);
            paths.push_back(arg);
        }
        const auto scope = sim::QueryScope::from_slice_paths(paths);
        if (scope.whole_volume())
            return ToolResult::failure("Please provide the CT slices. The given files are not extracted CT slices.");
        const auto c = env->store->find(ctx.case_ref);
        if (!c)
            return ToolResult::failure("No study is bound to case reference '" + ctx.case_ref + "'.");
        return ToolResult::ok(sim::oracle_answer(*c, env->vocab(), args.at("question").get<std::string>(), scope, env->noise));
    };

    fns["disease_classifier"] = with_case(env, [](const SimEnv& e, const sim::SyntheticCase& c, const nlohmann::json&, const EpisodeContext&) {
        return ToolResult::ok(sim::format_probabilities(sim::oracle_probs(c, e.vocab(), e.noise), e.vocab()));
    });

    fns["anatomy_segmentation"] = with_case(env, [](const SimEnv& e, const sim::SyntheticCase& c, const nlohmann::json& args,
                                                    const EpisodeContext& ctx) {
        std::vector<std::pair<std::string, Mask>> masks;
        for (const auto& s: args.at("structures"))
        {
            const auto name = s.get<std::string>();
            if (std::any_of(masks.begin(), masks.end(), [&](const auto& m) { return m.first == name; }))
                continue;
            auto m = sim::oracle_mask(c, e.vocab(), name);
            if (!m)
                return ToolResult::failure("Unknown structure '" + name + "'. Available: " + join(anatomy_structures(), ", ") + ".");
            masks.emplace_back(name, std::move(*m));
        }
        return write_masks(masks, ctx);
    });

    fns["effusion_segmentation"] = with_case(env, [](const SimEnv& e, const sim::SyntheticCase& c, const nlohmann::json&,
                                                     const EpisodeContext& ctx) {
        std::vector<std::pair<std::string, Mask>> masks;
        for (const auto& [file, target]: {std::pair {"pleural_effusion", "Pleural effusion"}, {"pericardial_effusion", "Pericardial effusion"}})
        {
            auto m = sim::oracle_mask(c, e.vocab(), target);
            masks.emplace_back(file, m ? std::move(*m) : Mask(c.dims));
        }
        return write_masks(masks, ctx);
    });
    return fns;
}

void register_sim_tools(Toolbox& box, std::shared_ptr<const sim::CaseStore> store, sim::NoiseProfile noise)
{
    const auto fns = detail::sim_fns(std::move(store), noise);
    for (auto& d: default_descriptors())
        if (auto it = fns.find(d.name); it != fns.end())
            box.add(std::move(d), it->second);
}

Toolbox make_sim_toolbox(std::shared_ptr<const sim::CaseStore> store, sim::NoiseProfile noise)
{
    auto fns = detail::sim_fns(std::move(store), noise);
    fns.merge(detail::builtin_fns());
    Toolbox box;
    for (auto& d: default_descriptors())
    {
        auto fn = fns.at(d.name);
        box.add(std::move(d), std::move(fn));
    }
    return box;
}

} // namespace tracelab::tools
