// SPDX-License-Identifier: Apache-2.0
#include "support.hpp"
#include "tracelab/imaging.hpp"
#include "tracelab/io.hpp"
#include "tracelab/tools.hpp"

#include <doctest.h>

#include <filesystem>

using namespace tracelab;
using tracelab::testing::TempDir;
using nlohmann::json;
namespace fs = std::filesystem;

namespace
{

const Vocabulary& vocab()
{
    return Vocabulary::default_vocabulary();
}

struct Fixture
{
    TempDir dir {"tools"};
    std::shared_ptr<sim::CaseStore> store = std::make_shared<sim::CaseStore>(vocab());
    tools::Toolbox box;
    tools::EpisodeContext ctx;

    explicit Fixture(std::vector<std::string> forced = {"Pleural effusion"})
    {
        sim::CaseConfig cfg;
        for (const auto& f: forced)
            cfg.forced_pathologies.push_back(*vocab().index_of(f));
        store->add(sim::generate_case("case-a", 42, cfg, vocab()));
        box = tools::make_sim_toolbox(store, {});
        ctx.episode_id = "ep";
        ctx.case_ref = "case-a";
        ctx.artifact_root = dir.str();
        ctx.volume_path = store->volume_path("case-a", dir.str());
    }

    ToolResult call(const std::string& name, const json& args)
    {
        auto r = box.call(name, args, ctx);
        ++ctx.call_index;
        return r;
    }
};

} // namespace

TEST_CASE("default registry holds the ten tools in order")
{
    const std::vector<std::string> expected {"report_generation",
                                             "ct_vqa",
                                             "slice_vqa",
                                             "disease_classifier",
                                             "anatomy_segmentation",
                                             "effusion_segmentation",
                                             "biggest_slice_selection",
                                             "get_several_slices_from_segmentation",
                                             "extract_slices_from_ct",
                                             "windowing"};
    CHECK(tools::default_tool_names() == expected);
    Fixture f;
    REQUIRE(f.box.size() == 10);
    for (size_t i = 0; i < expected.size(); ++i)
    {
        CHECK(f.box.descriptors()[i].name == expected[i]);
        CHECK_FALSE(f.box.descriptors()[i].doc.empty());
    }
    for (const auto& d: tools::default_descriptors())
    {
        const auto back = tools::ToolDescriptor::from_mcp_json(d.to_mcp_json(), d.binding);
        CHECK(back.same_contract(d));
    }
}

TEST_CASE("registry rejects duplicates")
{
    tools::Toolbox box;
    tools::ToolDescriptor d;
    d.name = "x";
    box.add(d, [](const json&, const tools::EpisodeContext&) { return ToolResult::ok("x"); });
    CHECK_THROWS_AS(box.add(d, [](const json&, const tools::EpisodeContext&) { return ToolResult::ok("y"); }), ConfigError);
}

TEST_CASE("dispatch failures are observations")
{
    Fixture f;
    auto unknown = f.call("no_such_tool", json::object());
    CHECK_FALSE(unknown.success);
    CHECK(unknown.error->find("no_such_tool") != std::string::npos);
    CHECK(to_lower(*unknown.error).find("unknown tool") != std::string::npos);

    auto missing = f.call("ct_vqa", {{"question", "Is there effusion?"}});
    CHECK_FALSE(missing.success);
    CHECK(*missing.error == "Please provide the CT volume.");

    auto noSlices = f.call("slice_vqa", {{"question", "Is there effusion?"}, {"image_paths", json::array()}});
    CHECK_FALSE(noSlices.success);
    CHECK(noSlices.error->rfind("Please provide the CT slices.", 0) == 0);

    auto badType = f.call("extract_slices_from_ct", {{"n_slices", "five"}});
    CHECK_FALSE(badType.success);

    auto badEnum = f.call("windowing", {{"input", "x.npy"}, {"preset", "brain"}});
    CHECK_FALSE(badEnum.success);

    auto escape = f.call("windowing", {{"input", "../../etc/passwd"}, {"preset", "lung"}});
    CHECK_FALSE(escape.success);
}

TEST_CASE("validation fills defaults and wraps single paths")
{
    const auto descs = tools::default_descriptors();
    const auto find = [&](const std::string& n) {
        return *std::find_if(descs.begin(), descs.end(), [&](const auto& d) { return d.name == n; });
    };
    auto ok = tools::Toolbox::validate(find("extract_slices_from_ct"), json::object());
    REQUIRE(std::holds_alternative<json>(ok));
    CHECK(std::get<json>(ok)["n_slices"] == 5);
    CHECK(std::get<json>(ok)["direction"] == "axial");
    auto wrapped = tools::Toolbox::validate(find("windowing"), {{"input", "a.npy"}, {"preset", "lung"}});
    REQUIRE(std::holds_alternative<json>(wrapped));
    CHECK(std::get<json>(wrapped)["input"] == json::array({"a.npy"}));
    auto missing = tools::Toolbox::validate(find("biggest_slice_selection"), json::object());
    CHECK(std::holds_alternative<std::string>(missing));
}

TEST_CASE("sim tools answer from the planted case")
{
    Fixture f;
    const auto pe = *vocab().index_of("Pleural effusion");
    const auto report = f.call("report_generation", json::object());
    REQUIRE(report.success);
    CHECK(*report.text == f.store->get("case-a")->gt_report);

    const auto probs = f.call("disease_classifier", json::object());
    REQUIRE(probs.success);
    CHECK(probs.text->find("Pleural effusion: Positive") != std::string::npos);
    (void)pe;

    const auto heart = f.call("anatomy_segmentation", {{"structures", {"heart"}}});
    REQUIRE(heart.success);
    REQUIRE(heart.artifacts.size() == 1);
    CHECK(heart.artifacts[0].kind == ArtifactKind::mask);
    CHECK(heart.artifacts[0].produced_by == 2);
    CHECK(io::read_nifti_mask(f.ctx.resolve(heart.artifacts[0].path)) == f.store->get("case-a")->organs.at("heart"));

    const auto eff = f.call("effusion_segmentation", json::object());
    REQUIRE(eff.success);
    CHECK(eff.artifacts.size() == 2);

    const auto vqa = f.call("ct_vqa", {{"question", "Is there pleural effusion?"}, {"image_path", f.ctx.volume_path}});
    REQUIRE(vqa.success);
    CHECK(vqa.text->find("Pleural effusion in the") != std::string::npos);
}

TEST_CASE("slice pipeline: segmentation, biggest slice, slice VQA, windowing")
{
    Fixture f;
    const auto eff = f.call("effusion_segmentation", json::object());
    REQUIRE(eff.success);
    const auto& pleural = eff.artifacts[0].path.find("pleural") != std::string::npos ? eff.artifacts[0] : eff.artifacts[1];
    const auto big = f.call("biggest_slice_selection", {{"mask_path", pleural.path}});
    REQUIRE(big.success);
    REQUIRE(big.artifacts.size() >= 1);
    const auto mask = io::read_nifti_mask(f.ctx.resolve(pleural.path));
    const auto cc = imaging::connected_components(mask);
    CHECK(big.artifacts.size() == size_t(cc.count));

    std::vector<std::string> slices;
    for (const auto& a: big.artifacts)
        slices.push_back(a.path);
    const auto answer = f.call("slice_vqa", {{"question", "Is there pleural effusion?"}, {"image_paths", slices}});
    REQUIRE(answer.success);
    CHECK(answer.text->find("Pleural effusion in the") != std::string::npos);

    const auto win = f.call("windowing", {{"input", slices}, {"preset", "lung"}});
    REQUIRE(win.success);
    REQUIRE(win.artifacts.size() == slices.size());
    const auto img = io::read_png(f.ctx.resolve(win.artifacts[0].path));
    const auto raw = io::read_npy(f.ctx.resolve(slices[0]));
    REQUIRE(img.pixels.size() == raw.values.size());
    CHECK(img.pixels == imaging::window_slice(raw, *imaging::find_preset("lung")).pixels);

    const auto several = f.call("get_several_slices_from_segmentation", {{"mask_path", pleural.path}, {"n_slices", 2}});
    REQUIRE(several.success);
    CHECK(several.artifacts.size() <= size_t(2 * cc.count));
}

TEST_CASE("extract_slices_from_ct writes evenly spaced slices")
{
    TempDir dir("extract");
    Volume v(Dims {3, 2, 298});
    for (int z = 0; z < 298; ++z)
        for (int y = 0; y < 2; ++y)
            for (int x = 0; x < 3; ++x)
                v(x, y, z) = float(z);
    io::write_nifti(dir / "vol.nii.gz", v);
    tools::Toolbox box;
    tools::register_builtin_tools(box);
    tools::EpisodeContext ctx;
    ctx.episode_id = "ep";
    ctx.artifact_root = dir.str();
    const auto r = box.call("extract_slices_from_ct", {{"image_path", "vol.nii.gz"}}, ctx);
    REQUIRE(r.success);
    REQUIRE(r.artifacts.size() == 5);
    const std::vector<int> expected {49, 99, 149, 198, 248};
    for (size_t k = 0; k < 5; ++k)
    {
        char name[32];
        std::snprintf(name, sizeof name, "axial_slice_%03d.npy", expected[k]);
        CHECK(fs::path(r.artifacts[k].path).filename() == name);
        CHECK(io::read_npy(ctx.resolve(r.artifacts[k].path)).values.front() == float(expected[k]));
    }
    const auto tooMany = box.call("extract_slices_from_ct", {{"image_path", "vol.nii.gz"}, {"n_slices", 3}, {"direction", "sagittal"}}, ctx);
    CHECK(tooMany.success);
    const auto over = box.call("extract_slices_from_ct", {{"image_path", "vol.nii.gz"}, {"n_slices", 4}, {"direction", "sagittal"}}, ctx);
    CHECK_FALSE(over.success);
    CHECK(over.error->find("at most 3") != std::string::npos);
}

TEST_CASE("empty masks fail the region tools")
{
    TempDir dir("empty");
    io::write_nifti(dir / "vol.nii.gz", Volume(Dims {4, 4, 4}));
    io::write_nifti(dir / "mask.nii.gz", Mask(Dims {4, 4, 4}));
    tools::Toolbox box;
    tools::register_builtin_tools(box);
    tools::EpisodeContext ctx;
    ctx.artifact_root = dir.str();
    for (const auto* tool: {"biggest_slice_selection", "get_several_slices_from_segmentation"})
    {
        const auto r = box.call(tool, {{"image_path", "vol.nii.gz"}, {"mask_path", "mask.nii.gz"}}, ctx);
        CHECK_FALSE(r.success);
        CHECK(to_lower(*r.error).find("no segmented voxels") != std::string::npos);
    }
}

TEST_CASE("tool results record failures consistently")
{
    const auto ok = ToolResult::ok("t", {{"a/b.npy", ArtifactKind::slice_array, 0}});
    CHECK(ok.observation() == "t\nOutput files: a/b.npy");
    CHECK(ToolResult::from_json(ok.to_json()) == ok);
    const auto bad = ToolResult::failure("boom");
    CHECK_FALSE(bad.success);
    CHECK(ToolResult::from_json(bad.to_json()) == bad);
    json broken = ok.to_json();
    broken["error"] = "x";
    CHECK_THROWS_AS((void)ToolResult::from_json(broken), FormatError);
}
