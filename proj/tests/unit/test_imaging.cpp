// SPDX-License-Identifier: Apache-2.0
#include "../oracles.hpp"
#include "support.hpp"
#include "tracelab/common.hpp"
#include "tracelab/imaging.hpp"
#include "tracelab/io.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace tracelab;
using tracelab::testing::TempDir;

TEST_CASE("window presets carry the four fixed HU windows")
{
    const std::vector<std::tuple<std::string, double, double>> expected {
        {"lung", -600, 1500}, {"bone", 300, 1500}, {"abdomen", 60, 350}, {"mediastinum", 50, 350}};
    REQUIRE(imaging::window_presets().size() == expected.size());
    for (const auto& [name, c, w]: expected)
    {
        const auto p = imaging::find_preset(name);
        REQUIRE(p);
        CHECK(p->center == c);
        CHECK(p->width == w);
    }
    CHECK_FALSE(imaging::find_preset("brain"));
}

TEST_CASE("lung window clips and normalizes single voxels")
{
    const auto lung = *imaging::find_preset("lung");
    Volume v(Dims {1, 1, 1}, 500.0f);
    CHECK(imaging::window_volume(v, lung)(0, 0, 0) == 150.0f);

    Slice2D s {1, 3, {-600.0f, -2000.0f, 1000.0f}};
    const auto img = imaging::window_slice(s, lung);
    CHECK(img.pixels == std::vector<std::uint8_t> {128, 0, 255});
}

TEST_CASE("windowing equals the clamp oracle on random volumes")
{
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial)
    {
        Volume v(Dims {7, 5, 3});
        for (auto& x: v.data())
            x = static_cast<float>(uniform01(rng) * 4000.0 - 2000.0);
        for (const auto& w: imaging::window_presets())
        {
            const auto out = imaging::window_volume(v, w);
            for (size_t i = 0; i < v.size(); ++i)
                REQUIRE(out.data()[i] == static_cast<float>(oracles::clamp_window(v.data()[i], w.center, w.width)));
            Slice2D s {5, 7, std::vector<float>(v.data().begin(), v.data().begin() + 35)};
            const auto img = imaging::window_slice(s, w);
            for (size_t i = 0; i < s.values.size(); ++i)
                REQUIRE(int(img.pixels[i]) == oracles::window_pixel(s.values[i], w.center, w.width));
        }
    }
}

TEST_CASE("full-range window leaves a volume unchanged")
{
    Volume v(Dims {3, 3, 3});
    Rng rng(2);
    for (auto& x: v.data())
        x = static_cast<float>(uniform01(rng) * 2000.0 - 1000.0);
    CHECK(imaging::window_volume(v, {"wide", 0, 4000}) == v);
    CHECK_THROWS_AS((void)imaging::window_volume(v, {"bad", 0, 0}), std::invalid_argument);
}

TEST_CASE("evenly spaced slice indices")
{
    CHECK(imaging::evenly_spaced_indices(298, 5) == std::vector<int> {49, 99, 149, 198, 248});
    CHECK(imaging::evenly_spaced_indices(10, 1) == std::vector<int> {5});
    CHECK(imaging::evenly_spaced_indices(3, 3) == std::vector<int> {0, 1, 2});
    CHECK_THROWS((void)imaging::evenly_spaced_indices(3, 4));
    CHECK_THROWS((void)imaging::evenly_spaced_indices(3, 0));
}

TEST_CASE("evenly spaced indices are in range and strictly increasing")
{
    for (int d = 1; d <= 80; ++d)
        for (int n = 1; n <= d; ++n)
        {
            const auto idx = imaging::evenly_spaced_indices(d, n);
            REQUIRE(idx.size() == size_t(n));
            for (int k = 0; k < n; ++k)
            {
                REQUIRE(idx[k] == (k + 1) * d / (n + 1));
                REQUIRE(idx[k] >= 0);
                REQUIRE(idx[k] < d);
                if (k > 0)
                    REQUIRE(idx[k] > idx[k - 1]);
            }
        }
}

TEST_CASE("equidistant indices across a region")
{
    CHECK(imaging::equidistant_indices(10, 20, 3) == std::vector<int> {10, 15, 20});
    CHECK(imaging::equidistant_indices(7, 7, 3) == std::vector<int> {7});
    CHECK(imaging::equidistant_indices(4, 9, 1) == std::vector<int> {7}); // midpoint, rounded half up
    for (int lo = 0; lo < 10; ++lo)
        for (int hi = lo; hi < 20; ++hi)
            for (int n = 2; n < 6; ++n)
            {
                const auto idx = imaging::equidistant_indices(lo, hi, n);
                REQUIRE(idx.front() == lo);
                REQUIRE(idx.back() == hi);
                REQUIRE(std::is_sorted(idx.begin(), idx.end()));
                REQUIRE(std::adjacent_find(idx.begin(), idx.end()) == idx.end());
            }
}

TEST_CASE("biggest slice of a small column")
{
    Mask m(Dims {4, 4, 5});
    m(1, 1, 2) = 1;
    m(2, 1, 2) = 1;
    m(1, 1, 3) = 1;
    const auto cc = imaging::connected_components(m);
    CHECK(cc.count == 1);
    CHECK(imaging::biggest_axial_slices(cc) == std::vector<int> {2});
}

TEST_CASE("diagonal neighbours join one component")
{
    Mask m(Dims {3, 3, 3});
    m(0, 0, 0) = 1;
    m(1, 1, 1) = 1;
    m(2, 2, 2) = 1;
    CHECK(imaging::connected_components(m).count == 1);
    Mask two(Dims {5, 1, 1});
    two(0, 0, 0) = 1;
    two(2, 0, 0) = 1;
    CHECK(imaging::connected_components(two).count == 2);
    CHECK(imaging::connected_components(Mask(Dims {2, 2, 2})).count == 0);
}

TEST_CASE("components and biggest slices agree with a flood-fill oracle")
{
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial)
    {
        const Dims d {1 + int(uniform_index(rng, 12)), 1 + int(uniform_index(rng, 12)), 1 + int(uniform_index(rng, 12))};
        const auto m = oracles::random_mask(rng, d, uniform01(rng) * 0.25);
        const auto oracle = oracles::flood_fill_slices(m);
        const auto cc = imaging::connected_components(m);
        REQUIRE(cc.count == int(oracle.size()));
        auto got = imaging::biggest_axial_slices(cc);
        std::vector<int> expected;
        for (const auto& counts: oracle)
            expected.push_back(oracles::argmax_slice(counts));
        // Both number components in raster order of their first voxel.
        REQUIRE(got == expected);
    }
}

TEST_CASE("axial extents bound each component")
{
    Mask m(Dims {6, 6, 12});
    for (int z = 2; z <= 5; ++z)
        m(1, 1, z) = 1;
    for (int z = 8; z <= 10; ++z)
        m(4, 4, z) = 1;
    const auto cc = imaging::connected_components(m);
    REQUIRE(cc.count == 2);
    auto ext = imaging::axial_extents(cc);
    std::sort(ext.begin(), ext.end());
    CHECK(ext == std::vector<std::pair<int, int>> {{2, 5}, {8, 10}});
}

TEST_CASE("NIfTI, npy and PNG round trips")
{
    TempDir dir("io");
    Rng rng(3);
    Volume v(Dims {5, 4, 3});
    for (auto& x: v.data())
        x = static_cast<float>(uniform01(rng) * 3000.0 - 1000.0);
    io::write_nifti(dir / "v.nii.gz", v);
    CHECK(io::read_nifti_volume(dir / "v.nii.gz") == v);

    Mask m(Dims {5, 4, 3});
    m(1, 2, 0) = 1;
    m(4, 3, 2) = 7;
    io::write_nifti(dir / "m.nii.gz", m);
    CHECK(io::read_nifti_mask(dir / "m.nii.gz") == m);

    const auto s = extract_slice(v, Direction::axial, 1);
    CHECK(s.rows == 4);
    CHECK(s.cols == 5);
    CHECK(s.at(2, 3) == v(3, 2, 1));
    io::write_npy(dir / "s.npy", s);
    CHECK(io::read_npy(dir / "s.npy") == s);

    io::GrayImage img {3, 2, {0, 50, 100, 150, 200, 255}};
    io::write_png(dir / "i.png", img);
    CHECK(io::read_png(dir / "i.png") == img);

    CHECK(io::is_nifti_path("a/b.nii.gz"));
    CHECK(io::is_nifti_path("b.nii"));
    CHECK_FALSE(io::is_nifti_path("b.npy"));
    CHECK_THROWS((void)io::read_npy(dir / "missing.npy"));
}

TEST_CASE("slices along each direction")
{
    Volume v(Dims {4, 3, 2});
    for (int z = 0; z < 2; ++z)
        for (int y = 0; y < 3; ++y)
            for (int x = 0; x < 4; ++x)
                v(x, y, z) = float(100 * z + 10 * y + x);
    const auto cor = extract_slice(v, Direction::coronal, 1);
    CHECK(cor.values.size() == 8);
    const auto sag = extract_slice(v, Direction::sagittal, 2);
    CHECK(sag.values.size() == 6);
    CHECK(v.extent(Direction::coronal) == 3);
    CHECK(v.extent(Direction::sagittal) == 4);
    CHECK_THROWS((void)extract_slice(v, Direction::axial, 2));
}
