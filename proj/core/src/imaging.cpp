// SPDX-License-Identifier: Apache-2.0
#include "tracelab/imaging.hpp"

#include "tracelab/common.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tracelab::imaging
{

const std::vector<WindowPreset>& window_presets()
{
    static const std::vector<WindowPreset> presets = {
        {"lung", -600, 1500},
        {"bone", 300, 1500},
        {"abdomen", 60, 350},
        {"mediastinum", 50, 350},
    };
    return presets;
}

std::optional<WindowPreset> find_preset(const std::string& name)
{
    const auto key = to_lower(trim(name));
    for (const auto& p: window_presets())
        if (p.name == key)
            return p;
    return std::nullopt;
}

Volume window_volume(const Volume& v, const WindowPreset& w)
{
    if (!(w.width > 0))
        throw std::invalid_argument("window width must be positive");
    const auto lo = static_cast<float>(w.lower());
    const auto hi = static_cast<float>(w.upper());
    Volume out = v;
    for (auto& x: out.data())
        x = std::clamp(x, lo, hi);
    return out;
}

io::GrayImage window_slice(const Slice2D& s, const WindowPreset& w)
{
    if (!(w.width > 0))
        throw std::invalid_argument("window width must be positive");
    const double lo = w.lower();
    const double hi = w.upper();
    io::GrayImage img {s.cols, s.rows, {}};
    img.pixels.reserve(s.values.size());
    for (float v: s.values)
    {
        const double unit = (std::clamp(static_cast<double>(v), lo, hi) - lo) / w.width;
        // std::round rounds half away from zero.
        img.pixels.push_back(static_cast<std::uint8_t>(std::round(unit * 255.0)));
    }
    return img;
}

std::vector<int> evenly_spaced_indices(int extent, int n)
{
    if (n < 1)
        throw std::invalid_argument("n_slices must be at least 1");
    if (extent < 1)
        throw std::invalid_argument("volume has no slices along the requested direction");
    if (n > extent)
        throw std::invalid_argument("n_slices (" + std::to_string(n) + ") exceeds the number of available slices (" + std::to_string(extent)
                                    + "); request at most " + std::to_string(extent));
    std::vector<int> idx;
    idx.reserve(static_cast<size_t>(n));
    for (int k = 0; k < n; ++k)
        idx.push_back(static_cast<int>((static_cast<long long>(k + 1) * extent) / (n + 1)));
    return idx;
}

namespace
{
    struct DisjointSet
    {
        std::vector<std::int32_t> parent;

        std::int32_t make()
        {
            parent.push_back(static_cast<std::int32_t>(parent.size()));
            return parent.back();
        }

        std::int32_t find(std::int32_t x)
        {
            while (parent[x] != x)
            {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            return x;
        }

        void unite(std::int32_t a, std::int32_t b)
        {
            a = find(a);
            b = find(b);
            if (a == b)
                return;
            if (a < b)
                parent[b] = a;
            else
                parent[a] = b;
        }
    };
} // namespace

Components connected_components(const Mask& mask)
{
    const auto d = mask.dims();
    LabelGrid provisional(d, 0);
    DisjointSet sets;
    sets.make(); // 0 = background

    // Two-pass labelling over the 13 already-visited neighbours.
    for (int z = 0; z < d.nz; ++z)
        for (int y = 0; y < d.ny; ++y)
            for (int x = 0; x < d.nx; ++x)
            {
                if (mask(x, y, z) == 0)
                    continue;
                std::int32_t label = 0;
                for (int dz = -1; dz <= 0; ++dz)
                    for (int dy = -1; dy <= 1; ++dy)
                        for (int dx = -1; dx <= 1; ++dx)
                        {
                            if (dz == 0 && (dy > 0 || (dy == 0 && dx >= 0)))
                                continue;
                            const int nx = x + dx;
                            const int ny = y + dy;
                            const int nz = z + dz;
                            if (!provisional.contains(nx, ny, nz))
                                continue;
                            const auto nl = provisional(nx, ny, nz);
                            if (nl == 0)
                                continue;
                            if (label == 0)
                                label = nl;
                            else
                                sets.unite(label, nl);
                        }
                provisional(x, y, z) = label != 0 ? label : sets.make();
            }

    // Relabel so that components are numbered in raster order of first voxel.
    std::vector<std::int32_t> finalLabel(sets.parent.size(), 0);
    Components out {LabelGrid(d, 0), 0};
    auto& data = out.labels.data();
    const auto& prov = provisional.data();
    for (size_t i = 0; i < prov.size(); ++i)
    {
        if (prov[i] == 0)
            continue;
        const auto root = sets.find(prov[i]);
        if (finalLabel[root] == 0)
            finalLabel[root] = ++out.count;
        data[i] = finalLabel[root];
    }
    return out;
}

std::vector<int> biggest_axial_slices(const Components& cc)
{
    const auto d = cc.labels.dims();
    std::vector<std::vector<long>> counts(static_cast<size_t>(cc.count), std::vector<long>(static_cast<size_t>(d.nz), 0));
    for (int z = 0; z < d.nz; ++z)
        for (int y = 0; y < d.ny; ++y)
            for (int x = 0; x < d.nx; ++x)
                if (auto l = cc.labels(x, y, z); l > 0)
                    ++counts[static_cast<size_t>(l - 1)][static_cast<size_t>(z)];
    std::vector<int> best;
    best.reserve(counts.size());
    for (const auto& c: counts)
        best.push_back(static_cast<int>(std::max_element(c.begin(), c.end()) - c.begin())); // first max = lowest z
    return best;
}

std::vector<std::pair<int, int>> axial_extents(const Components& cc)
{
    const auto d = cc.labels.dims();
    std::vector<std::pair<int, int>> ext(static_cast<size_t>(cc.count), {d.nz, -1});
    for (int z = 0; z < d.nz; ++z)
        for (int y = 0; y < d.ny; ++y)
            for (int x = 0; x < d.nx; ++x)
                if (auto l = cc.labels(x, y, z); l > 0)
                {
                    auto& e = ext[static_cast<size_t>(l - 1)];
                    e.first = std::min(e.first, z);
                    e.second = std::max(e.second, z);
                }
    return ext;
}

std::vector<int> equidistant_indices(int lo, int hi, int n)
{
    if (n < 1)
        throw std::invalid_argument("n_slices must be at least 1");
    if (hi < lo)
        throw std::invalid_argument("empty extent");
    std::vector<int> idx;
    if (n == 1)
        idx.push_back(lo + static_cast<int>(std::lround((hi - lo) / 2.0)));
    else
        for (int j = 0; j < n; ++j)
            idx.push_back(lo + static_cast<int>(std::lround(static_cast<double>(j) * (hi - lo) / (n - 1))));
    idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
    return idx;
}

} // namespace tracelab::imaging
