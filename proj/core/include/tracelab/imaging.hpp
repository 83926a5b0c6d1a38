// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "tracelab/io.hpp"
#include "tracelab/volume.hpp"

#include <optional>
#include <string>
#include <vector>

/// Pure array math behind the builtin slice and windowing tools.
namespace tracelab::imaging
{

struct WindowPreset
{
    std::string name;
    double center = 0;
    double width = 0;

    [[nodiscard]] double lower() const noexcept { return center - width / 2.0; }
    [[nodiscard]] double upper() const noexcept { return center + width / 2.0; }
};

/// lung (-600, 1500), bone (300, 1500), abdomen (60, 350), mediastinum (50, 350).
const std::vector<WindowPreset>& window_presets();
std::optional<WindowPreset> find_preset(const std::string& name);

/// Clamps every voxel to [center - width/2, center + width/2].
Volume window_volume(const Volume& v, const WindowPreset& w);

/// Clamps, maps to [0,1] and then to 0..255 with round-half-away-from-zero.
io::GrayImage window_slice(const Slice2D& s, const WindowPreset& w);

/// Axial/coronal/sagittal indices floor((k+1)*D/(n+1)) for k = 0..n-1.
/// Throws std::invalid_argument when n < 1 or n > extent.
std::vector<int> evenly_spaced_indices(int extent, int n);

/// 26-connected components of the nonzero voxels. Labels are 1..count in
/// raster order of each component's first voxel; background is 0.
struct Components
{
    LabelGrid labels;
    int count = 0;
};
Components connected_components(const Mask& mask);

/// Per component, the axial slice with the most component voxels (ties to the
/// lowest z). Entry i belongs to label i+1.
std::vector<int> biggest_axial_slices(const Components& cc);

/// Axial extent [z_lo, z_hi] of each component.
std::vector<std::pair<int, int>> axial_extents(const Components& cc);

/// Endpoint-inclusive, approximately equidistant indices in [lo, hi]:
/// lo + round(j*(hi-lo)/(n-1)); n == 1 gives the rounded midpoint. Deduplicated and
/// ascending.
std::vector<int> equidistant_indices(int lo, int hi, int n);

} // namespace tracelab::imaging
