// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "tracelab/volume.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace tracelab::io
{

// NIfTI-1 single-file images (.nii or gzip-compressed .nii.gz). Only the
// subset needed for synthetic volumes and masks is supported: 3D, scalar,
// uint8/int16/int32/float32/float64 voxels, scl_slope/scl_inter applied on read.

Volume read_nifti_volume(const std::string& path);
Mask read_nifti_mask(const std::string& path);

/// Writes float32 voxels with 1 mm isotropic spacing.
void write_nifti(const std::string& path, const Volume& v);
/// Writes uint8 voxels.
void write_nifti(const std::string& path, const Mask& m);

// NumPy .npy (format version 1.0), C order only.

Slice2D read_npy(const std::string& path);
void write_npy(const std::string& path, const Slice2D& s);

// 8-bit grayscale PNG.

struct GrayImage
{
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels; // row-major

    friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

void write_png(const std::string& path, const GrayImage& img);
GrayImage read_png(const std::string& path);

/// True for paths ending in .nii or .nii.gz.
bool is_nifti_path(const std::string& path);

} // namespace tracelab::io
