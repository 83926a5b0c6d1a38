// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace tracelab
{

/// Grid extents. x varies fastest in memory, z (axial) slowest.
struct Dims
{
    int nx = 0;
    int ny = 0;
    int nz = 0;

    [[nodiscard]] std::size_t count() const noexcept
    {
        return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) * static_cast<std::size_t>(nz);
    }

    friend bool operator==(const Dims&, const Dims&) = default;
};

enum class Direction
{
    axial,
    coronal,
    sagittal
};

std::string to_string(Direction d);
Direction direction_from_string(const std::string& s);

/// Dense 3D grid in NIfTI voxel order.
template <typename T>
class Grid3
{
  public:
    Grid3() = default;
    explicit Grid3(Dims dims, T fill = T {}): _dims(dims), _data(dims.count(), fill)
    {
        if (dims.nx <= 0 || dims.ny <= 0 || dims.nz <= 0)
            throw std::invalid_argument("grid dimensions must be positive");
    }
    Grid3(Dims dims, std::vector<T> data): _dims(dims), _data(std::move(data))
    {
        if (_data.size() != dims.count())
            throw std::invalid_argument("grid data size does not match dimensions");
    }

    [[nodiscard]] const Dims& dims() const noexcept { return _dims; }
    [[nodiscard]] std::size_t size() const noexcept { return _data.size(); }
    [[nodiscard]] bool empty() const noexcept { return _data.empty(); }

    [[nodiscard]] std::size_t index(int x, int y, int z) const noexcept
    {
        return static_cast<std::size_t>(x)
               + static_cast<std::size_t>(_dims.nx) * (static_cast<std::size_t>(y) + static_cast<std::size_t>(_dims.ny) * static_cast<std::size_t>(z));
    }

    [[nodiscard]] bool contains(int x, int y, int z) const noexcept
    {
        return x >= 0 && y >= 0 && z >= 0 && x < _dims.nx && y < _dims.ny && z < _dims.nz;
    }

    T& operator()(int x, int y, int z) noexcept { return _data[index(x, y, z)]; }
    const T& operator()(int x, int y, int z) const noexcept { return _data[index(x, y, z)]; }

    [[nodiscard]] std::vector<T>& data() noexcept { return _data; }
    [[nodiscard]] const std::vector<T>& data() const noexcept { return _data; }

    /// Extent along a viewing direction: axial slices are indexed by z,
    /// coronal by y, sagittal by x.
    [[nodiscard]] int extent(Direction d) const noexcept
    {
        switch (d)
        {
            case Direction::axial: return _dims.nz;
            case Direction::coronal: return _dims.ny;
            case Direction::sagittal: return _dims.nx;
        }
        return 0;
    }

    friend bool operator==(const Grid3&, const Grid3&) = default;

  private:
    Dims _dims {};
    std::vector<T> _data;
};

using Volume = Grid3<float>;          // intensities in HU
using Mask = Grid3<std::uint8_t>;     // binary or labeled
using LabelGrid = Grid3<std::int32_t>;

/// Row-major 2D array (rows x cols), the in-memory form of an extracted slice.
struct Slice2D
{
    int rows = 0;
    int cols = 0;
    std::vector<float> values;

    [[nodiscard]] float at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
    friend bool operator==(const Slice2D&, const Slice2D&) = default;
};

/// Extracts one slice. Axial: (ny x nx) at z; coronal: (nz x nx) at y;
/// sagittal: (nz x ny) at x.
Slice2D extract_slice(const Volume& v, Direction d, int index);

} // namespace tracelab
