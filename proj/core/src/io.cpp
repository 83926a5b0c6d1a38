// SPDX-License-Identifier: Apache-2.0
#include "tracelab/io.hpp"

#include "tracelab/common.hpp"

#include <png.h>
#include <zlib.h>

#include <cstring>
#include <filesystem>
#include <memory>
#include <regex>

namespace tracelab
{

std::string to_string(Direction d)
{
    switch (d)
    {
        case Direction::axial: return "axial";
        case Direction::coronal: return "coronal";
        case Direction::sagittal: return "sagittal";
    }
    return "axial";
}

Direction direction_from_string(const std::string& s)
{
    const auto l = to_lower(trim(s));
    if (l == "axial")
        return Direction::axial;
    if (l == "coronal")
        return Direction::coronal;
    if (l == "sagittal")
        return Direction::sagittal;
    throw std::invalid_argument("unknown direction '" + s + "' (expected axial, coronal or sagittal)");
}

Slice2D extract_slice(const Volume& v, Direction d, int index)
{
    const auto& dm = v.dims();
    if (index < 0 || index >= v.extent(d))
        throw std::out_of_range("slice index out of range");
    Slice2D s;
    switch (d)
    {
        case Direction::axial:
            s.rows = dm.ny;
            s.cols = dm.nx;
            s.values.reserve(static_cast<size_t>(s.rows) * s.cols);
            for (int y = 0; y < dm.ny; ++y)
                for (int x = 0; x < dm.nx; ++x)
                    s.values.push_back(v(x, y, index));
            break;
        case Direction::coronal:
            s.rows = dm.nz;
            s.cols = dm.nx;
            s.values.reserve(static_cast<size_t>(s.rows) * s.cols);
            for (int z = 0; z < dm.nz; ++z)
                for (int x = 0; x < dm.nx; ++x)
                    s.values.push_back(v(x, index, z));
            break;
        case Direction::sagittal:
            s.rows = dm.nz;
            s.cols = dm.ny;
            s.values.reserve(static_cast<size_t>(s.rows) * s.cols);
            for (int z = 0; z < dm.nz; ++z)
                for (int y = 0; y < dm.ny; ++y)
                    s.values.push_back(v(index, y, z));
            break;
    }
    return s;
}

} // namespace tracelab

namespace tracelab::io
{

namespace
{
    constexpr int kHeaderSize = 348;
    constexpr int kVoxOffset = 352;

    enum NiftiType : std::int16_t
    {
        kUInt8 = 2,
        kInt16 = 4,
        kInt32 = 8,
        kFloat32 = 16,
        kFloat64 = 64,
        kInt8 = 256,
        kUInt16 = 512,
    };

    template <typename T>
    void put(std::vector<char>& buf, size_t offset, T value)
    {
        std::memcpy(buf.data() + offset, &value, sizeof(T));
    }

    template <typename T>
    T get(const std::string& buf, size_t offset)
    {
        T value;
        std::memcpy(&value, buf.data() + offset, sizeof(T));
        return value;
    }

    bool ends_with(const std::string& s, std::string_view suffix)
    {
        return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
    }

    /// Reads a file, transparently gunzipping it.
    std::string read_maybe_gz(const std::string& path)
    {
        gzFile f = gzopen(path.c_str(), "rb");
        if (!f)
            throw FormatError("cannot open " + path);
        std::string out;
        char buf[1 << 15];
        int n = 0;
        while ((n = gzread(f, buf, sizeof(buf))) > 0)
            out.append(buf, static_cast<size_t>(n));
        const bool failed = n < 0;
        gzclose(f);
        if (failed)
            throw FormatError("corrupt compressed stream in " + path);
        return out;
    }

    void write_maybe_gz(const std::string& path, const std::vector<char>& bytes)
    {
        auto const parent = std::filesystem::path(path).parent_path();
        if (!parent.empty())
            std::filesystem::create_directories(parent);
        if (!ends_with(path, ".gz"))
        {
            write_file(path, std::string_view(bytes.data(), bytes.size()));
            return;
        }
        // zlib's gzip header carries mtime 0, so output is byte-reproducible.
        gzFile f = gzopen(path.c_str(), "wb6");
        if (!f)
            throw FormatError("cannot write " + path);
        const int written = gzwrite(f, bytes.data(), static_cast<unsigned>(bytes.size()));
        gzclose(f);
        if (written != static_cast<int>(bytes.size()))
            throw FormatError("short write to " + path);
    }

    std::vector<char> nifti_header(Dims d, std::int16_t datatype, std::int16_t bitpix)
    {
        std::vector<char> buf(kVoxOffset, 0);
        put<std::int32_t>(buf, 0, kHeaderSize);
        put<char>(buf, 38, 'r');
        const std::int16_t dim[8] = {3, static_cast<std::int16_t>(d.nx), static_cast<std::int16_t>(d.ny), static_cast<std::int16_t>(d.nz), 1, 1, 1, 1};
        for (int i = 0; i < 8; ++i)
            put<std::int16_t>(buf, 40 + 2 * i, dim[i]);
        put<std::int16_t>(buf, 70, datatype);
        put<std::int16_t>(buf, 72, bitpix);
        const float pixdim[8] = {1, 1, 1, 1, 1, 1, 1, 1};
        for (int i = 0; i < 8; ++i)
            put<float>(buf, 76 + 4 * i, pixdim[i]);
        put<float>(buf, 108, static_cast<float>(kVoxOffset));
        put<float>(buf, 112, 1.0F);
        put<float>(buf, 116, 0.0F);
        put<char>(buf, 123, 2); // mm
        put<std::int16_t>(buf, 254, 1); // sform: scanner anatomical
        const float srow[3][4] = {{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}};
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 4; ++c)
                put<float>(buf, 280 + 16 * r + 4 * c, srow[r][c]);
        std::memcpy(buf.data() + 344, "n+1\0", 4);
        return buf;
    }

    struct RawNifti
    {
        Dims dims;
        std::vector<double> values;
    };

    RawNifti parse_nifti(const std::string& path)
    {
        const std::string bytes = read_maybe_gz(path);
        if (bytes.size() < kVoxOffset || get<std::int32_t>(bytes, 0) != kHeaderSize)
            throw FormatError("not a little-endian NIfTI-1 file: " + path);
        if (std::memcmp(bytes.data() + 344, "n+1", 3) != 0)
            throw FormatError("only single-file NIfTI (n+1) is supported: " + path);
        const auto ndim = get<std::int16_t>(bytes, 40);
        if (ndim < 3 || ndim > 4)
            throw FormatError("expected a 3D image: " + path);
        if (ndim == 4 && get<std::int16_t>(bytes, 48) > 1)
            throw FormatError("4D images are not supported: " + path);
        Dims d {get<std::int16_t>(bytes, 42), get<std::int16_t>(bytes, 44), get<std::int16_t>(bytes, 46)};
        if (d.nx <= 0 || d.ny <= 0 || d.nz <= 0)
            throw FormatError("invalid dimensions in " + path);
        const auto datatype = get<std::int16_t>(bytes, 70);
        const auto offset = static_cast<size_t>(get<float>(bytes, 108));
        float slope = get<float>(bytes, 112);
        const float inter = get<float>(bytes, 116);
        if (slope == 0.0F)
            slope = 1.0F;

        size_t width = 0;
        switch (datatype)
        {
            case kUInt8:
            case kInt8: width = 1; break;
            case kInt16:
            case kUInt16: width = 2; break;
            case kInt32:
            case kFloat32: width = 4; break;
            case kFloat64: width = 8; break;
            default: throw FormatError("unsupported NIfTI datatype " + std::to_string(datatype) + " in " + path);
        }
        if (bytes.size() < offset + width * d.count())
            throw FormatError("truncated NIfTI data in " + path);

        RawNifti raw {d, std::vector<double>(d.count())};
        const char* p = bytes.data() + offset;
        for (size_t i = 0; i < d.count(); ++i, p += width)
        {
            double v = 0;
            switch (datatype)
            {
                case kUInt8: v = static_cast<unsigned char>(*p); break;
                case kInt8: v = static_cast<signed char>(*p); break;
                case kInt16: { std::int16_t t; std::memcpy(&t, p, 2); v = t; break; }
                case kUInt16: { std::uint16_t t; std::memcpy(&t, p, 2); v = t; break; }
                case kInt32: { std::int32_t t; std::memcpy(&t, p, 4); v = t; break; }
                case kFloat32: { float t; std::memcpy(&t, p, 4); v = t; break; }
                case kFloat64: { double t; std::memcpy(&t, p, 8); v = t; break; }
                default: break;
            }
            raw.values[i] = v * slope + inter;
        }
        return raw;
    }
} // namespace

bool is_nifti_path(const std::string& path)
{
    return ends_with(path, ".nii") || ends_with(path, ".nii.gz");
}

Volume read_nifti_volume(const std::string& path)
{
    auto raw = parse_nifti(path);
    std::vector<float> data(raw.values.begin(), raw.values.end());
    return Volume(raw.dims, std::move(data));
}

Mask read_nifti_mask(const std::string& path)
{
    auto raw = parse_nifti(path);
    std::vector<std::uint8_t> data(raw.values.size());
    for (size_t i = 0; i < data.size(); ++i)
    {
        const double v = raw.values[i];
        if (v < 0 || v > 255)
            throw FormatError("mask values must fit in 0..255: " + path);
        data[i] = static_cast<std::uint8_t>(v);
    }
    return Mask(raw.dims, std::move(data));
}

void write_nifti(const std::string& path, const Volume& v)
{
    auto buf = nifti_header(v.dims(), kFloat32, 32);
    const size_t header = buf.size();
    buf.resize(header + v.size() * sizeof(float));
    std::memcpy(buf.data() + header, v.data().data(), v.size() * sizeof(float));
    write_maybe_gz(path, buf);
}

void write_nifti(const std::string& path, const Mask& m)
{
    auto buf = nifti_header(m.dims(), kUInt8, 8);
    buf.insert(buf.end(), m.data().begin(), m.data().end());
    write_maybe_gz(path, buf);
}

// ---------------------------------------------------------------------------

Slice2D read_npy(const std::string& path)
{
    const std::string bytes = read_file(path);
    if (bytes.size() < 10 || bytes.compare(0, 6, "\x93NUMPY") != 0)
        throw FormatError("not a .npy file: " + path);
    const int major = static_cast<unsigned char>(bytes[6]);
    size_t headerLen = 0;
    size_t dataStart = 0;
    if (major == 1)
    {
        headerLen = static_cast<unsigned char>(bytes[8]) | (static_cast<size_t>(static_cast<unsigned char>(bytes[9])) << 8);
        dataStart = 10 + headerLen;
    }
    else
    {
        headerLen = get<std::uint32_t>(bytes, 8);
        dataStart = 12 + headerLen;
    }
    if (bytes.size() < dataStart)
        throw FormatError("truncated .npy header: " + path);
    const std::string header = bytes.substr(dataStart - headerLen, headerLen);

    std::smatch m;
    static const std::regex descrRe(R"('descr'\s*:\s*'([<>|=])([a-z])(\d+)')");
    static const std::regex shapeRe(R"('shape'\s*:\s*\(\s*(\d+)\s*,\s*(\d+)\s*,?\s*\))");
    if (header.find("'fortran_order': True") != std::string::npos)
        throw FormatError("Fortran-ordered .npy is not supported: " + path);
    if (!std::regex_search(header, m, descrRe))
        throw FormatError("missing descr in .npy header: " + path);
    if (m[1] == ">")
        throw FormatError("big-endian .npy is not supported: " + path);
    const char kind = m[2].str()[0];
    const int width = std::stoi(m[3]);
    if (!std::regex_search(header, m, shapeRe))
        throw FormatError(".npy array must be 2D: " + path);

    Slice2D s;
    s.rows = std::stoi(m[1]);
    s.cols = std::stoi(m[2]);
    const size_t n = static_cast<size_t>(s.rows) * s.cols;
    if (bytes.size() < dataStart + n * width)
        throw FormatError("truncated .npy data: " + path);
    s.values.resize(n);
    const char* p = bytes.data() + dataStart;
    for (size_t i = 0; i < n; ++i, p += width)
    {
        double v = 0;
        if (kind == 'f' && width == 4) { float t; std::memcpy(&t, p, 4); v = t; }
        else if (kind == 'f' && width == 8) { double t; std::memcpy(&t, p, 8); v = t; }
        else if (kind == 'i' && width == 2) { std::int16_t t; std::memcpy(&t, p, 2); v = t; }
        else if (kind == 'i' && width == 4) { std::int32_t t; std::memcpy(&t, p, 4); v = t; }
        else if (kind == 'i' && width == 8) { std::int64_t t; std::memcpy(&t, p, 8); v = static_cast<double>(t); }
        else if (kind == 'u' && width == 1) { v = static_cast<unsigned char>(*p); }
        else if (kind == 'u' && width == 2) { std::uint16_t t; std::memcpy(&t, p, 2); v = t; }
        else
            throw FormatError("unsupported .npy dtype in " + path);
        s.values[i] = static_cast<float>(v);
    }
    return s;
}

void write_npy(const std::string& path, const Slice2D& s)
{
    std::string header = "{'descr': '<f4', 'fortran_order': False, 'shape': (" + std::to_string(s.rows) + ", " + std::to_string(s.cols) + "), }";
    // Pad so that magic + version + length + header is a multiple of 64, ending in '\n'.
    const size_t total = 10 + header.size() + 1;
    header.append((64 - total % 64) % 64, ' ');
    header.push_back('\n');
    std::string out = "\x93NUMPY";
    out.push_back('\x01');
    out.push_back('\x00');
    out.push_back(static_cast<char>(header.size() & 0xFF));
    out.push_back(static_cast<char>((header.size() >> 8) & 0xFF));
    out += header;
    out.append(reinterpret_cast<const char*>(s.values.data()), s.values.size() * sizeof(float));
    write_file(path, out);
}

// ---------------------------------------------------------------------------

namespace
{
    struct FileCloser
    {
        void operator()(FILE* f) const noexcept
        {
            if (f)
                std::fclose(f);
        }
    };
    using FilePtr = std::unique_ptr<FILE, FileCloser>;
} // namespace

void write_png(const std::string& path, const GrayImage& img)
{
    if (img.pixels.size() != static_cast<size_t>(img.width) * img.height)
        throw std::invalid_argument("png pixel buffer size mismatch");
    auto const parent = std::filesystem::path(path).parent_path();
    if (!parent.empty())
        std::filesystem::create_directories(parent);
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp)
        throw FormatError("cannot write " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info)
    {
        png_destroy_write_struct(&png, &info);
        throw FormatError("libpng initialisation failed");
    }
    if (setjmp(png_jmpbuf(png)))
    {
        png_destroy_write_struct(&png, &info);
        throw FormatError("libpng error while writing " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int r = 0; r < img.height; ++r)
        png_write_row(png, const_cast<png_bytep>(img.pixels.data() + static_cast<size_t>(r) * img.width));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

GrayImage read_png(const std::string& path)
{
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp)
        throw FormatError("cannot read " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info)
    {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError("libpng initialisation failed");
    }
    GrayImage img;
    if (setjmp(png_jmpbuf(png)))
    {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError("libpng error while reading " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);
    if (png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY || png_get_bit_depth(png, info) != 8)
    {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError("expected an 8-bit grayscale PNG: " + path);
    }
    img.width = static_cast<int>(png_get_image_width(png, info));
    img.height = static_cast<int>(png_get_image_height(png, info));
    img.pixels.resize(static_cast<size_t>(img.width) * img.height);
    for (int r = 0; r < img.height; ++r)
        png_read_row(png, img.pixels.data() + static_cast<size_t>(r) * img.width, nullptr);
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

} // namespace tracelab::io
