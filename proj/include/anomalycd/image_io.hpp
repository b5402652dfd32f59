#pragma once

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "anomalycd/core.hpp"

namespace anomalycd::io {

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const noexcept {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline FilePtr open_file(const std::filesystem::path& p, const char* mode) {
    FilePtr f(std::fopen(p.string().c_str(), mode));
    if (!f) throw Error("cannot open " + p.string());
    return f;
}

[[noreturn]] inline void png_error_fn(png_structp, png_const_charp msg) { throw Error(std::string("png: ") + msg); }
inline void png_warning_fn(png_structp, png_const_charp) {}

/// Decoded PNG before normalization: samples widened to 16 bits.
struct Decoded {
    int height = 0;
    int width = 0;
    int channels = 0;
    int bit_depth = 8;
    std::vector<std::uint16_t> samples;
};

inline Decoded decode_png(const std::filesystem::path& path) {
    auto f = open_file(path, "rb");
    unsigned char sig[8];
    if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
        throw Error("unsupported image format: " + path.string());

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn, png_warning_fn);
    if (!png) throw Error("png: out of memory");
    png_infop info = png_create_info_struct(png);
    struct Guard {
        png_structp* p;
        png_infop* i;
        ~Guard() { png_destroy_read_struct(p, i, nullptr); }
    } guard{&png, &info};

    png_init_io(png, f.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    const int color = png_get_color_type(png, info);
    int depth = png_get_bit_depth(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) {
        png_set_palette_to_rgb(png);
        depth = 8;
    }
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) {
        png_set_expand_gray_1_2_4_to_8(png);
        depth = 8;
    }
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (depth == 16) png_set_swap(png);  // host little-endian samples
    png_read_update_info(png, info);

    Decoded d;
    d.height = static_cast<int>(png_get_image_height(png, info));
    d.width = static_cast<int>(png_get_image_width(png, info));
    d.channels = png_get_channels(png, info);
    d.bit_depth = png_get_bit_depth(png, info);
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    std::vector<unsigned char> buf(rowbytes * static_cast<std::size_t>(d.height));
    std::vector<png_bytep> rows(static_cast<std::size_t>(d.height));
    for (int y = 0; y < d.height; ++y) rows[y] = buf.data() + rowbytes * static_cast<std::size_t>(y);
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);

    const std::size_t n = static_cast<std::size_t>(d.height) * d.width * d.channels;
    d.samples.resize(n);
    if (d.bit_depth == 16) {
        for (std::size_t i = 0; i < n; ++i)
            d.samples[i] = static_cast<std::uint16_t>(buf[2 * i] | (buf[2 * i + 1] << 8));
    } else {
        for (std::size_t i = 0; i < n; ++i) d.samples[i] = buf[i];
    }
    return d;
}

inline void encode_png(const std::filesystem::path& path, int height, int width, int color_type, int bit_depth,
                       const std::vector<std::vector<unsigned char>>& rows) {
    auto f = open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn, png_warning_fn);
    if (!png) throw Error("png: out of memory");
    png_infop info = png_create_info_struct(png);
    struct Guard {
        png_structp* p;
        png_infop* i;
        ~Guard() { png_destroy_write_struct(p, i); }
    } guard{&png, &info};

    png_init_io(png, f.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth, color_type,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (const auto& r : rows) png_write_row(png, r.data());
    png_write_end(png, nullptr);
}

inline std::uint8_t to_u8(float v) noexcept {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

}  // namespace detail

/// Reads an 8- or 16-bit PNG, normalizing intensities to [0,1]. Alpha is dropped.
inline Raster read_raster(const std::filesystem::path& path) {
    const auto d = detail::decode_png(path);
    Raster r(d.height, d.width, d.channels);
    const float scale = d.bit_depth == 16 ? 1.0f / 65535.0f : 1.0f / 255.0f;
    for (std::size_t i = 0; i < d.samples.size(); ++i) r.data[i] = static_cast<float>(d.samples[i]) * scale;
    return r;
}

/// Reads a single-channel mask; any sample above half range is foreground.
inline BinaryMap read_mask(const std::filesystem::path& path) {
    const auto d = detail::decode_png(path);
    if (d.channels != 1) throw Error("mask must be single-channel: " + path.string());
    const std::uint16_t half = d.bit_depth == 16 ? 32767 : 127;
    BinaryMap m(d.height, d.width);
    for (std::size_t i = 0; i < d.samples.size(); ++i) m.data[i] = d.samples[i] > half ? 1 : 0;
    return m;
}

/// 8-bit PNG; 1 channel -> gray, 3 -> RGB. Other channel counts keep the first channel.
inline void write_raster(const std::filesystem::path& path, const Raster& r) {
    const bool rgb = r.channels >= 3;
    const int out_c = rgb ? 3 : 1;
    std::vector<std::vector<unsigned char>> rows(static_cast<std::size_t>(r.height));
    for (int y = 0; y < r.height; ++y) {
        auto& row = rows[y];
        row.resize(static_cast<std::size_t>(r.width) * out_c);
        for (int x = 0; x < r.width; ++x)
            for (int c = 0; c < out_c; ++c) row[static_cast<std::size_t>(x) * out_c + c] = detail::to_u8(r.at(y, x, c));
    }
    detail::encode_png(path, r.height, r.width, rgb ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, 8, rows);
}

/// Ground-truth style mask: 8-bit gray, 0 / 255.
inline void write_mask(const std::filesystem::path& path, const BinaryMap& m) {
    std::vector<std::vector<unsigned char>> rows(static_cast<std::size_t>(m.height));
    for (int y = 0; y < m.height; ++y) {
        rows[y].resize(static_cast<std::size_t>(m.width));
        for (int x = 0; x < m.width; ++x) rows[y][x] = m.at(y, x) ? 255 : 0;
    }
    detail::encode_png(path, m.height, m.width, PNG_COLOR_TYPE_GRAY, 8, rows);
}

/// Packed 1-bit gray PNG (binary change / anomaly maps).
inline void write_bitmap(const std::filesystem::path& path, const BinaryMap& m) {
    std::vector<std::vector<unsigned char>> rows(static_cast<std::size_t>(m.height));
    for (int y = 0; y < m.height; ++y) {
        auto& row = rows[y];
        row.assign(static_cast<std::size_t>((m.width + 7) / 8), 0);
        for (int x = 0; x < m.width; ++x)
            if (m.at(y, x)) row[x / 8] |= static_cast<unsigned char>(0x80u >> (x % 8));
    }
    detail::encode_png(path, m.height, m.width, PNG_COLOR_TYPE_GRAY, 1, rows);
}

/// 16-bit gray label map.
inline void write_labels(const std::filesystem::path& path, const Plane<std::int32_t>& labels) {
    std::vector<std::vector<unsigned char>> rows(static_cast<std::size_t>(labels.height));
    for (int y = 0; y < labels.height; ++y) {
        auto& row = rows[y];
        row.resize(static_cast<std::size_t>(labels.width) * 2);
        for (int x = 0; x < labels.width; ++x) {
            const auto v = static_cast<std::uint16_t>(std::clamp<std::int32_t>(labels.at(y, x), 0, 65535));
            row[2 * x] = static_cast<unsigned char>(v >> 8);  // PNG is big-endian
            row[2 * x + 1] = static_cast<unsigned char>(v & 0xff);
        }
    }
    detail::encode_png(path, labels.height, labels.width, PNG_COLOR_TYPE_GRAY, 16, rows);
}

inline Plane<std::int32_t> read_labels(const std::filesystem::path& path) {
    const auto d = detail::decode_png(path);
    if (d.channels != 1) throw Error("label map must be single-channel");
    Plane<std::int32_t> out(d.height, d.width);
    for (std::size_t i = 0; i < d.samples.size(); ++i) out.data[i] = d.samples[i];
    return out;
}

}  // namespace anomalycd::io
