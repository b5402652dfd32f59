#pragma once

#include <algorithm>
#include <set>
#include <tuple>
#include <utility>
#include <vector>

#include "anomalycd/core.hpp"

namespace anomalycd {

/// One square, non-overlapping window of a scene. Tiles on the right/bottom
/// edge are padded by edge replication so every tile is exactly size x size.
struct TileSpec {
    int x0 = 0;
    int y0 = 0;
    int size = 2048;
    int pad_right = 0;
    int pad_bottom = 0;

    int valid_width() const noexcept { return size - pad_right; }
    int valid_height() const noexcept { return size - pad_bottom; }

    friend bool operator==(const TileSpec&, const TileSpec&) = default;
    friend bool operator<(const TileSpec& a, const TileSpec& b) noexcept {
        return std::tie(a.y0, a.x0) < std::tie(b.y0, b.x0);
    }
};

inline constexpr int kMinTileSize = 64;

/// Row-major tile plan: ceil(H/s) * ceil(W/s) tiles.
inline std::vector<TileSpec> plan_tiles(int height, int width, int tile_size) {
    if (tile_size < kMinTileSize) throw ConfigError("tile_size", "must be >= 64");
    if (height <= 0 || width <= 0) throw Error("image dimensions must be positive");
    const int rows = (height + tile_size - 1) / tile_size;
    const int cols = (width + tile_size - 1) / tile_size;
    std::vector<TileSpec> tiles;
    tiles.reserve(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols));
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            TileSpec t;
            t.x0 = c * tile_size;
            t.y0 = r * tile_size;
            t.size = tile_size;
            t.pad_right = std::max(0, t.x0 + tile_size - width);
            t.pad_bottom = std::max(0, t.y0 + tile_size - height);
            tiles.push_back(t);
        }
    }
    return tiles;
}

/// Copies a tile out of the raster, replicating the last valid row/column into the padding.
inline Raster extract_tile(const Raster& img, const TileSpec& t) {
    Raster out(t.size, t.size, img.channels);
    for (int y = 0; y < t.size; ++y) {
        const int sy = std::min(t.y0 + y, img.height - 1);
        for (int x = 0; x < t.size; ++x) {
            const int sx = std::min(t.x0 + x, img.width - 1);
            const std::size_t so = img.pixel_offset(sy, sx);
            const std::size_t d = out.pixel_offset(y, x);
            for (int c = 0; c < img.channels; ++c) out.data[d + c] = img.data[so + c];
        }
    }
    return out;
}

template <class T>
Plane<T> extract_tile(const Plane<T>& img, const TileSpec& t) {
    Plane<T> out(t.size, t.size);
    for (int y = 0; y < t.size; ++y) {
        const int sy = std::min(t.y0 + y, img.height - 1);
        for (int x = 0; x < t.size; ++x) out.at(y, x) = img.at(sy, std::min(t.x0 + x, img.width - 1));
    }
    return out;
}

namespace detail {

template <class Tile>
void check_coverage(const std::vector<std::pair<TileSpec, Tile>>& parts, int height, int width) {
    if (parts.empty()) throw Error("incomplete coverage: no tiles");
    const int size = parts.front().first.size;
    const auto plan = plan_tiles(height, width, size);
    std::set<TileSpec> expected(plan.begin(), plan.end());
    std::set<TileSpec> seen;
    for (const auto& [spec, tile] : parts) {
        if (!expected.contains(spec)) throw Error("tile does not belong to the scene plan");
        if (!seen.insert(spec).second) throw Error("duplicate tile");
        if (tile.height != spec.size || tile.width != spec.size) throw Error("tile output has wrong dimensions");
    }
    if (seen.size() != expected.size()) throw Error("incomplete coverage");
}

}  // namespace detail

/// Reassembles per-tile planes into a height x width plane, discarding padding.
/// Output does not depend on the order of `parts`.
template <class T>
Plane<T> stitch(const std::vector<std::pair<TileSpec, Plane<T>>>& parts, int height, int width) {
    detail::check_coverage(parts, height, width);
    Plane<T> out(height, width);
    for (const auto& [spec, tile] : parts) {
        for (int y = 0; y < spec.valid_height(); ++y) {
            const auto* src = tile.data.data() + tile.index(y, 0);
            std::copy(src, src + spec.valid_width(), out.data.begin() + static_cast<std::ptrdiff_t>(out.index(spec.y0 + y, spec.x0)));
        }
    }
    return out;
}

/// Infers the scene size from the tiles' unpadded footprints.
template <class T>
Plane<T> stitch(const std::vector<std::pair<TileSpec, Plane<T>>>& parts) {
    if (parts.empty()) throw Error("incomplete coverage: no tiles");
    int h = 0, w = 0;
    for (const auto& [spec, _] : parts) {
        h = std::max(h, spec.y0 + spec.valid_height());
        w = std::max(w, spec.x0 + spec.valid_width());
    }
    return stitch(parts, h, w);
}

inline Raster stitch(const std::vector<std::pair<TileSpec, Raster>>& parts, int height, int width) {
    detail::check_coverage(parts, height, width);
    const int channels = parts.front().second.channels;
    Raster out(height, width, channels);
    for (const auto& [spec, tile] : parts) {
        if (tile.channels != channels) throw Error("tile channel count mismatch");
        for (int y = 0; y < spec.valid_height(); ++y) {
            const auto* src = tile.data.data() + tile.pixel_offset(y, 0);
            std::copy(src, src + static_cast<std::ptrdiff_t>(spec.valid_width()) * channels,
                      out.data.begin() + static_cast<std::ptrdiff_t>(out.pixel_offset(spec.y0 + y, spec.x0)));
        }
    }
    return out;
}

}  // namespace anomalycd
