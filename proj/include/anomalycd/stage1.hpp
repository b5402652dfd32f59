#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string_view>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "anomalycd/core.hpp"
#include "anomalycd/embedding.hpp"
#include "anomalycd/segmenter.hpp"
#include "anomalycd/tiling.hpp"

namespace anomalycd {

enum class Provenance { stage1, stage2, baseline };

/// Continuous per-pixel change / anomaly score.
struct ChangeDensityMap {
    Plane<float> values;
    Provenance provenance = Provenance::stage1;

    ChangeDensityMap() = default;
    ChangeDensityMap(int h, int w, Provenance p) : values(h, w, 0.0f), provenance(p) {}
    ChangeDensityMap(Plane<float> v, Provenance p) : values(std::move(v)), provenance(p) {}

    int height() const noexcept { return values.height; }
    int width() const noexcept { return values.width; }
};

/// Which image's segmentation the instances come from.
enum class Direction { from_T1, from_X };

inline std::string_view to_string(Direction d) { return d == Direction::from_T1 ? "from_T1" : "from_X"; }

struct CandidateInstance {
    int tile = 0;  ///< index into the scene's tile plan
    TileSpec spec;
    int instance = 0;
    Direction direction = Direction::from_X;
    double score = 0.0;
    std::vector<std::int32_t> pixels;  ///< tile-local indices, y * spec.size + x
};

/// Distance between the mean embeddings of f_t and f_x under the mask.
inline double change_score(const GridMask& m, const EmbeddingMap& f_t, const EmbeddingMap& f_x, Metric metric) {
    if (!f_t.same_grid(f_x)) throw Error("grid mismatch");
    return distance(mask_mean_embedding(f_t, m), mask_mean_embedding(f_x, m), metric);
}

struct DirectionResult {
    ChangeDensityMap density;
    std::vector<CandidateInstance> candidates;
};

/// Scores every instance of `masks` (segmented from the designated image of the pair) and
/// paints its pixels with the score. Unassigned pixels stay 0.
inline DirectionResult direction_density(const InstanceMaskSet& masks, const EmbeddingMap& f_t,
                                         const EmbeddingMap& f_x, Metric metric, Direction direction,
                                         const TileSpec& spec = {}, int tile_index = 0) {
    if (!f_t.same_grid(f_x)) throw Error("grid mismatch");
    const int H = masks.label_map.height, W = masks.label_map.width;
    DirectionResult r{ChangeDensityMap(H, W, Provenance::stage1), {}};
    auto pixel_lists = masks.pixel_lists();
    r.candidates.reserve(pixel_lists.size());
    for (std::size_t i = 0; i < pixel_lists.size(); ++i) {
        auto& px = pixel_lists[i];
        if (px.empty()) continue;
        const auto gm = project_pixels(px, H, W, f_t.stride);
        const double s = change_score(gm, f_t, f_x, metric);
        for (const auto p : px) r.density.values.data[static_cast<std::size_t>(p)] = static_cast<float>(s);
        CandidateInstance c;
        c.tile = tile_index;
        c.spec = spec;
        c.instance = masks.instances[i].id;
        c.direction = direction;
        c.score = s;
        c.pixels = std::move(px);
        r.candidates.push_back(std::move(c));
    }
    return r;
}

/// Segments the designated image, embeds both, then scores (convenience form for one tile pair).
inline DirectionResult direction_density(const Raster& tile_t, const Raster& tile_x, Direction direction,
                                         Metric metric, const Embedder& embedder,
                                         const SegmentParams& seg = {}) {
    if (!tile_t.same_shape(tile_x)) throw Error("dimension mismatch");
    const auto f_t = embedder.embed(tile_t);
    const auto f_x = embedder.embed(tile_x);
    const auto masks = segment(direction == Direction::from_T1 ? tile_t : tile_x, seg);
    TileSpec spec;
    spec.size = tile_t.height;
    return direction_density(masks, f_t, f_x, metric, direction, spec, 0);
}

/// Nearest-rank threshold: sorted_ascending[floor(q * (N - 1))].
template <class T>
T quantile_threshold(std::vector<T> values, double q) {
    if (!(q > 0.0 && q < 1.0)) throw ConfigError("quantile", "must lie in (0, 1)");
    if (values.empty()) throw Error("empty map");
    const auto k = static_cast<std::size_t>(std::floor(q * static_cast<double>(values.size() - 1)));
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k), values.end());
    return values[k];
}

/// Pixel set iff its value is strictly above the nearest-rank q threshold.
inline BinaryMap quantile_binarize(const Plane<float>& values, double q) {
    const float tau = quantile_threshold(values.data, q);
    BinaryMap out(values.height, values.width, 0);
    for (std::size_t i = 0; i < values.data.size(); ++i) out.data[i] = values.data[i] > tau ? 1 : 0;
    return out;
}

inline Plane<float> fuse_max(const ChangeDensityMap& c_t, const ChangeDensityMap& c_x) {
    if (!c_t.values.same_shape(c_x.values)) throw Error("dimension mismatch");
    Plane<float> fused(c_t.height(), c_t.width());
    for (std::size_t i = 0; i < fused.data.size(); ++i) fused.data[i] = std::max(c_t.values.data[i], c_x.values.data[i]);
    return fused;
}

/// C_b = g1(max(C_t, C_x)).
inline BinaryMap fuse_binarize(const ChangeDensityMap& c_t, const ChangeDensityMap& c_x, double q) {
    return quantile_binarize(fuse_max(c_t, c_x), q);
}

/// Candidates ordered by score descending, ties by (tile, instance, direction) ascending;
/// keeps ceil(keep_fraction * K).
inline std::vector<CandidateInstance> select_candidates(std::vector<CandidateInstance> cands, double keep_fraction) {
    if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) throw ConfigError("keep_fraction", "must lie in (0, 1]");
    std::sort(cands.begin(), cands.end(), [](const CandidateInstance& a, const CandidateInstance& b) {
        if (a.score != b.score) return a.score > b.score;
        return std::tuple(a.tile, a.instance, static_cast<int>(a.direction)) <
               std::tuple(b.tile, b.instance, static_cast<int>(b.direction));
    });
    // 1e-9 guards against 0.3 * 10 rounding up to 3.0000000000000004.
    const auto keep = static_cast<std::size_t>(std::ceil(keep_fraction * static_cast<double>(cands.size()) - 1e-9));
    cands.resize(std::min(keep, cands.size()));
    return cands;
}

inline nlohmann::json to_json(const CandidateInstance& c) {
    return {{"tile", c.tile},
            {"tile_x0", c.spec.x0},
            {"tile_y0", c.spec.y0},
            {"instance", c.instance},
            {"direction", std::string(to_string(c.direction))},
            {"score", c.score}};
}

}  // namespace anomalycd
