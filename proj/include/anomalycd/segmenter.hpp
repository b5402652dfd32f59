#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "anomalycd/core.hpp"
#include "anomalycd/image_io.hpp"

namespace anomalycd {

struct BBox {
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // inclusive
    friend bool operator==(const BBox&, const BBox&) = default;
};

struct InstanceRecord {
    int id = 0;
    std::int64_t area = 0;
    BBox bbox;
    double stability = 0.0;
    int seed_x = 0;
    int seed_y = 0;
    friend bool operator==(const InstanceRecord&, const InstanceRecord&) = default;
};

/// Partition-style instance masks: label 0 is unassigned, 1..K are instances.
struct InstanceMaskSet {
    Plane<std::int32_t> label_map;
    std::vector<InstanceRecord> instances;

    /// Pixel index lists (y * width + x) per instance, indexed by id - 1.
    std::vector<std::vector<std::int32_t>> pixel_lists() const {
        std::vector<std::vector<std::int32_t>> out(instances.size());
        for (std::size_t i = 0; i < instances.size(); ++i) out[i].reserve(static_cast<std::size_t>(instances[i].area));
        for (std::size_t i = 0; i < label_map.data.size(); ++i) {
            const auto l = label_map.data[i];
            if (l > 0) out[static_cast<std::size_t>(l - 1)].push_back(static_cast<std::int32_t>(i));
        }
        return out;
    }
};

struct SegmentParams {
    int grid = 16;                ///< seeds per side
    std::int64_t min_area = 64;   ///< px
    double stability_min = 0.4;
    double theta = 0.08;          ///< luminance tolerance against the running region mean
    /// Seeds and growth are confined to the top-left valid_height x valid_width window
    /// (the unpadded part of an edge tile). 0 means the whole tile.
    int valid_height = 0;
    int valid_width = 0;
};

namespace detail {

class RegionGrower {
public:
    RegionGrower(const std::vector<float>& lum, int h, int w, int vh, int vw)
        : lum_(lum), h_(h), w_(w), vh_(vh), vw_(vw), visit_(lum.size(), 0) {}

    /// BFS over 4-neighbours not yet claimed; appends the region to `out`.
    void grow(int seed, double theta, const std::vector<std::int32_t>& claimed, std::vector<std::int32_t>& out) {
        ++epoch_;
        if (epoch_ == 0) {
            std::fill(visit_.begin(), visit_.end(), 0);
            epoch_ = 1;
        }
        out.clear();
        out.push_back(seed);
        visit_[seed] = epoch_;
        double sum = lum_[seed];
        for (std::size_t head = 0; head < out.size(); ++head) {
            const int p = out[head];
            const int y = p / w_, x = p % w_;
            const int nb[4][2] = {{y - 1, x}, {y + 1, x}, {y, x - 1}, {y, x + 1}};
            for (const auto& n : nb) {
                if (n[0] < 0 || n[1] < 0 || n[0] >= vh_ || n[1] >= vw_) continue;
                const int q = n[0] * w_ + n[1];
                if (visit_[q] == epoch_ || claimed[q] != 0) continue;
                const double mean = sum / static_cast<double>(out.size());
                if (std::abs(lum_[q] - mean) > theta) continue;
                visit_[q] = epoch_;
                out.push_back(q);
                sum += lum_[q];
            }
        }
    }

private:
    const std::vector<float>& lum_;
    int h_, w_, vh_, vw_;
    std::vector<std::uint32_t> visit_;
    std::uint32_t epoch_ = 0;
};

}  // namespace detail

/// Grid-seeded region growing. Each seed on an unclaimed pixel grows a region (theta),
/// scored by stability = |region(0.9 theta)| / |region(1.1 theta)|. Regions that are too
/// small or unstable are dropped but keep their pixels claimed. Kept regions are numbered
/// in raster-scan seed order.
inline InstanceMaskSet segment(const Raster& tile, const SegmentParams& params = {}) {
    if (params.grid < 1) throw ConfigError("grid", "must be >= 1");
    const int H = tile.height, W = tile.width;
    const int vh = params.valid_height > 0 ? std::min(params.valid_height, H) : H;
    const int vw = params.valid_width > 0 ? std::min(params.valid_width, W) : W;

    std::vector<float> lum(static_cast<std::size_t>(H) * W);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) lum[static_cast<std::size_t>(y) * W + x] = tile.luminance(y, x);

    // claimed: 0 = free, -1 = dropped region, k > 0 = kept instance k
    std::vector<std::int32_t> claimed(lum.size(), 0);
    detail::RegionGrower grower(lum, H, W, vh, vw);
    std::vector<std::int32_t> region, tight, loose;

    InstanceMaskSet out;
    out.label_map = Plane<std::int32_t>(H, W, 0);
    for (int gy = 0; gy < params.grid; ++gy) {
        const int sy = std::min(vh - 1, static_cast<int>((gy + 0.5) * vh / params.grid));
        for (int gx = 0; gx < params.grid; ++gx) {
            const int sx = std::min(vw - 1, static_cast<int>((gx + 0.5) * vw / params.grid));
            const int seed = sy * W + sx;
            if (claimed[seed] != 0) continue;

            grower.grow(seed, params.theta, claimed, region);
            grower.grow(seed, params.theta * 0.9, claimed, tight);
            grower.grow(seed, params.theta * 1.1, claimed, loose);
            const double stability =
                std::clamp(static_cast<double>(tight.size()) / static_cast<double>(loose.size()), 0.0, 1.0);

            const auto area = static_cast<std::int64_t>(region.size());
            if (area < params.min_area || stability < params.stability_min) {
                for (const auto p : region) claimed[p] = -1;
                continue;
            }
            InstanceRecord rec;
            rec.id = static_cast<int>(out.instances.size()) + 1;
            rec.area = area;
            rec.stability = stability;
            rec.seed_x = sx;
            rec.seed_y = sy;
            rec.bbox = {W, H, -1, -1};
            for (const auto p : region) {
                claimed[p] = rec.id;
                out.label_map.data[p] = rec.id;
                const int y = p / W, x = p % W;
                rec.bbox.x0 = std::min(rec.bbox.x0, x);
                rec.bbox.y0 = std::min(rec.bbox.y0, y);
                rec.bbox.x1 = std::max(rec.bbox.x1, x);
                rec.bbox.y1 = std::max(rec.bbox.y1, y);
            }
            out.instances.push_back(rec);
        }
    }
    return out;
}

/// Instance id at (x, y), or nullopt for an unassigned pixel.
inline std::optional<int> masks_at_pixel(const InstanceMaskSet& set, int x, int y) {
    if (x < 0 || y < 0 || x >= set.label_map.width || y >= set.label_map.height) throw Error("out of bounds");
    const auto l = set.label_map.at(y, x);
    if (l <= 0) return std::nullopt;
    return l;
}

inline nlohmann::json to_json(const InstanceRecord& r) {
    return {{"id", r.id},
            {"area", r.area},
            {"bbox", {r.bbox.x0, r.bbox.y0, r.bbox.x1, r.bbox.y1}},
            {"stability", r.stability},
            {"seed", {r.seed_x, r.seed_y}}};
}

/// Writes `<stem>.png` (16-bit label map) and `<stem>.json` (instance records).
inline void export_instances(const std::filesystem::path& stem, const InstanceMaskSet& set) {
    io::write_labels(stem.string() + ".png", set.label_map);
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : set.instances) j.push_back(to_json(r));
    std::ofstream(stem.string() + ".json") << j.dump(2) << '\n';
}

}  // namespace anomalycd
