#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "anomalycd/core.hpp"
#include "anomalycd/scene.hpp"

namespace anomalycd::synth {

struct SynthConfig {
    std::uint64_t seed = 0;
    int size = 512;
    int steps = 5;
    int movers = 8;
    int mover_size_min = 12, mover_size_max = 32;
    int anomaly_size_min = 24, anomaly_size_max = 64;
    double brightness_jitter = 0.05;
    double noise_sigma = 0.01;
    double texture_amplitude = 0.3;   ///< half-range of the background lattice values
    int texture_scale = 64;           ///< px between lattice nodes
    Category category = Category::others;

    /// steps >= 2 is accepted so degenerate scenes can be produced on purpose;
    /// `stage2_degenerate()` reports them.
    void validate() const {
        if (size < 64) throw ConfigError("size", "must be >= 64");
        if (steps < 2) throw ConfigError("steps", "must be >= 2");
        if (movers < 0) throw ConfigError("movers", "must be >= 0");
        if (mover_size_min < 1 || mover_size_max < mover_size_min) throw ConfigError("mover_size", "invalid range");
        if (anomaly_size_min < 1 || anomaly_size_max < anomaly_size_min || anomaly_size_max > size)
            throw ConfigError("anomaly_size", "invalid range");
        if (brightness_jitter < 0) throw ConfigError("brightness_jitter", "must be >= 0");
        if (noise_sigma < 0) throw ConfigError("noise_sigma", "must be >= 0");
    }
    bool stage2_degenerate() const noexcept { return steps < 3; }
};

/// Minimum 1 - cos between an object's color and the background base color.
inline constexpr double kMinColorAngle = 0.05;

struct Rect {
    int x = 0, y = 0, w = 0, h = 0;
    bool overlaps(const Rect& o) const noexcept {
        return x < o.x + o.w && o.x < x + w && y < o.y + o.h && o.y < y + h;
    }
    bool contains(int px, int py) const noexcept { return px >= x && px < x + w && py >= y && py < y + h; }
};

enum class Shape { rectangle, ellipse };

struct Mover {
    Shape shape = Shape::rectangle;
    int period = 2;
    int w = 0, h = 0;
    std::array<float, 3> color{};
    std::vector<Rect> positions;  ///< footprint at step t is positions[t % period]

    const Rect& at_step(int t) const { return positions[static_cast<std::size_t>(t % period)]; }
    bool covers(int t, int px, int py) const {
        const Rect& r = at_step(t);
        if (!r.contains(px, py)) return false;
        if (shape == Shape::rectangle) return true;
        const double cx = r.x + (r.w - 1) / 2.0, cy = r.y + (r.h - 1) / 2.0;
        const double dx = (px - cx) / (r.w / 2.0), dy = (py - cy) / (r.h / 2.0);
        return dx * dx + dy * dy <= 1.0;
    }
};

struct Truth {
    std::vector<Mover> movers;
    Rect anomaly;
    std::array<float, 3> anomaly_color{};
    std::vector<double> brightness;  ///< per-step offset
};

struct Generated {
    TimeSeriesScene scene;
    Truth truth;
    nlohmann::json manifest;
};

namespace detail {

inline std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Independent stream per (seed, step, object) so draws do not depend on generation order.
inline std::mt19937_64 stream(std::uint64_t seed, std::uint64_t step, std::uint64_t object) {
    return std::mt19937_64(splitmix(splitmix(splitmix(seed) ^ step) ^ (object * 0x632be59bd9b4e019ULL)));
}

enum : std::uint64_t { kBackground = 1, kAnomaly = 2, kJitter = 3, kNoise = 4, kMoverBase = 1000 };
inline constexpr std::uint64_t kStatic = ~0ULL;

inline int uniform_int(std::mt19937_64& g, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(g); }
inline double uniform(std::mt19937_64& g, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(g);
}

inline float luma(const std::array<float, 3>& c) { return 0.299f * c[0] + 0.587f * c[1] + 0.114f * c[2]; }

/// Color whose luminance sits at least `contrast` away from the reference and whose
/// direction differs by at least `min_angle` (1 - cos) so it is not a mere shade of it.
inline std::array<float, 3> contrasting_color(std::mt19937_64& g, const std::array<float, 3>& ref, float contrast,
                                              double min_angle) {
    const float ref_luma = luma(ref);
    for (int attempt = 0; attempt < 10000; ++attempt) {
        std::array<float, 3> c{static_cast<float>(uniform(g, 0.05, 0.95)), static_cast<float>(uniform(g, 0.05, 0.95)),
                               static_cast<float>(uniform(g, 0.05, 0.95))};
        double dot = 0, nc = 0, nr = 0;
        for (int k = 0; k < 3; ++k) {
            dot += double(c[k]) * ref[k];
            nc += double(c[k]) * c[k];
            nr += double(ref[k]) * ref[k];
        }
        const double angle = 1.0 - dot / std::sqrt(nc * nr);
        if (std::abs(luma(c) - ref_luma) >= contrast && angle >= min_angle) return c;
    }
    throw Error("cannot draw a contrasting color");
}

/// Smooth texture: a coarse random lattice (one node per 64 px) bilinearly interpolated.
inline std::vector<float> background(std::uint64_t seed, int size, double amplitude, int cell,
                                     std::array<float, 3>& base) {
    auto g = stream(seed, kStatic, kBackground);
    for (auto& b : base) b = static_cast<float>(uniform(g, 0.3, 0.6));
    const int n = size / cell + 2;
    std::vector<float> lattice(static_cast<std::size_t>(n) * n * 3);
    for (auto& v : lattice) v = static_cast<float>(uniform(g, -amplitude, amplitude));
    std::vector<float> bg(static_cast<std::size_t>(size) * size * 3);
    for (int y = 0; y < size; ++y) {
        const double fy = static_cast<double>(y) / cell;
        const int iy = static_cast<int>(fy);
        const double ty = fy - iy;
        for (int x = 0; x < size; ++x) {
            const double fx = static_cast<double>(x) / cell;
            const int ix = static_cast<int>(fx);
            const double tx = fx - ix;
            for (int c = 0; c < 3; ++c) {
                auto L = [&](int yy, int xx) { return lattice[(static_cast<std::size_t>(yy) * n + xx) * 3 + c]; };
                const double v = (1 - ty) * ((1 - tx) * L(iy, ix) + tx * L(iy, ix + 1)) +
                                 ty * ((1 - tx) * L(iy + 1, ix) + tx * L(iy + 1, ix + 1));
                bg[(static_cast<std::size_t>(y) * size + x) * 3 + c] = static_cast<float>(base[c] + v);
            }
        }
    }
    return bg;
}

}  // namespace detail

/// Builds a seeded scene: smooth background, periodic movers, per-step brightness offset and
/// Gaussian noise, and one rectangular anomaly present only in the final step.
inline Generated generate(const SynthConfig& cfg) {
    cfg.validate();
    const int S = cfg.size;
    Generated out;
    Truth& truth = out.truth;

    std::array<float, 3> base{};
    const auto bg = detail::background(cfg.seed, S, cfg.texture_amplitude, cfg.texture_scale, base);

    {
        auto g = detail::stream(cfg.seed, detail::kStatic, detail::kAnomaly);
        const int w = detail::uniform_int(g, cfg.anomaly_size_min, cfg.anomaly_size_max);
        const int h = detail::uniform_int(g, cfg.anomaly_size_min, cfg.anomaly_size_max);
        truth.anomaly = {detail::uniform_int(g, 0, S - w), detail::uniform_int(g, 0, S - h), w, h};
        truth.anomaly_color = detail::contrasting_color(g, base, 0.25f, kMinColorAngle);
    }

    for (int m = 0; m < cfg.movers; ++m) {
        auto g = detail::stream(cfg.seed, detail::kStatic, detail::kMoverBase + static_cast<std::uint64_t>(m));
        Mover mv;
        mv.shape = detail::uniform_int(g, 0, 1) == 0 ? Shape::rectangle : Shape::ellipse;
        mv.period = detail::uniform_int(g, 2, 3);
        mv.w = detail::uniform_int(g, cfg.mover_size_min, std::min(cfg.mover_size_max, S));
        mv.h = detail::uniform_int(g, cfg.mover_size_min, std::min(cfg.mover_size_max, S));
        mv.color = detail::contrasting_color(g, base, 0.25f, kMinColorAngle);
        for (int k = 0; k < mv.period; ++k) {
            bool placed = false;
            for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
                Rect r{detail::uniform_int(g, 0, S - mv.w), detail::uniform_int(g, 0, S - mv.h), mv.w, mv.h};
                if (r.overlaps(truth.anomaly)) continue;
                // Distinct positions so the mover actually moves between consecutive steps.
                bool clash = false;
                for (const auto& prev : mv.positions) clash = clash || prev.overlaps(r);
                if (clash) continue;
                mv.positions.push_back(r);
                placed = true;
            }
            if (!placed) throw Error("cannot place mover " + std::to_string(m) + " without overlapping the anomaly");
        }
        truth.movers.push_back(std::move(mv));
    }

    auto& scene = out.scene;
    scene.event_id = "synth_" + std::to_string(cfg.seed);
    scene.category = cfg.category;
    const int last = cfg.steps - 1;
    for (int t = 0; t < cfg.steps; ++t) {
        auto gj = detail::stream(cfg.seed, static_cast<std::uint64_t>(t), detail::kJitter);
        const double offset = cfg.brightness_jitter > 0 ? detail::uniform(gj, -cfg.brightness_jitter, cfg.brightness_jitter) : 0.0;
        truth.brightness.push_back(offset);

        Raster r(S, S, 3);
        std::copy(bg.begin(), bg.end(), r.data.begin());
        for (const auto& mv : truth.movers) {
            const Rect& fp = mv.at_step(t);
            for (int y = fp.y; y < fp.y + fp.h; ++y)
                for (int x = fp.x; x < fp.x + fp.w; ++x)
                    if (mv.covers(t, x, y))
                        for (int c = 0; c < 3; ++c) r.at(y, x, c) = mv.color[c];
        }
        if (t == last) {
            const Rect& a = truth.anomaly;
            for (int y = a.y; y < a.y + a.h; ++y)
                for (int x = a.x; x < a.x + a.w; ++x)
                    for (int c = 0; c < 3; ++c) r.at(y, x, c) = truth.anomaly_color[c];
        }
        auto gn = detail::stream(cfg.seed, static_cast<std::uint64_t>(t), detail::kNoise);
        std::normal_distribution<double> noise(0.0, cfg.noise_sigma > 0 ? cfg.noise_sigma : 1.0);
        for (auto& v : r.data) {
            double val = v + offset;
            if (cfg.noise_sigma > 0) val += noise(gn);
            v = static_cast<float>(std::clamp(val, 0.0, 1.0));
        }
        scene.steps.push_back(std::move(r));
        char ts[32];
        std::snprintf(ts, sizeof ts, "t%02d", t);
        scene.timestamps.emplace_back(ts);
    }

    BinaryMap gt(S, S, 0);
    const Rect& a = truth.anomaly;
    for (int y = a.y; y < a.y + a.h; ++y)
        for (int x = a.x; x < a.x + a.w; ++x) gt.at(y, x) = 1;
    scene.gt_mask = std::move(gt);

    auto& j = out.manifest;
    j["seed"] = cfg.seed;
    j["size"] = S;
    j["steps"] = cfg.steps;
    j["stage2_degenerate"] = cfg.stage2_degenerate();
    j["brightness"] = truth.brightness;
    j["anomaly"] = {{"bbox", {a.x, a.y, a.w, a.h}},
                    {"polygon", {{a.x, a.y}, {a.x + a.w, a.y}, {a.x + a.w, a.y + a.h}, {a.x, a.y + a.h}}},
                    {"color", truth.anomaly_color}};
    j["movers"] = nlohmann::json::array();
    for (const auto& mv : truth.movers) {
        nlohmann::json jm;
        jm["shape"] = mv.shape == Shape::rectangle ? "rectangle" : "ellipse";
        jm["period"] = mv.period;
        jm["color"] = mv.color;
        jm["positions"] = nlohmann::json::array();
        for (const auto& p : mv.positions) jm["positions"].push_back({p.x, p.y, p.w, p.h});
        j["movers"].push_back(jm);
    }
    return out;
}

/// Scene directory (manifest.json + PNGs) plus truth.json.
inline void write(const std::filesystem::path& dir, const Generated& g) {
    write_scene(dir, g.scene);
    std::ofstream(dir / "truth.json") << g.manifest.dump(2) << '\n';
}

}  // namespace anomalycd::synth
