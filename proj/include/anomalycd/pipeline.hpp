#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "anomalycd/baselines.hpp"
#include "anomalycd/cache.hpp"
#include "anomalycd/embedding.hpp"
#include "anomalycd/metrics.hpp"
#include "anomalycd/parallel.hpp"
#include "anomalycd/scene.hpp"
#include "anomalycd/segmenter.hpp"
#include "anomalycd/stage1.hpp"
#include "anomalycd/stage2.hpp"
#include "anomalycd/tiling.hpp"

namespace anomalycd {

enum class EmbedderKind { reference, cache };

struct RunConfig {
    int tile_size = 2048;
    double quantile = 0.94;
    double keep_fraction = 0.30;
    Metric metric = Metric::cosine;
    EmbedderKind embedder = EmbedderKind::reference;
    std::filesystem::path cache_dir;
    SegmentParams segment;
    int workers = default_workers();
    double beta = 0.1;

    void validate() const {
        if (tile_size < kMinTileSize) throw ConfigError("tile_size", "must be >= 64");
        if (tile_size % kDefaultStride != 0) throw ConfigError("tile_size", "must be a multiple of 16");
        if (!(quantile > 0.0 && quantile < 1.0)) throw ConfigError("quantile", "must lie in (0, 1)");
        if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) throw ConfigError("keep_fraction", "must lie in (0, 1]");
        if (!(beta > 0.0)) throw ConfigError("beta", "must be > 0");
        if (workers < 1) throw ConfigError("workers", "must be >= 1");
        if (segment.grid < 1) throw ConfigError("grid", "must be >= 1");
        if (segment.min_area < 0) throw ConfigError("min_area", "must be >= 0");
        if (!(segment.stability_min >= 0.0 && segment.stability_min <= 1.0))
            throw ConfigError("stability_min", "must lie in [0, 1]");
        if (!(segment.theta > 0.0)) throw ConfigError("theta", "must be > 0");
        if (embedder == EmbedderKind::cache && cache_dir.empty())
            throw ConfigError("cache_dir", "required with the cache embedder");
    }

    /// Worker count is deliberately left out: it never changes results.
    nlohmann::json to_json() const {
        return {{"tile_size", tile_size},
                {"quantile", quantile},
                {"keep_fraction", keep_fraction},
                {"metric", std::string(anomalycd::to_string(metric))},
                {"embedder", embedder == EmbedderKind::reference ? "reference" : "cache"},
                {"cache_dir", cache_dir.string()},
                {"grid", segment.grid},
                {"min_area", segment.min_area},
                {"stability_min", segment.stability_min},
                {"theta", segment.theta},
                {"beta", beta}};
    }

    /// Overlays keys present in `j`; unknown keys are rejected.
    void merge_json(const nlohmann::json& j) {
        for (const auto& [key, v] : j.items()) {
            try {
                if (key == "tile_size") tile_size = v.get<int>();
                else if (key == "quantile") quantile = v.get<double>();
                else if (key == "keep_fraction") keep_fraction = v.get<double>();
                else if (key == "metric") metric = parse_metric(v.get<std::string>());
                else if (key == "embedder") {
                    const auto s = v.get<std::string>();
                    if (s == "reference") embedder = EmbedderKind::reference;
                    else if (s == "cache") embedder = EmbedderKind::cache;
                    else throw ConfigError("embedder", "expected reference or cache");
                } else if (key == "cache_dir") cache_dir = v.get<std::string>();
                else if (key == "grid") segment.grid = v.get<int>();
                else if (key == "min_area") segment.min_area = v.get<std::int64_t>();
                else if (key == "stability_min") segment.stability_min = v.get<double>();
                else if (key == "theta") segment.theta = v.get<double>();
                else if (key == "workers") workers = v.get<int>();
                else if (key == "beta") beta = v.get<double>();
                else throw ConfigError(key, "unknown configuration key");
            } catch (const nlohmann::json::exception&) {
                throw ConfigError(key, "wrong value type");
            }
        }
    }
};

/// Supplies the embedding of one tile of one scene step.
class EmbeddingSource {
public:
    virtual ~EmbeddingSource() = default;
    virtual EmbeddingMap get(const TimeSeriesScene& scene, std::size_t step, const TileSpec& spec,
                             const Raster& tile) const = 0;
};

class ReferenceSource final : public EmbeddingSource {
public:
    EmbeddingMap get(const TimeSeriesScene&, std::size_t, const TileSpec&, const Raster& tile) const override {
        return embedder_.embed(tile);
    }

private:
    ReferenceEmbedder embedder_;
};

class CacheSource final : public EmbeddingSource {
public:
    explicit CacheSource(std::filesystem::path dir) : store_(std::move(dir)) {}
    EmbeddingMap get(const TimeSeriesScene& scene, std::size_t step, const TileSpec& spec,
                     const Raster&) const override {
        if (step >= scene.timestamps.size()) throw Error("cache embedder needs step timestamps");
        return store_.load(scene.timestamps[step], spec.x0, spec.y0, spec.size);
    }

private:
    CacheEmbedderStore store_;
};

inline std::unique_ptr<EmbeddingSource> make_source(const RunConfig& cfg) {
    if (cfg.embedder == EmbedderKind::cache) return std::make_unique<CacheSource>(cfg.cache_dir);
    return std::make_unique<ReferenceSource>();
}

struct Timings {
    double stage1_ms = 0, stage2_ms = 0, total_ms = 0;
};

struct DetectResult {
    std::vector<TileSpec> tiles;
    ChangeDensityMap c_t, c_x;  ///< scene-level direction maps
    Plane<float> fused;
    BinaryMap change_map;        ///< Stage-1 C_b
    std::vector<CandidateInstance> all_candidates;
    std::vector<CandidateInstance> selected;
    /// tile -> embeddings for every scene step (oldest first); filled only for tiles that
    /// carry a selected candidate, otherwise only T1 and X are kept.
    std::vector<TileStepEmbeddings> embeddings;
    std::vector<AnomalyScoreRecord> records;
    ChangeDensityMap anomaly_density;
    BinaryMap anomaly_map;
    std::vector<std::string> warnings;
    Timings timings;
};

namespace detail {

using Clock = std::chrono::steady_clock;
inline double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

inline SegmentParams tile_segment_params(const SegmentParams& base, const TileSpec& spec) {
    SegmentParams p = base;
    p.valid_height = spec.valid_height();
    p.valid_width = spec.valid_width();
    return p;
}

}  // namespace detail

/// Stage 2 on an existing Stage-1 result, using history steps T_1..T_{n-k} (k oldest dropped).
inline void run_stage2(DetectResult& r, const TimeSeriesScene& scene, const RunConfig& cfg, int drop_oldest = 0) {
    const auto t0 = detail::Clock::now();
    const int n = scene.history_count();
    if (drop_oldest < 0 || drop_oldest > n - 1) throw Error("insufficient time steps");
    std::vector<TileStepEmbeddings> view(r.embeddings.size());
    for (std::size_t t = 0; t < r.embeddings.size(); ++t) {
        const auto& e = r.embeddings[t];
        if (e.size() == scene.steps.size()) view[t].assign(e.begin() + drop_oldest, e.end());
    }
    r.records = score_candidates(r.selected, view, cfg.metric);
    r.anomaly_density = ChangeDensityMap(paint_anomaly_scores(r.selected, r.records, scene.height(), scene.width()),
                                         Provenance::stage2);
    r.anomaly_map = quantile_binarize(r.anomaly_density.values, cfg.quantile);
    r.timings.stage2_ms += detail::ms_since(t0);
}

/// Full two-stage detection on an in-memory scene.
inline DetectResult detect(const TimeSeriesScene& scene, const RunConfig& cfg) {
    cfg.validate();
    scene.validate();
    const auto t_start = detail::Clock::now();
    const auto source = make_source(cfg);
    DetectResult r;
    if (scene.history_count() < 2) r.warnings.push_back("only one history step: Stage 2 reduces to Stage 1 distances");

    const int H = scene.height(), W = scene.width();
    r.tiles = plan_tiles(H, W, cfg.tile_size);
    const std::size_t nt = r.tiles.size();
    const std::size_t last = scene.steps.size() - 1;
    r.embeddings.assign(nt, {});

    struct TileOut {
        Plane<float> c_t, c_x;
        std::vector<CandidateInstance> cands;
    };
    std::vector<TileOut> outs(nt);
    parallel_for(nt, cfg.workers, [&](std::size_t i) {
        const auto& spec = r.tiles[i];
        const Raster tx = extract_tile(scene.steps[last], spec);
        const Raster tt = extract_tile(scene.steps[last - 1], spec);
        auto fx = source->get(scene, last, spec, tx);
        auto ft = source->get(scene, last - 1, spec, tt);
        if (!fx.same_grid(ft) || fx.h * fx.stride != spec.size) throw Error("embedding grid does not match tile");
        const auto seg = detail::tile_segment_params(cfg.segment, spec);
        auto from_t = direction_density(segment(tt, seg), ft, fx, cfg.metric, Direction::from_T1, spec, static_cast<int>(i));
        auto from_x = direction_density(segment(tx, seg), ft, fx, cfg.metric, Direction::from_X, spec, static_cast<int>(i));
        auto& o = outs[i];
        o.c_t = std::move(from_t.density.values);
        o.c_x = std::move(from_x.density.values);
        o.cands = std::move(from_t.candidates);
        for (auto& c : from_x.candidates) o.cands.push_back(std::move(c));
        TileStepEmbeddings e(scene.steps.size());
        e[last - 1] = std::move(ft);
        e[last] = std::move(fx);
        r.embeddings[i] = std::move(e);
    });

    std::vector<std::pair<TileSpec, Plane<float>>> parts_t, parts_x;
    for (std::size_t i = 0; i < nt; ++i) {
        parts_t.emplace_back(r.tiles[i], std::move(outs[i].c_t));
        parts_x.emplace_back(r.tiles[i], std::move(outs[i].c_x));
        for (auto& c : outs[i].cands) r.all_candidates.push_back(std::move(c));
    }
    r.c_t = ChangeDensityMap(stitch(parts_t, H, W), Provenance::stage1);
    r.c_x = ChangeDensityMap(stitch(parts_x, H, W), Provenance::stage1);
    r.fused = fuse_max(r.c_t, r.c_x);
    r.change_map = quantile_binarize(r.fused, cfg.quantile);
    r.selected = r.all_candidates.empty() ? std::vector<CandidateInstance>{}
                                          : select_candidates(r.all_candidates, cfg.keep_fraction);
    r.timings.stage1_ms = detail::ms_since(t_start);

    // History embeddings only where a selected candidate lives.
    const auto t2 = detail::Clock::now();
    std::vector<std::uint8_t> needed(nt, 0);
    for (const auto& c : r.selected) needed[static_cast<std::size_t>(c.tile)] = 1;
    parallel_for(nt, cfg.workers, [&](std::size_t i) {
        if (!needed[i]) {
            r.embeddings[i].clear();
            return;
        }
        for (std::size_t s = 0; s + 1 < last; ++s)
            r.embeddings[i][s] = source->get(scene, s, r.tiles[i], extract_tile(scene.steps[s], r.tiles[i]));
    });
    r.timings.stage2_ms = detail::ms_since(t2);
    run_stage2(r, scene, cfg, 0);
    r.timings.total_ms = detail::ms_since(t_start);
    return r;
}

/// Embeds every step of every tile (used by the embedding-space baselines).
inline std::vector<TileStepEmbeddings> embed_all(const TimeSeriesScene& scene, const std::vector<TileSpec>& tiles,
                                                 const RunConfig& cfg) {
    const auto source = make_source(cfg);
    std::vector<TileStepEmbeddings> out(tiles.size());
    parallel_for(tiles.size(), cfg.workers, [&](std::size_t i) {
        out[i].reserve(scene.steps.size());
        for (std::size_t s = 0; s < scene.steps.size(); ++s)
            out[i].push_back(source->get(scene, s, tiles[i], extract_tile(scene.steps[s], tiles[i])));
    });
    return out;
}

/// Scene-level time-series CVA in embedding space. max_history = 1 is the bi-temporal
/// embedding distance map.
inline ChangeDensityMap ts_cva(const TimeSeriesScene& scene, const RunConfig& cfg,
                               int max_history = std::numeric_limits<int>::max()) {
    cfg.validate();
    scene.validate();
    const auto tiles = plan_tiles(scene.height(), scene.width(), cfg.tile_size);
    const auto emb = embed_all(scene, tiles, cfg);
    std::vector<std::pair<TileSpec, Plane<float>>> parts(tiles.size());
    parallel_for(tiles.size(), cfg.workers, [&](std::size_t i) {
        parts[i] = {tiles[i], ts_cva_tile(emb[i], cfg.metric, max_history)};
    });
    return {stitch(parts, scene.height(), scene.width()), Provenance::baseline};
}

enum class BaselineKind { id, cva, ts_cva, embed_diff };

inline BaselineKind parse_baseline(std::string_view s) {
    if (s == "id") return BaselineKind::id;
    if (s == "cva") return BaselineKind::cva;
    if (s == "ts_cva") return BaselineKind::ts_cva;
    if (s == "embed_diff") return BaselineKind::embed_diff;
    throw ConfigError("baseline", "expected id, cva, ts_cva or embed_diff");
}

inline ChangeDensityMap run_baseline(const TimeSeriesScene& scene, BaselineKind kind, const RunConfig& cfg) {
    switch (kind) {
        case BaselineKind::id: return image_diff(scene.history(1), scene.current());
        case BaselineKind::cva: return cva(scene.history(1), scene.current());
        case BaselineKind::ts_cva: return ts_cva(scene, cfg);
        case BaselineKind::embed_diff: return ts_cva(scene, cfg, 1);
    }
    throw Error("unknown baseline");
}

inline EventScores evaluate_event(const TimeSeriesScene& scene, const BinaryMap& pred, double beta) {
    if (!scene.gt_mask) throw Error("scene has no ground-truth mask: " + scene.event_id);
    return {scene.event_id, scene.category, scores(confusion(pred, *scene.gt_mask), beta)};
}

}  // namespace anomalycd
