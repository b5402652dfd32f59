#pragma once

#include <algorithm>
#include <limits>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "anomalycd/core.hpp"
#include "anomalycd/embedding.hpp"
#include "anomalycd/stage1.hpp"

namespace anomalycd {

struct AnomalyScoreRecord {
    int tile = 0;
    int instance = 0;
    Direction direction = Direction::from_X;
    std::vector<double> distances;  ///< distances[i - 1] = D(x, t_i); t_1 is the most recent history step
    double s_a = 0.0;
    int argmin_step = 1;  ///< 1-based history index of the minimum
};

/// S_a = min_i D(x, t_i). A single historical match is enough to suppress a change, which is
/// why this is a minimum over per-step distances rather than a minimum of their sum.
inline AnomalyScoreRecord anomaly_score(const std::vector<double>& x, const std::vector<std::vector<double>>& history,
                                        Metric metric) {
    if (history.empty()) throw Error("empty history");
    AnomalyScoreRecord r;
    r.distances.reserve(history.size());
    r.s_a = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < history.size(); ++i) {
        const double d = distance(x, history[i], metric);
        r.distances.push_back(d);
        if (d < r.s_a) {
            r.s_a = d;
            r.argmin_step = static_cast<int>(i) + 1;
        }
    }
    return r;
}

/// Embeddings of one tile for every scene step, oldest first (same order as
/// TimeSeriesScene::steps). Empty when the tile was never embedded.
using TileStepEmbeddings = std::vector<EmbeddingMap>;

/// Scores each candidate against all history: one GridMask per candidate shared by every step,
/// x from the current step, t_1..t_n from history.
inline std::vector<AnomalyScoreRecord> score_candidates(const std::vector<CandidateInstance>& candidates,
                                                        const std::vector<TileStepEmbeddings>& tiles, Metric metric) {
    std::vector<AnomalyScoreRecord> out;
    out.reserve(candidates.size());
    for (const auto& c : candidates) {
        if (c.tile < 0 || static_cast<std::size_t>(c.tile) >= tiles.size() || tiles[c.tile].size() < 2)
            throw Error("missing embedding for candidate tile");
        const auto& steps = tiles[c.tile];
        const auto& fx = steps.back();
        const auto gm = project_pixels(c.pixels, c.spec.size, c.spec.size, fx.stride);
        const auto x = mask_mean_embedding(fx, gm);
        std::vector<std::vector<double>> history;
        history.reserve(steps.size() - 1);
        for (std::size_t i = 1; i < steps.size(); ++i) {
            const auto& ft = steps[steps.size() - 1 - i];
            if (!ft.same_grid(fx)) throw Error("missing embedding: grid mismatch across steps");
            history.push_back(mask_mean_embedding(ft, gm));
        }
        auto r = anomaly_score(x, history, metric);
        r.tile = c.tile;
        r.instance = c.instance;
        r.direction = c.direction;
        out.push_back(std::move(r));
    }
    return out;
}

/// Paints each candidate's pixels with its S_a (per-pixel max where candidates overlap).
inline Plane<float> paint_anomaly_scores(const std::vector<CandidateInstance>& candidates,
                                         const std::vector<AnomalyScoreRecord>& records, int height, int width) {
    if (candidates.size() != records.size()) throw Error("records do not match candidates");
    Plane<float> map(height, width, 0.0f);
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const auto& c = candidates[i];
        const auto v = static_cast<float>(records[i].s_a);
        for (const auto p : c.pixels) {
            const int y = c.spec.y0 + p / c.spec.size, x = c.spec.x0 + p % c.spec.size;
            if (y >= height || x >= width) continue;
            auto& dst = map.at(y, x);
            dst = std::max(dst, v);
        }
    }
    return map;
}

/// g2: nearest-rank quantile over the whole scene; pixels outside candidates are 0.
inline BinaryMap binarize_anomalies(const std::vector<CandidateInstance>& candidates,
                                    const std::vector<AnomalyScoreRecord>& records, int height, int width, double q) {
    return quantile_binarize(paint_anomaly_scores(candidates, records, height, width), q);
}

inline nlohmann::json to_json(const AnomalyScoreRecord& r) {
    return {{"candidate",
             {{"tile", r.tile}, {"instance", r.instance}, {"direction", std::string(to_string(r.direction))}}},
            {"distances", r.distances},
            {"s_a", r.s_a},
            {"argmin_step", r.argmin_step}};
}

}  // namespace anomalycd
