#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "anomalycd/core.hpp"
#include "anomalycd/embedding.hpp"
#include "anomalycd/stage1.hpp"
#include "anomalycd/stage2.hpp"

namespace anomalycd {

/// Image differencing: mean over channels of |x - t1|.
inline ChangeDensityMap image_diff(const Raster& t1, const Raster& x) {
    if (!t1.same_shape(x)) throw Error("dimension mismatch");
    ChangeDensityMap out(x.height, x.width, Provenance::baseline);
    const int C = x.channels;
    for (std::size_t p = 0; p < out.values.data.size(); ++p) {
        double s = 0;
        for (int c = 0; c < C; ++c) s += std::abs(double(x.data[p * C + c]) - double(t1.data[p * C + c]));
        out.values.data[p] = static_cast<float>(s / C);
    }
    return out;
}

/// Change vector analysis: Euclidean magnitude of the per-pixel channel difference.
inline ChangeDensityMap cva(const Raster& t1, const Raster& x) {
    if (!t1.same_shape(x)) throw Error("dimension mismatch");
    ChangeDensityMap out(x.height, x.width, Provenance::baseline);
    const int C = x.channels;
    for (std::size_t p = 0; p < out.values.data.size(); ++p) {
        double s = 0;
        for (int c = 0; c < C; ++c) {
            const double d = double(x.data[p * C + c]) - double(t1.data[p * C + c]);
            s += d * d;
        }
        out.values.data[p] = static_cast<float>(std::sqrt(s));
    }
    return out;
}

/// Time-series CVA in embedding space for one tile: per cell, the minimum over the
/// `max_history` most recent steps of D(x(c), t_i(c)), replicated to pixel resolution.
/// max_history = 1 gives the bi-temporal embedding distance map.
inline Plane<float> ts_cva_tile(const TileStepEmbeddings& steps, Metric metric,
                                int max_history = std::numeric_limits<int>::max()) {
    if (steps.size() < 2) throw Error("insufficient time steps");
    const auto& fx = steps.back();
    const int n = static_cast<int>(std::min<std::size_t>(steps.size() - 1, static_cast<std::size_t>(max_history)));
    if (n < 1) throw Error("insufficient time steps");
    Plane<float> cells(fx.h, fx.w, 0.0f);
    for (int cy = 0; cy < fx.h; ++cy) {
        for (int cx = 0; cx < fx.w; ++cx) {
            double best = std::numeric_limits<double>::infinity();
            for (int i = 1; i <= n; ++i) {
                const auto& ft = steps[steps.size() - 1 - static_cast<std::size_t>(i)];
                if (!ft.same_grid(fx)) throw Error("grid mismatch");
                best = std::min(best, distance(fx.cell(cy, cx), ft.cell(cy, cx), metric));
            }
            cells.at(cy, cx) = static_cast<float>(best);
        }
    }
    const int s = fx.stride;
    Plane<float> out(fx.h * s, fx.w * s);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x) out.at(y, x) = cells.at(y / s, x / s);
    return out;
}

}  // namespace anomalycd
