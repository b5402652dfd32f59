#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string_view>
#include <vector>

#include "anomalycd/core.hpp"

namespace anomalycd {

inline constexpr int kDefaultStride = 16;

/// Dense D x h x w feature grid, cell-major (D contiguous floats per cell).
struct EmbeddingMap {
    int dim = 0;
    int h = 0;
    int w = 0;
    int stride = kDefaultStride;
    std::vector<float> data;

    EmbeddingMap() = default;
    EmbeddingMap(int d, int gh, int gw, int s)
        : dim(d), h(gh), w(gw), stride(s),
          data(static_cast<std::size_t>(d) * static_cast<std::size_t>(gh) * static_cast<std::size_t>(gw), 0.0f) {
        if (d < 1 || gh < 1 || gw < 1 || s < 1) throw Error("invalid embedding dimensions");
    }

    std::size_t cells() const noexcept { return static_cast<std::size_t>(h) * static_cast<std::size_t>(w); }
    std::span<float> cell(int cy, int cx) noexcept {
        return {data.data() + (static_cast<std::size_t>(cy) * w + cx) * dim, static_cast<std::size_t>(dim)};
    }
    std::span<const float> cell(int cy, int cx) const noexcept {
        return {data.data() + (static_cast<std::size_t>(cy) * w + cx) * dim, static_cast<std::size_t>(dim)};
    }
    std::span<const float> cell(std::size_t i) const noexcept {
        return {data.data() + i * dim, static_cast<std::size_t>(dim)};
    }
    bool same_grid(const EmbeddingMap& o) const noexcept {
        return dim == o.dim && h == o.h && w == o.w && stride == o.stride;
    }

    friend bool operator==(const EmbeddingMap&, const EmbeddingMap&) = default;
};

/// Binary membership over embedding cells.
struct GridMask {
    int h = 0;
    int w = 0;
    std::vector<std::uint8_t> bits;

    GridMask() = default;
    GridMask(int gh, int gw) : h(gh), w(gw), bits(static_cast<std::size_t>(gh) * static_cast<std::size_t>(gw), 0) {}

    bool test(int cy, int cx) const noexcept { return bits[static_cast<std::size_t>(cy) * w + cx] != 0; }
    void set(int cy, int cx) noexcept { bits[static_cast<std::size_t>(cy) * w + cx] = 1; }
    std::size_t count() const noexcept { return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), 1)); }

    friend bool operator==(const GridMask&, const GridMask&) = default;
};

enum class Metric { cosine, l1, l2 };

inline std::string_view to_string(Metric m) {
    switch (m) {
        case Metric::cosine: return "cosine";
        case Metric::l1: return "l1";
        case Metric::l2: return "l2";
    }
    return "cosine";
}

inline Metric parse_metric(std::string_view s) {
    if (s == "cosine") return Metric::cosine;
    if (s == "l1") return Metric::l1;
    if (s == "l2") return Metric::l2;
    throw ConfigError("metric", "expected cosine, l1 or l2");
}

/// Cosine distance is 1 - cos(u, v), defined as 0 when either vector is zero.
template <class A, class B>
double distance(std::span<const A> u, std::span<const B> v, Metric metric) {
    if (u.size() != v.size()) throw Error("dimension mismatch");
    switch (metric) {
        case Metric::cosine: {
            double dot = 0, nu = 0, nv = 0;
            for (std::size_t i = 0; i < u.size(); ++i) {
                dot += double(u[i]) * double(v[i]);
                nu += double(u[i]) * double(u[i]);
                nv += double(v[i]) * double(v[i]);
            }
            if (nu == 0.0 || nv == 0.0) return 0.0;
            const double c = dot / (std::sqrt(nu) * std::sqrt(nv));
            return std::clamp(1.0 - c, 0.0, 2.0);
        }
        case Metric::l1: {
            double s = 0;
            for (std::size_t i = 0; i < u.size(); ++i) s += std::abs(double(u[i]) - double(v[i]));
            return s;
        }
        case Metric::l2: {
            double s = 0;
            for (std::size_t i = 0; i < u.size(); ++i) {
                const double d = double(u[i]) - double(v[i]);
                s += d * d;
            }
            return std::sqrt(s);
        }
    }
    return 0.0;
}

inline double distance(const std::vector<double>& u, const std::vector<double>& v, Metric metric) {
    return distance(std::span<const double>(u), std::span<const double>(v), metric);
}

/// Projects a pixel mask given as a list of in-tile pixel indices (y * tile_w + x) onto the
/// cell grid. A cell is set iff at least half of its stride x stride footprint is covered;
/// if no cell qualifies, the cell holding the mask centroid is set.
inline GridMask project_pixels(std::span<const std::int32_t> pixels, int tile_h, int tile_w, int stride) {
    if (pixels.empty()) throw Error("empty mask");
    if (stride < 1 || tile_h % stride != 0 || tile_w % stride != 0) throw Error("mask not divisible by stride");
    const int gh = tile_h / stride, gw = tile_w / stride;
    std::vector<std::int32_t> counts(static_cast<std::size_t>(gh) * gw, 0);
    double sy = 0, sx = 0;
    for (const auto p : pixels) {
        const int y = p / tile_w, x = p % tile_w;
        ++counts[static_cast<std::size_t>(y / stride) * gw + x / stride];
        sy += y;
        sx += x;
    }
    GridMask gm(gh, gw);
    const int need = (stride * stride + 1) / 2;
    bool any = false;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        if (counts[i] >= need) {
            gm.bits[i] = 1;
            any = true;
        }
    }
    if (!any) {
        const auto n = static_cast<double>(pixels.size());
        const int cy = std::clamp(static_cast<int>(sy / n) / stride, 0, gh - 1);
        const int cx = std::clamp(static_cast<int>(sx / n) / stride, 0, gw - 1);
        gm.set(cy, cx);
    }
    return gm;
}

inline GridMask project_mask(const BinaryMap& mask, int stride) {
    std::vector<std::int32_t> pixels;
    for (std::size_t i = 0; i < mask.data.size(); ++i)
        if (mask.data[i]) pixels.push_back(static_cast<std::int32_t>(i));
    return project_pixels(pixels, mask.height, mask.width, stride);
}

/// Arithmetic mean of the member cells' vectors.
inline std::vector<double> mask_mean_embedding(const EmbeddingMap& emb, const GridMask& gm) {
    if (gm.h != emb.h || gm.w != emb.w) throw Error("grid mismatch");
    std::vector<double> mean(static_cast<std::size_t>(emb.dim), 0.0);
    std::size_t n = 0;
    for (std::size_t i = 0; i < gm.bits.size(); ++i) {
        if (!gm.bits[i]) continue;
        const auto v = emb.cell(i);
        for (int d = 0; d < emb.dim; ++d) mean[d] += v[d];
        ++n;
    }
    if (n == 0) throw Error("empty grid mask");
    for (auto& m : mean) m /= static_cast<double>(n);
    return mean;
}

/// Pluggable tile encoder.
class Embedder {
public:
    virtual ~Embedder() = default;
    virtual EmbeddingMap embed(const Raster& tile) const = 0;
    virtual int stride() const = 0;
};

/// Hand-crafted deterministic encoder. Per 16 px cell, over the cell footprint and again over
/// the 32 px centred context window (edge-clamped): per-channel mean, per-channel std and an
/// 8-bin unsigned gradient-orientation histogram of luminance, weighted by gradient magnitude
/// and divided by the window's pixel count. D = 2 * (2C + 8).
class ReferenceEmbedder final : public Embedder {
public:
    static constexpr int kStride = 16;
    static constexpr int kBins = 8;

    explicit ReferenceEmbedder(bool normalize = true) : normalize_(normalize) {}

    int stride() const override { return kStride; }
    static int dim_for(int channels) { return 2 * (2 * channels + kBins); }

    EmbeddingMap embed(const Raster& tile) const override {
        if (tile.height % kStride != 0 || tile.width % kStride != 0)
            throw Error("tile dimensions not divisible by stride");
        const int C = tile.channels;
        const int H = tile.height, W = tile.width;
        const int per = 2 * C + kBins;  // accumulators per 8x8 block: sum, sum of squares, bins

        // Block grid of 8 px blocks with one block of replicated border on each side.
        constexpr int B = kStride / 2;
        const int bh = H / B + 2, bw = W / B + 2;
        std::vector<double> blocks(static_cast<std::size_t>(bh) * bw * per, 0.0);

        const auto grad = gradients(tile);
        for (int by = 0; by < bh; ++by) {
            for (int bx = 0; bx < bw; ++bx) {
                double* acc = &blocks[(static_cast<std::size_t>(by) * bw + bx) * per];
                for (int yy = 0; yy < B; ++yy) {
                    const int y = std::clamp((by - 1) * B + yy, 0, H - 1);
                    for (int xx = 0; xx < B; ++xx) {
                        const int x = std::clamp((bx - 1) * B + xx, 0, W - 1);
                        const std::size_t o = tile.pixel_offset(y, x);
                        for (int c = 0; c < C; ++c) {
                            const double v = tile.data[o + c];
                            acc[c] += v;
                            acc[C + c] += v * v;
                        }
                        const std::size_t g = static_cast<std::size_t>(y) * W + x;
                        acc[2 * C + grad.bin[g]] += grad.mag[g];
                    }
                }
            }
        }

        const int gh = H / kStride, gw = W / kStride;
        EmbeddingMap out(dim_for(C), gh, gw, kStride);
        std::vector<double> sums(static_cast<std::size_t>(per));
        for (int cy = 0; cy < gh; ++cy) {
            for (int cx = 0; cx < gw; ++cx) {
                auto v = out.cell(cy, cx);
                // Footprint: blocks (2cy+1 .. 2cy+2) in padded coords; context: one more block each side.
                window_features(blocks, bw, per, 2 * cy + 1, 2 * cx + 1, 2, C, sums, v.subspan(0, per));
                window_features(blocks, bw, per, 2 * cy, 2 * cx, 4, C, sums, v.subspan(per, per));
                if (normalize_) {
                    double n2 = 0;
                    for (float f : v) n2 += double(f) * f;
                    if (n2 > 0) {
                        const double inv = 1.0 / std::sqrt(n2);
                        for (float& f : v) f = static_cast<float>(f * inv);
                    }
                }
            }
        }
        return out;
    }

private:
    struct Gradients {
        std::vector<float> mag;
        std::vector<std::uint8_t> bin;
    };

    static Gradients gradients(const Raster& tile) {
        const int H = tile.height, W = tile.width;
        std::vector<float> lum(static_cast<std::size_t>(H) * W);
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) lum[static_cast<std::size_t>(y) * W + x] = tile.luminance(y, x);
        Gradients g{std::vector<float>(lum.size()), std::vector<std::uint8_t>(lum.size())};
        auto L = [&](int y, int x) {
            return lum[static_cast<std::size_t>(std::clamp(y, 0, H - 1)) * W + std::clamp(x, 0, W - 1)];
        };
        for (int y = 0; y < H; ++y) {
            for (int x = 0; x < W; ++x) {
                const float gx = 0.5f * (L(y, x + 1) - L(y, x - 1));
                const float gy = 0.5f * (L(y + 1, x) - L(y - 1, x));
                const std::size_t i = static_cast<std::size_t>(y) * W + x;
                g.mag[i] = std::sqrt(gx * gx + gy * gy);
                g.bin[i] = orientation_bin(gx, gy);
            }
        }
        return g;
    }

public:
    /// Unsigned orientation in [0, pi) split into 8 equal bins; bin 0 holds horizontal gradients.
    static std::uint8_t orientation_bin(float gx, float gy) noexcept {
        double a = std::atan2(static_cast<double>(gy), static_cast<double>(gx));
        if (a < 0) a += std::numbers::pi;
        if (a >= std::numbers::pi) a -= std::numbers::pi;
        const int b = static_cast<int>(a / (std::numbers::pi / kBins));
        return static_cast<std::uint8_t>(std::clamp(b, 0, kBins - 1));
    }

private:
    static void window_features(const std::vector<double>& blocks, int bw, int per, int by0, int bx0, int n, int C,
                                std::vector<double>& sums, std::span<float> out) {
        std::fill(sums.begin(), sums.end(), 0.0);
        for (int by = by0; by < by0 + n; ++by)
            for (int bx = bx0; bx < bx0 + n; ++bx) {
                const double* acc = &blocks[(static_cast<std::size_t>(by) * bw + bx) * per];
                for (int k = 0; k < per; ++k) sums[k] += acc[k];
            }
        const double count = static_cast<double>(n * n * (kStride / 2) * (kStride / 2));
        for (int c = 0; c < C; ++c) {
            const double mean = sums[c] / count;
            double var = sums[C + c] / count - mean * mean;
            if (var < 1e-12) var = 0.0;  // cancellation noise on flat windows
            out[c] = static_cast<float>(mean);
            out[C + c] = static_cast<float>(std::sqrt(var));
        }
        for (int b = 0; b < kBins; ++b) out[2 * C + b] = static_cast<float>(sums[2 * C + b] / count);
    }

    bool normalize_;
};

}  // namespace anomalycd
