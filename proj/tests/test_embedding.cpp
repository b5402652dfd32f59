#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "anomalycd/embedding.hpp"
#include "test_support.hpp"

using namespace anomalycd;

namespace {

std::vector<double> random_vec(std::mt19937_64& g, int n) {
    std::normal_distribution<double> d(0.0, 1.0);
    std::vector<double> v(static_cast<std::size_t>(n));
    for (auto& x : v) x = d(g);
    return v;
}

// Direct per-pixel evaluation of one cell's unnormalized features, written independently of
// the block-sum implementation: clamp-to-edge sampling, central differences, atan2 binning.
std::vector<double> oracle_cell(const Raster& r, int cy, int cx) {
    const int H = r.height, W = r.width, C = r.channels;
    auto lum = [&](int y, int x) {
        y = std::clamp(y, 0, H - 1);
        x = std::clamp(x, 0, W - 1);
        if (C >= 3) return 0.299 * r.at(y, x, 0) + 0.587 * r.at(y, x, 1) + 0.114 * r.at(y, x, 2);
        return double(r.at(y, x, 0));
    };
    auto window = [&](int y0, int x0, int n) {
        std::vector<double> sum(C, 0), sq(C, 0), hist(8, 0);
        for (int yy = y0; yy < y0 + n; ++yy)
            for (int xx = x0; xx < x0 + n; ++xx) {
                const int y = std::clamp(yy, 0, H - 1), x = std::clamp(xx, 0, W - 1);
                for (int c = 0; c < C; ++c) {
                    sum[c] += r.at(y, x, c);
                    sq[c] += double(r.at(y, x, c)) * r.at(y, x, c);
                }
                const double gx = 0.5 * (lum(y, x + 1) - lum(y, x - 1));
                const double gy = 0.5 * (lum(y + 1, x) - lum(y - 1, x));
                double a = std::atan2(gy, gx);
                if (a < 0) a += std::numbers::pi;
                if (a >= std::numbers::pi) a -= std::numbers::pi;
                const int b = std::min(7, static_cast<int>(a / (std::numbers::pi / 8)));
                hist[b] += std::hypot(gx, gy);
            }
        const double cnt = double(n) * n;
        std::vector<double> f;
        for (int c = 0; c < C; ++c) f.push_back(sum[c] / cnt);
        for (int c = 0; c < C; ++c) {
            const double m = sum[c] / cnt;
            f.push_back(std::sqrt(std::max(0.0, sq[c] / cnt - m * m)));
        }
        for (double h : hist) f.push_back(h / cnt);
        return f;
    };
    auto a = window(cy * 16, cx * 16, 16);
    const auto b = window(cy * 16 - 8, cx * 16 - 8, 32);
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

}  // namespace

TEST(Distance, CosineExamples) {
    const std::vector<double> u{1, 0}, v{0, 1}, w{2, 0}, n{-1, 0}, z{0, 0};
    EXPECT_NEAR(distance(u, v, Metric::cosine), 1.0, 1e-12);
    EXPECT_NEAR(distance(u, w, Metric::cosine), 0.0, 1e-12);
    EXPECT_NEAR(distance(u, n, Metric::cosine), 2.0, 1e-12);
    EXPECT_EQ(distance(u, z, Metric::cosine), 0.0);
}

TEST(Distance, L1L2Examples) {
    const std::vector<double> u{1, 2, 3}, v{4, 6, 3};
    EXPECT_DOUBLE_EQ(distance(u, v, Metric::l1), 7.0);
    EXPECT_DOUBLE_EQ(distance(u, v, Metric::l2), 5.0);
}

TEST(Distance, DimensionMismatchThrows) {
    EXPECT_THROW(distance(std::vector<double>{1, 2}, std::vector<double>{1}, Metric::l2), Error);
}

TEST(Distance, MetricPropertiesOnRandomVectors) {
    std::mt19937_64 g(42);
    for (int i = 0; i < 200; ++i) {
        const auto u = random_vec(g, 28), v = random_vec(g, 28);
        for (auto m : {Metric::cosine, Metric::l1, Metric::l2}) {
            const double d = distance(u, v, m);
            EXPECT_GE(d, 0.0);
            EXPECT_NEAR(d, distance(v, u, m), 1e-12);
            EXPECT_NEAR(distance(u, u, m), 0.0, 1e-9);
        }
        EXPECT_LE(distance(u, v, Metric::cosine), 2.0);
    }
}

TEST(Distance, ParseMetric) {
    EXPECT_EQ(parse_metric("l1"), Metric::l1);
    EXPECT_THROW(parse_metric("hamming"), ConfigError);
}

TEST(ProjectMask, FullMaskSetsAllCells) {
    const auto gm = project_mask(BinaryMap(64, 64, 1), 16);
    EXPECT_EQ(gm.count(), 16u);
}

TEST(ProjectMask, TinyMaskFallsBackToCentroidCell) {
    BinaryMap m(64, 64, 0);
    m.at(40, 20) = m.at(40, 21) = m.at(41, 20) = m.at(41, 21) = 1;
    const auto gm = project_mask(m, 16);
    EXPECT_EQ(gm.count(), 1u);
    EXPECT_TRUE(gm.test(2, 1));
}

TEST(ProjectMask, HalfCoverageRule) {
    // 24 x 16 rectangle at the origin: cell (0,0) fully covered, cell (0,1) half covered
    // (8 x 16 = 128 = ceil(256 / 2)) so both qualify.
    BinaryMap m(64, 64, 0);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 24; ++x) m.at(y, x) = 1;
    auto gm = project_mask(m, 16);
    EXPECT_EQ(gm.count(), 2u);
    // One pixel fewer in the second cell drops it.
    m.at(15, 23) = 0;
    gm = project_mask(m, 16);
    EXPECT_EQ(gm.count(), 1u);
}

TEST(ProjectMask, EmptyMaskThrows) { EXPECT_THROW(project_mask(BinaryMap(32, 32, 0), 16), Error); }

TEST(ProjectMask, MonotoneInMask) {
    std::mt19937_64 g(9);
    std::bernoulli_distribution b(0.5);
    for (int trial = 0; trial < 50; ++trial) {
        BinaryMap a(64, 64, 0);
        for (auto& v : a.data) v = b(g);
        BinaryMap big = a;
        for (auto& v : big.data)
            if (b(g)) v = 1;
        const auto ga = project_mask(a, 16), gb = project_mask(big, 16);
        // Only the non-fallback cells are guaranteed monotone.
        if (ga.count() > 0 && gb.count() > 0)
            for (std::size_t i = 0; i < ga.bits.size(); ++i)
                if (ga.bits[i]) {
                    int cnt = 0;
                    const int cy = int(i) / 4, cx = int(i) % 4;
                    for (int y = 0; y < 16; ++y)
                        for (int x = 0; x < 16; ++x) cnt += a.at(cy * 16 + y, cx * 16 + x);
                    if (cnt >= 128) EXPECT_TRUE(gb.bits[i]);
                }
    }
}

TEST(MaskMeanEmbedding, AveragesMemberCells) {
    EmbeddingMap e(2, 2, 2, 16);
    for (int i = 0; i < 4; ++i) {
        e.data[2 * i] = static_cast<float>(i);
        e.data[2 * i + 1] = static_cast<float>(10 * i);
    }
    GridMask gm(2, 2);
    gm.set(0, 1);
    gm.set(1, 1);
    const auto m = mask_mean_embedding(e, gm);
    EXPECT_DOUBLE_EQ(m[0], 2.0);
    EXPECT_DOUBLE_EQ(m[1], 20.0);
    EXPECT_THROW(mask_mean_embedding(e, GridMask(3, 2)), Error);
}

TEST(ReferenceEmbedder, ShapeForFullTile) {
    const auto e = ReferenceEmbedder().embed(Raster(2048, 2048, 3, 0.4f));
    EXPECT_EQ(e.h, 128);
    EXPECT_EQ(e.w, 128);
    EXPECT_EQ(e.dim, 28);
    EXPECT_EQ(e.stride, 16);
}

TEST(ReferenceEmbedder, RejectsIndivisibleTile) { EXPECT_THROW(ReferenceEmbedder().embed(Raster(40, 48, 3)), Error); }

TEST(ReferenceEmbedder, ConstantTileGivesIdenticalCells) {
    const auto e = ReferenceEmbedder().embed(Raster(64, 64, 3, 0.3f));
    for (std::size_t i = 1; i < e.cells(); ++i)
        EXPECT_NEAR(distance(e.cell(0), e.cell(i), Metric::l2), 0.0, 1e-6);
    // Only the six mean entries are non-zero, so each normalizes to 1/sqrt(6).
    EXPECT_NEAR(e.cell(0)[0], 1.0 / std::sqrt(6.0), 1e-6);
}

TEST(ReferenceEmbedder, MatchesPerPixelOracle) {
    std::mt19937_64 g(17);
    const auto r = anomalycd::testing::random_raster(g, 64, 80, 3);
    const auto e = ReferenceEmbedder(false).embed(r);
    for (int cy = 0; cy < e.h; ++cy)
        for (int cx = 0; cx < e.w; ++cx) {
            const auto o = oracle_cell(r, cy, cx);
            const auto c = e.cell(cy, cx);
            ASSERT_EQ(o.size(), c.size());
            for (std::size_t d = 0; d < o.size(); ++d) EXPECT_NEAR(c[d], o[d], 1e-5) << cy << "," << cx << " d" << d;
        }
}

TEST(ReferenceEmbedder, VerticalEdgeLandsInHorizontalGradientBin) {
    Raster r(64, 64, 1, 0.0f);
    for (int y = 0; y < 64; ++y)
        for (int x = 32; x < 64; ++x) r.at(y, x, 0) = 1.0f;
    const auto e = ReferenceEmbedder(false).embed(r);
    // Cell (1,1) footprint x in [16,32): the edge pixel x = 31 sees gx = 0.5.
    const auto c = e.cell(1, 1);
    EXPECT_NEAR(c[2 + 0], 0.5 * 16 / 256.0, 1e-6);
    for (int b = 1; b < 8; ++b) EXPECT_EQ(c[2 + b], 0.0f);
}

TEST(ReferenceEmbedder, BrighteningShiftsOnlyMeans) {
    std::mt19937_64 g(23);
    auto r = anomalycd::testing::random_raster(g, 64, 64, 3);
    for (auto& v : r.data) v *= 0.5f;
    Raster b = r;
    for (auto& v : b.data) v += 0.2f;
    const auto er = ReferenceEmbedder(false).embed(r), eb = ReferenceEmbedder(false).embed(b);
    for (std::size_t i = 0; i < er.cells(); ++i) {
        const auto u = er.cell(i), v = eb.cell(i);
        for (int half = 0; half < 2; ++half) {
            const int o = half * 14;
            for (int c = 0; c < 3; ++c) {
                EXPECT_NEAR(v[o + c] - u[o + c], 0.2, 1e-5);
                EXPECT_NEAR(v[o + 3 + c], u[o + 3 + c], 1e-4);
            }
            for (int k = 0; k < 8; ++k) EXPECT_NEAR(v[o + 6 + k], u[o + 6 + k], 1e-5);
        }
    }
}

TEST(ReferenceEmbedder, TranslationByOneStrideShiftsInteriorCells) {
    std::mt19937_64 g(31);
    const auto r = anomalycd::testing::random_raster(g, 128, 128, 3);
    Raster s(128, 128, 3);
    for (int y = 0; y < 128; ++y)
        for (int x = 0; x < 128; ++x)
            for (int c = 0; c < 3; ++c) s.at(y, x, c) = r.at(y, std::max(0, x - 16), c);
    const auto er = ReferenceEmbedder().embed(r), es = ReferenceEmbedder().embed(s);
    for (int cy = 1; cy < 7; ++cy)
        for (int cx = 2; cx < 7; ++cx)
            EXPECT_NEAR(distance(er.cell(cy, cx - 1), es.cell(cy, cx), Metric::l2), 0.0, 1e-5);
}

TEST(ReferenceEmbedder, OrientationBins) {
    EXPECT_EQ(ReferenceEmbedder::orientation_bin(1, 0), 0);
    EXPECT_EQ(ReferenceEmbedder::orientation_bin(-1, 0), 0);
    EXPECT_EQ(ReferenceEmbedder::orientation_bin(0, 1), 4);
    EXPECT_EQ(ReferenceEmbedder::orientation_bin(0, -1), 4);
    EXPECT_EQ(ReferenceEmbedder::orientation_bin(1, 1), 2);
}
