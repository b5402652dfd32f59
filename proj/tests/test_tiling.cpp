#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "anomalycd/tiling.hpp"
#include "test_support.hpp"

using namespace anomalycd;

namespace {

int ceil_div(int a, int b) { return (a + b - 1) / b; }

}  // namespace

TEST(PlanTiles, ExactDivisionHasNoPadding) {
    const auto tiles = plan_tiles(4096, 4096, 2048);
    ASSERT_EQ(tiles.size(), 4u);
    for (const auto& t : tiles) {
        EXPECT_EQ(t.pad_right, 0);
        EXPECT_EQ(t.pad_bottom, 0);
        EXPECT_EQ(t.size, 2048);
    }
}

TEST(PlanTiles, NonDivisibleSceneMatchesCeilModArithmetic) {
    // Oracle: ceil(H/s) rows, ceil(W/s) cols; pad = rows*s - H on the last row.
    const int H = 6160, W = 6111, s = 2048;
    const int rows = ceil_div(H, s), cols = ceil_div(W, s);
    ASSERT_EQ(rows, 4);
    ASSERT_EQ(cols, 3);
    const auto tiles = plan_tiles(H, W, s);
    ASSERT_EQ(tiles.size(), static_cast<std::size_t>(rows * cols));
    for (const auto& t : tiles) {
        const bool last_row = t.y0 == (rows - 1) * s;
        const bool last_col = t.x0 == (cols - 1) * s;
        EXPECT_EQ(t.pad_bottom, last_row ? rows * s - H : 0);
        EXPECT_EQ(t.pad_right, last_col ? cols * s - W : 0);
    }
    EXPECT_EQ(tiles.back().pad_bottom, 2032);
    EXPECT_EQ(tiles.back().pad_right, 33);
}

TEST(PlanTiles, SmallSceneIsOnePaddedTile) {
    const auto tiles = plan_tiles(100, 100, 2048);
    ASSERT_EQ(tiles.size(), 1u);
    EXPECT_EQ(tiles[0].pad_right, 1948);
    EXPECT_EQ(tiles[0].pad_bottom, 1948);
}

TEST(PlanTiles, RejectsTinyTiles) { EXPECT_THROW(plan_tiles(100, 100, 32), ConfigError); }

TEST(PlanTiles, IsAPartition) {
    std::mt19937_64 g(3);
    for (int trial = 0; trial < 20; ++trial) {
        const int H = std::uniform_int_distribution<int>(1, 700)(g);
        const int W = std::uniform_int_distribution<int>(1, 700)(g);
        const int s = std::uniform_int_distribution<int>(64, 256)(g);
        Plane<int> hits(H, W, 0);
        for (const auto& t : plan_tiles(H, W, s))
            for (int y = t.y0; y < t.y0 + t.valid_height(); ++y)
                for (int x = t.x0; x < t.x0 + t.valid_width(); ++x) ++hits.at(y, x);
        EXPECT_TRUE(std::all_of(hits.data.begin(), hits.data.end(), [](int v) { return v == 1; }));
    }
}

TEST(ExtractTile, PaddingReplicatesEdges) {
    Raster r(3, 2, 1);
    for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 2; ++x) r.at(y, x, 0) = static_cast<float>(10 * y + x);
    const auto t = extract_tile(r, plan_tiles(3, 2, 64)[0]);
    EXPECT_EQ(t.at(0, 63, 0), 1.0f);
    EXPECT_EQ(t.at(63, 0, 0), 20.0f);
    EXPECT_EQ(t.at(63, 63, 0), 21.0f);
}

TEST(Stitch, ConstantTilesGiveConstantScene) {
    const auto plan = plan_tiles(256, 256, 128);
    std::vector<std::pair<TileSpec, Plane<float>>> parts;
    for (const auto& t : plan) parts.emplace_back(t, Plane<float>(128, 128, 0.5f));
    const auto out = stitch(parts, 256, 256);
    EXPECT_TRUE(std::all_of(out.data.begin(), out.data.end(), [](float v) { return v == 0.5f; }));
}

TEST(Stitch, OrderIndependent) {
    std::mt19937_64 g(11);
    const auto plan = plan_tiles(300, 200, 128);
    std::vector<std::pair<TileSpec, Plane<float>>> parts;
    for (const auto& t : plan) {
        Plane<float> p(128, 128);
        for (auto& v : p.data) v = std::uniform_real_distribution<float>(0, 1)(g);
        parts.emplace_back(t, std::move(p));
    }
    const auto a = stitch(parts, 300, 200);
    std::shuffle(parts.begin(), parts.end(), g);
    EXPECT_EQ(stitch(parts, 300, 200), a);
    EXPECT_EQ(stitch(parts), a);
}

TEST(Stitch, MissingTileIsIncompleteCoverage) {
    const auto plan = plan_tiles(256, 256, 128);
    std::vector<std::pair<TileSpec, Plane<float>>> parts;
    for (std::size_t i = 0; i + 1 < plan.size(); ++i) parts.emplace_back(plan[i], Plane<float>(128, 128));
    try {
        stitch(parts, 256, 256);
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("incomplete coverage"), std::string::npos);
    }
}

TEST(Stitch, DuplicateTileRejected) {
    const auto plan = plan_tiles(128, 256, 128);
    std::vector<std::pair<TileSpec, Plane<float>>> parts = {{plan[0], Plane<float>(128, 128)},
                                                            {plan[0], Plane<float>(128, 128)}};
    EXPECT_THROW(stitch(parts, 128, 256), Error);
}

TEST(Stitch, RasterRoundTripIsIdentity) {
    std::mt19937_64 g(5);
    for (int trial = 0; trial < 5; ++trial) {
        const int H = std::uniform_int_distribution<int>(50, 400)(g);
        const int W = std::uniform_int_distribution<int>(50, 400)(g);
        const auto r = anomalycd::testing::random_raster(g, H, W, 3);
        std::vector<std::pair<TileSpec, Raster>> parts;
        for (const auto& t : plan_tiles(H, W, 128)) parts.emplace_back(t, extract_tile(r, t));
        EXPECT_EQ(stitch(parts, H, W), r);
    }
}
