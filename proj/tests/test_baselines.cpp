#include <gtest/gtest.h>

#include <random>

#include "anomalycd/baselines.hpp"
#include "anomalycd/pipeline.hpp"
#include "anomalycd/synth.hpp"
#include "test_support.hpp"

using namespace anomalycd;

TEST(ImageDiff, IdenticalIsZero) {
    std::mt19937_64 g(1);
    const auto r = anomalycd::testing::random_raster(g, 40, 30, 3);
    const auto d = image_diff(r, r);
    for (float v : d.values.data) EXPECT_EQ(v, 0.0f);
    EXPECT_EQ(d.provenance, Provenance::baseline);
}

TEST(ImageDiff, MeanAbsoluteOverChannels) {
    Raster a(1, 1, 3), b(1, 1, 3);
    a.data = {0.1f, 0.5f, 0.9f};
    b.data = {0.4f, 0.5f, 0.3f};
    EXPECT_NEAR(image_diff(a, b).values.data[0], (0.3 + 0.0 + 0.6) / 3, 1e-6);
}

TEST(Cva, IdenticalIsZeroAndShiftIsNorm) {
    std::mt19937_64 g(2);
    auto r = anomalycd::testing::random_raster(g, 20, 20, 3);
    for (auto& v : r.data) v *= 0.5f;
    for (float v : cva(r, r).values.data) EXPECT_EQ(v, 0.0f);
    auto s = r;
    for (auto& v : s.data) v += 0.25f;
    for (float v : cva(r, s).values.data) EXPECT_NEAR(v, 0.25 * std::sqrt(3.0), 1e-6);
}

TEST(Baselines, ShapeMismatchThrows) {
    EXPECT_THROW(image_diff(Raster(2, 2, 3), Raster(2, 3, 3)), Error);
    EXPECT_THROW(cva(Raster(2, 2, 3), Raster(2, 2, 1)), Error);
}

TEST(TsCvaTile, MinimumOverHistoryPerCell) {
    std::vector<EmbeddingMap> steps(3, EmbeddingMap(1, 1, 2, 16));
    steps[0].data = {5.0f, 0.0f};  // t2
    steps[1].data = {0.0f, 3.0f};  // t1
    steps[2].data = {4.0f, 1.0f};  // x
    const auto all = ts_cva_tile(steps, Metric::l1);
    EXPECT_EQ(all.height, 16);
    EXPECT_EQ(all.width, 32);
    EXPECT_FLOAT_EQ(all.at(0, 0), 1.0f);   // min(|4-0|, |4-5|)
    EXPECT_FLOAT_EQ(all.at(15, 31), 1.0f); // min(|1-3|, |1-0|)
    const auto one = ts_cva_tile(steps, Metric::l1, 1);
    EXPECT_FLOAT_EQ(one.at(0, 0), 4.0f);
    EXPECT_FLOAT_EQ(one.at(0, 20), 2.0f);
}

TEST(TsCva, WithOneHistoryStepEqualsEmbeddingDiff) {
    synth::SynthConfig sc;
    sc.seed = 3;
    sc.size = 128;
    sc.steps = 2;
    sc.movers = 2;
    const auto g = synth::generate(sc);
    RunConfig cfg;
    cfg.tile_size = 128;
    cfg.workers = 1;
    EXPECT_EQ(run_baseline(g.scene, BaselineKind::ts_cva, cfg).values,
              run_baseline(g.scene, BaselineKind::embed_diff, cfg).values);
}

TEST(TsCva, NeverExceedsEmbeddingDiff) {
    synth::SynthConfig sc;
    sc.seed = 4;
    sc.size = 128;
    sc.movers = 3;
    const auto g = synth::generate(sc);
    RunConfig cfg;
    cfg.tile_size = 128;
    const auto a = run_baseline(g.scene, BaselineKind::ts_cva, cfg);
    const auto b = run_baseline(g.scene, BaselineKind::embed_diff, cfg);
    for (std::size_t i = 0; i < a.values.data.size(); ++i) EXPECT_LE(a.values.data[i], b.values.data[i]);
}

TEST(Baselines, ParseNames) {
    EXPECT_EQ(parse_baseline("cva"), BaselineKind::cva);
    EXPECT_THROW(parse_baseline("gan"), ConfigError);
}
