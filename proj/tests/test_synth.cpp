#include <gtest/gtest.h>

#include "anomalycd/synth.hpp"
#include "test_support.hpp"

using namespace anomalycd;

TEST(Synth, SameSeedIsIdentical) {
    synth::SynthConfig c;
    c.seed = 7;
    c.size = 256;
    const auto a = synth::generate(c), b = synth::generate(c);
    EXPECT_EQ(a.scene.steps, b.scene.steps);
    EXPECT_EQ(*a.scene.gt_mask, *b.scene.gt_mask);
    EXPECT_EQ(a.manifest, b.manifest);
    c.seed = 8;
    EXPECT_NE(synth::generate(c).scene.steps, a.scene.steps);
}

TEST(Synth, ShapeAndTimestamps) {
    synth::SynthConfig c;
    c.size = 128;
    c.steps = 4;
    c.movers = 3;
    const auto g = synth::generate(c);
    ASSERT_EQ(g.scene.steps.size(), 4u);
    EXPECT_EQ(g.scene.timestamps.front(), "t00");
    EXPECT_EQ(g.scene.timestamps.back(), "t03");
    EXPECT_EQ(g.scene.height(), 128);
    EXPECT_EQ(g.scene.channels(), 3);
    for (float v : g.scene.current().data) {
        ASSERT_GE(v, 0.0f);
        ASSERT_LE(v, 1.0f);
    }
}

TEST(Synth, AnomalyMaskMatchesTruthAndBounds) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        synth::SynthConfig c;
        c.seed = seed;
        const auto g = synth::generate(c);
        const auto& a = g.truth.anomaly;
        EXPECT_GE(a.w, 24);
        EXPECT_LE(a.w, 64);
        EXPECT_GE(a.h, 24);
        EXPECT_LE(a.h, 64);
        const auto n = std::count(g.scene.gt_mask->data.begin(), g.scene.gt_mask->data.end(), 1);
        EXPECT_EQ(n, a.w * a.h);
        for (const auto& mv : g.truth.movers)
            for (const auto& p : mv.positions) EXPECT_FALSE(p.overlaps(a));
    }
}

TEST(Synth, AnomalyOnlyInLastStepAndMoversPeriodic) {
    synth::SynthConfig c;
    c.seed = 5;
    c.size = 256;
    c.steps = 6;
    c.noise_sigma = 0.0;
    c.brightness_jitter = 0.0;
    const auto g = synth::generate(c);
    const auto& a = g.truth.anomaly;
    const int cy = a.y + a.h / 2, cx = a.x + a.w / 2;
    for (int t = 0; t + 1 < c.steps; ++t)
        EXPECT_NE(g.scene.steps[t].at(cy, cx, 0), g.scene.steps.back().at(cy, cx, 0));
    int checked = 0;
    for (const auto& mv : g.truth.movers) {
        ASSERT_EQ(static_cast<int>(mv.positions.size()), mv.period);
        // Without noise or jitter, steps t and t + period are identical on the mover footprint.
        const auto& fp = mv.positions[0];
        const int y = fp.y + fp.h / 2, x = fp.x + fp.w / 2;
        bool shared = false;  // another mover may pass over this pixel on its own period
        for (const auto& other : g.truth.movers)
            if (&other != &mv)
                for (const auto& q : other.positions) shared = shared || q.contains(x, y);
        if (shared) continue;
        for (int t = 0; t + mv.period < c.steps - 1; ++t)
            for (int ch = 0; ch < 3; ++ch)
                EXPECT_EQ(g.scene.steps[t].at(y, x, ch), g.scene.steps[t + mv.period].at(y, x, ch));
        EXPECT_TRUE(mv.covers(0, x, y));
        EXPECT_TRUE(mv.covers(mv.period, x, y));
        ++checked;
    }
    EXPECT_GE(checked, 3);
}

TEST(Synth, TwoStepSceneIsFlaggedDegenerate) {
    synth::SynthConfig c;
    c.size = 128;
    c.steps = 2;
    c.movers = 2;
    const auto g = synth::generate(c);
    EXPECT_TRUE(g.manifest["stage2_degenerate"].get<bool>());
    EXPECT_EQ(g.scene.history_count(), 1);
}

TEST(Synth, InvalidConfigRejected) {
    synth::SynthConfig c;
    c.steps = 1;
    EXPECT_THROW(synth::generate(c), ConfigError);
}

TEST(Synth, WriteLoadRoundTrip) {
    anomalycd::testing::TempDir tmp("synth");
    synth::SynthConfig c;
    c.size = 64;
    c.movers = 1;
    c.anomaly_size_min = 8;
    c.anomaly_size_max = 16;
    c.mover_size_min = 4;
    c.mover_size_max = 8;
    const auto g = synth::generate(c);
    synth::write(tmp.path(), g);
    const auto s = load_scene(tmp.path());
    EXPECT_EQ(s.timestamps, g.scene.timestamps);
    EXPECT_EQ(*s.gt_mask, *g.scene.gt_mask);
    EXPECT_TRUE(std::filesystem::exists(tmp.path() / "truth.json"));
}
