#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "groupreg/error.hpp"
#include "groupreg/kernels.hpp"
#include "groupreg/phantom.hpp"

using namespace groupreg;

TEST(BreathingCurve, Examples) {
    BreathingSpec b;
    b.depth_px = 0;
    for (std::size_t f = 0; f < 10; ++f) {
        EXPECT_EQ(breathing_curve(b, f).si, 0.0);
        EXPECT_EQ(breathing_curve(b, f).ap, 0.0);
    }
    b = {};
    b.depth_px = 3;
    b.period_frames = 4;
    b.hysteresis_phase = 0;
    const auto a = breathing_curve(b, 2);
    EXPECT_NEAR(a.si, 3.0, 1e-12);
    EXPECT_NEAR(a.ap, 1.2, 1e-12);
}

TEST(BreathingCurve, HigherExponentMatchesFormula) {
    BreathingSpec b{2.5, 5.0, 3, 0.4};
    for (std::size_t f = 0; f < 12; ++f) {
        const double ph = std::numbers::pi * f / 5.0;
        const double s = std::sin(ph), h = std::sin(ph + 0.4);
        const auto a = breathing_curve(b, f);
        EXPECT_NEAR(a.si, 2.5 * s * s * s * s * s * s, 1e-12);
        EXPECT_NEAR(a.ap, 0.4 * 2.5 * h * h * h * h * h * h, 1e-12);
    }
}

TEST(Anatomy, DeterministicAndStructured) {
    const auto a = anatomy(5, 96), b = anatomy(5, 96), c = anatomy(6, 96);
    EXPECT_EQ(a, b);
    EXPECT_NE(a, c);
    for (float v : a) {
        EXPECT_GE(v, 0.0f);
        EXPECT_LE(v, 1.0f);
    }
    const auto lay = anatomy_layout(5, 96, LesionSpec{});
    double blood = 0, myo = 0;
    int nb = 0, nm = 0;
    for (std::size_t i = 0; i < 96; ++i)
        for (std::size_t j = 0; j < 96; ++j) {
            const double r = std::hypot(i - lay.heart_row, j - lay.heart_col);
            if (r < lay.heart_inner - 1.5) blood += a[i * 96 + j], ++nb;
            if (r > lay.heart_inner + 1.5 && r < lay.heart_outer - 1.5) myo += a[i * 96 + j], ++nm;
        }
    EXPECT_GT(blood / nb, myo / nm);
}

TEST(Anatomy, LesionOnlyChangesEllipse) {
    const auto lay = anatomy_layout(2, 128, LesionSpec{});
    const auto with = render_anatomy(lay, 128, true), without = render_anatomy(lay, 128, false);
    int changed = 0;
    for (std::size_t i = 0; i < 128; ++i)
        for (std::size_t j = 0; j < 128; ++j) {
            if (with[i * 128 + j] == without[i * 128 + j]) continue;
            ++changed;
            // Supersamples lie within half a pixel of the centre.
            bool near = false;
            for (double dy : {-0.5, 0.5})
                for (double dx : {-0.5, 0.5}) near |= in_lesion_ellipse(lay, i + dy, j + dx);
            EXPECT_TRUE(near || in_lesion_ellipse(lay, i, j)) << i << "," << j;
        }
    EXPECT_GT(changed, 0);
}

TEST(Generate, RoundTripIsBitExact) {
    PhantomSpec spec;
    spec.size = 64;
    spec.frames = 6;
    spec.noise_snr_db = 6.0;
    const auto s = generate(spec);
    const kernels::ImageGeometry g{1, 1, 64, 64};
    for (std::size_t f = 0; f < 6; ++f) {
        std::vector<float> w(64 * 64);
        kernels::warp_bilinear_forward<float>(g, s.clean_reference, s.gt_fields[f], w);
        EXPECT_EQ(w, s.clean_frames[f]);
    }
}

TEST(Generate, NoiseMatchesNominalSnr) {
    for (double snr : {11.0, 6.0, 1.0}) {
        PhantomSpec spec;
        spec.size = 128;
        spec.frames = 5;
        spec.noise_snr_db = snr;
        spec.noise_seed = 3;
        const auto s = generate(spec);
        ASSERT_EQ(s.snr_actual_db.size(), 5u);
        for (double a : s.snr_actual_db) EXPECT_NEAR(a, snr, 0.5);
    }
}

TEST(Generate, DepthZeroGivesStaticSeries) {
    PhantomSpec spec;
    spec.size = 48;
    spec.frames = 4;
    spec.breathing.depth_px = 0;
    const auto s = generate(spec);
    for (const auto& f : s.noisy_frames) EXPECT_EQ(f, s.clean_reference);
    EXPECT_TRUE(s.snr_actual_db.empty());
}

TEST(Generate, FieldMagnitudeFollowsCurve) {
    PhantomSpec spec;
    spec.size = 64;
    spec.frames = 7;
    spec.breathing.depth_px = 4;
    const auto s = generate(spec);
    const auto lay = anatomy_layout(spec.anatomy_seed, 64, spec.lesion);
    const double sigma = 64.0 / 8;
    double got = 0, expect = 0;
    for (std::size_t f = 0; f < 7; ++f) {
        const auto a = breathing_curve(spec.breathing, f);
        for (std::size_t i = 0; i < 64; ++i)
            for (std::size_t j = 0; j < 64; ++j) {
                const double d2 = std::pow(i - lay.heart_row, 2) + std::pow(j - lay.heart_col, 2);
                const double ur = a.si * (1 + 0.25 * std::exp(-d2 / (2 * sigma * sigma)));
                expect += std::hypot(ur, a.ap);
                const std::size_t p = i * 64 + j;
                got += std::hypot(s.gt_fields[f][p], s.gt_fields[f][64 * 64 + p]);
            }
    }
    EXPECT_NEAR(got / expect, 1.0, 1e-6);
}

TEST(Generate, ZeroHysteresisStartsAtRest) {
    PhantomSpec spec;
    spec.size = 32;
    spec.frames = 3;
    spec.breathing.hysteresis_phase = 0;
    const auto s = generate(spec);
    for (float v : s.gt_fields[0]) EXPECT_EQ(v, 0.0f);
    EXPECT_EQ(s.clean_frames[0], s.clean_reference);
}

TEST(Generate, ValidatesSpec) {
    PhantomSpec spec;
    spec.frames = 1;
    EXPECT_THROW(generate(spec), ConfigError);
    spec = {};
    spec.breathing.period_frames = 0;
    EXPECT_THROW(generate(spec), ConfigError);
    spec = {};
    spec.size = 16;
    EXPECT_THROW(generate(spec), ConfigError);
}

TEST(HeartMask, CoversDisc) {
    const auto m = heart_mask(20, 20, 10, 10, 3);
    EXPECT_EQ(m[10 * 20 + 10], 1);
    EXPECT_EQ(m[10 * 20 + 14], 1);
    EXPECT_EQ(m[10 * 20 + 15], 0);
    EXPECT_EQ(m[0], 0);
}
