#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "groupreg/error.hpp"
#include "groupreg/image.hpp"
#include "groupreg/phantom.hpp"
#include "groupreg/pipeline/inference.hpp"
#include "groupreg/pipeline/model_file.hpp"
#include "groupreg/pipeline/series_store.hpp"
#include "groupreg/pipeline/training.hpp"
#include "test_support.hpp"

using namespace groupreg;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    auto p = fs::temp_directory_path() / ("groupreg_test_pipeline_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::vector<char> file_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

GeneratedSeries small_phantom(std::size_t size, std::size_t frames, std::uint64_t seed,
                              double depth = 3.0) {
    PhantomSpec spec;
    spec.size = size;
    spec.frames = frames;
    spec.anatomy_seed = seed;
    spec.breathing.depth_px = depth;
    return generate(spec);
}

std::vector<float> flat_params(RegistrationNet<float>& net) {
    std::vector<float> out;
    for (auto* p : net.parameters()) out.insert(out.end(), p->data().begin(), p->data().end());
    return out;
}

bool bit_equal(const std::vector<float>& a, const std::vector<float>& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

}  // namespace

TEST(Preprocess, CentreCropTakesMiddleRegion) {
    const std::size_t n = 256, m = 192, off = 32;
    std::vector<float> img(n * n);
    for (std::size_t i = 0; i < img.size(); ++i) img[i] = static_cast<float>(i);
    const auto c = crop_or_pad(img, n, n, m);
    ASSERT_EQ(c.size(), m * m);
    for (std::size_t i = 0; i < m; i += 17)
        for (std::size_t j = 0; j < m; j += 13) EXPECT_EQ(c[i * m + j], img[(i + off) * n + j + off]);
}

TEST(Preprocess, PadsSymmetricallyWithZeros) {
    std::vector<float> img(4, 1.0f);
    const auto p = crop_or_pad(img, 2, 2, 4);
    const std::vector<float> expect{0, 0, 0, 0, 0, 1, 1, 0, 0, 1, 1, 0, 0, 0, 0, 0};
    EXPECT_EQ(p, expect);
}

TEST(Preprocess, ConstantImageGoesToZerosWithUnitStd) {
    std::vector<float> img(64 * 64, 3.5f);
    const auto r = preprocess(img, 64, 64, 32);
    for (float v : r.image) EXPECT_EQ(v, 0.0f);
    EXPECT_DOUBLE_EQ(r.norm.mean, 3.5);
    EXPECT_DOUBLE_EQ(r.norm.std, 1.0);
}

TEST(Preprocess, RandomInputIsStandardised) {
    const auto t = groupreg::testing::random_tensor<float>({200, 200}, 5, -2.0, 7.0);
    const auto r = preprocess(t.data(), 200, 200, 192);
    double mean = 0, sq = 0;
    for (float v : r.image) mean += v;
    mean /= static_cast<double>(r.image.size());
    for (float v : r.image) sq += (v - mean) * (v - mean);
    EXPECT_NEAR(mean, 0.0, 1e-6);
    EXPECT_NEAR(std::sqrt(sq / static_cast<double>(r.image.size())), 1.0, 1e-6);
}

TEST(LrSchedule, EndpointsAndMidpoint) {
    TrainConfig cfg;
    cfg.epochs = 101;
    cfg.lr_max = 0.02;
    cfg.lr_min = 0.002;
    EXPECT_DOUBLE_EQ(lr_schedule(0, cfg), 0.02);
    EXPECT_NEAR(lr_schedule(100, cfg), 0.002, 1e-15);
    EXPECT_NEAR(lr_schedule(50, cfg), 0.011, 1e-15);
}

TEST(LrSchedule, NonIncreasing) {
    for (std::size_t epochs : {1u, 2u, 7u, 2500u}) {
        TrainConfig cfg;
        cfg.epochs = epochs;
        double prev = lr_schedule(0, cfg);
        for (std::size_t e = 1; e < epochs; ++e) {
            const double lr = lr_schedule(e, cfg);
            EXPECT_LE(lr, prev);
            prev = lr;
        }
    }
}

TEST(TrainConfigCheck, RejectsBadValues) {
    TrainConfig cfg;
    cfg.epochs = 0;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = TrainConfig{};
    cfg.lr_max = 0.001;
    cfg.lr_min = 0.01;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = TrainConfig{};
    cfg.augment.noise_halfwidth_db = -1;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = TrainConfig{};
    cfg.grad_clip = 0.0;
    EXPECT_THROW(cfg.validate(), ConfigError);
    EXPECT_NO_THROW(TrainConfig{}.validate());
}

TEST(SourceIndices, CyclicAfterTargetInFrameOrder) {
    EXPECT_EQ(source_indices(5, 0, 4), (std::vector<std::size_t>{1, 2, 3, 4}));
    EXPECT_EQ(source_indices(5, 3, 2), (std::vector<std::size_t>{0, 4}));
    EXPECT_EQ(source_indices(15, 14, 14).size(), 14u);
}

class AugmentTest : public ::testing::Test {
protected:
    void SetUp() override {
        g = small_phantom(64, 4, 11);
        group = clean_group(g.clean_frames, 64, 64, 0, 3);
    }
    GeneratedSeries g;
    GroupInput<float> group;
};

TEST_F(AugmentTest, ZeroHalfwidthUsesCentreSnr) {
    AugmentConfig cfg;
    cfg.noise_center_db = 6.0;
    cfg.noise_halfwidth_db = 0.0;
    cfg.max_shift_px = 0;
    cfg.intensity_jitter_frac = 0.0;
    Rng rng(3);
    AugmentRecord rec;
    const auto out = augment(group, cfg, rng, &rec);
    EXPECT_EQ(rec.snr_db, 6.0);
    for (const auto& s : rec.shifts) EXPECT_EQ(s, std::make_pair(0L, 0L));

    // Undo the standardisation by regressing the output on the clean target;
    // the residual is the noise scaled by the same factor.
    const auto clean = group.target_noisy.data();
    const auto x = out.target_noisy.data();
    const double n = static_cast<double>(clean.size());
    double mc = 0, mx = 0;
    for (std::size_t i = 0; i < clean.size(); ++i) {
        mc += clean[i];
        mx += x[i];
    }
    mc /= n;
    mx /= n;
    double cov = 0, var = 0;
    for (std::size_t i = 0; i < clean.size(); ++i) {
        cov += (clean[i] - mc) * (x[i] - mx);
        var += (clean[i] - mc) * (clean[i] - mc);
    }
    const double a = cov / var;
    double res = 0;
    for (std::size_t i = 0; i < clean.size(); ++i) {
        const double r = x[i] - mx - a * (clean[i] - mc);
        res += r * r;
    }
    const double noise_power = res / n / (a * a);
    const double snr = 10 * std::log10(mean_square(clean) / noise_power);
    EXPECT_NEAR(snr, 6.0, 0.3);
}

TEST_F(AugmentTest, CleanReferenceUntouched) {
    const std::vector<float> before(group.clean_reference.data().begin(),
                                    group.clean_reference.data().end());
    AugmentConfig cfg;
    Rng rng(9);
    const auto out = augment(group, cfg, rng);
    const std::vector<float> after(out.clean_reference.data().begin(),
                                   out.clean_reference.data().end());
    EXPECT_TRUE(bit_equal(before, after));
    EXPECT_TRUE(bit_equal(before, std::vector<float>(group.clean_reference.data().begin(),
                                                     group.clean_reference.data().end())));
}

TEST_F(AugmentTest, ShiftMatchesZeroFilledOracle) {
    AugmentConfig cfg;
    cfg.noise_center_db = std::numeric_limits<double>::infinity();
    cfg.noise_halfwidth_db = 0.0;
    cfg.max_shift_px = 2;
    cfg.intensity_jitter_frac = 0.0;
    const std::size_t plane = 64 * 64;
    bool saw_row_only = false;
    for (std::uint64_t seed = 0; seed < 200 && !saw_row_only; ++seed) {
        Rng rng(seed);
        AugmentRecord rec;
        const auto out = augment(group, cfg, rng, &rec);
        for (std::size_t j = 0; j < 3; ++j) {
            const auto [dy, dx] = rec.shifts[j];
            const auto src = group.sources.data().subspan(j * plane, plane);
            std::vector<float> expect(plane, 0.0f);
            for (long r = 0; r < 64; ++r)
                for (long c = 0; c < 64; ++c) {
                    const long sr = r - dy, sc = c - dx;
                    if (sr >= 0 && sr < 64 && sc >= 0 && sc < 64)
                        expect[std::size_t(r * 64 + c)] = src[std::size_t(sr * 64 + sc)];
                }
            standardise(expect);
            const auto got = out.sources.data().subspan(j * plane, plane);
            for (std::size_t i = 0; i < plane; ++i) ASSERT_NEAR(got[i], expect[i], 1e-5);
            if (dy == 2 && dx == 0) saw_row_only = true;
        }
    }
    EXPECT_TRUE(saw_row_only);
}

TEST_F(AugmentTest, DeterministicPerRngState) {
    AugmentConfig cfg;
    Rng a(21), b(21);
    const auto x = augment(group, cfg, a);
    const auto y = augment(group, cfg, b);
    EXPECT_TRUE(bit_equal({x.sources.data().begin(), x.sources.data().end()},
                          {y.sources.data().begin(), y.sources.data().end()}));
    EXPECT_TRUE(bit_equal({x.target_noisy.data().begin(), x.target_noisy.data().end()},
                          {y.target_noisy.data().begin(), y.target_noisy.data().end()}));
}

TEST(Split, ConsecutiveQuarters) {
    std::vector<Series> all(8);
    for (std::size_t i = 0; i < all.size(); ++i) all[i].height = i;
    const auto s = split_dataset(all);
    ASSERT_EQ(s.train.size(), 4u);
    ASSERT_EQ(s.val.size(), 2u);
    ASSERT_EQ(s.test.size(), 2u);
    EXPECT_EQ(s.train.front().height, 0u);
    EXPECT_EQ(s.val.front().height, 4u);
    EXPECT_EQ(s.test.back().height, 7u);
    EXPECT_THROW(split_dataset({}), DataError);
}

class TrainTest : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        for (std::uint64_t s = 0; s < 2; ++s)
            data.push_back(clean_series_from_phantom(small_phantom(32, 3, 100 + s, 2.0)));
    }
    static TrainConfig tiny(std::size_t epochs, double lr) {
        TrainConfig cfg;
        cfg.variant = Variant::aim_cc;
        cfg.epochs = epochs;
        cfg.lr_max = lr;
        cfg.lr_min = lr / 10;
        cfg.k = 2;
        cfg.batch_size = 2;
        cfg.cc_window = 5;
        cfg.seed = 4;
        cfg.augment.noise_center_db = 15.0;
        cfg.augment.noise_halfwidth_db = 2.0;
        cfg.augment.max_shift_px = 1;
        return cfg;
    }
    static inline std::vector<Series> data;
};

TEST_F(TrainTest, ZeroLearningRateKeepsParameters) {
    auto cfg = tiny(1, 0.0);
    cfg.lr_min = 0.0;
    auto r = train(data, {}, cfg, nullptr);
    auto init = RegistrationNet<float>::initialise(derive_seed(cfg.seed, "init"));
    EXPECT_TRUE(bit_equal(flat_params(r.final_model.net), flat_params(init)));
}

TEST_F(TrainTest, TinyTaskLossHalves) {
    const auto cfg = tiny(200, 0.1);
    auto r = train(data, {}, cfg, nullptr);
    ASSERT_EQ(r.log.size(), 200u);
    auto mean_of = [&](std::size_t lo, std::size_t hi) {
        double s = 0;
        for (std::size_t e = lo; e < hi; ++e) s += r.log[e].train_loss;
        return s / static_cast<double>(hi - lo);
    };
    EXPECT_LT(mean_of(190, 200), 0.5 * mean_of(0, 10));
}

TEST_F(TrainTest, SameSeedSameModelFile) {
    const auto cfg = tiny(4, 0.05);
    const auto dir = scratch_dir("determinism");
    auto a = train(data, {data[0]}, cfg, nullptr);
    auto b = train(data, {data[0]}, cfg, nullptr);
    save_model(dir / "a.aimd", a.final_model);
    save_model(dir / "b.aimd", b.final_model);
    EXPECT_EQ(file_bytes(dir / "a.aimd"), file_bytes(dir / "b.aimd"));
    for (std::size_t e = 0; e < a.log.size(); ++e) {
        EXPECT_EQ(a.log[e].train_loss, b.log[e].train_loss);
        EXPECT_EQ(a.log[e].val_loss, b.log[e].val_loss);
    }
}

TEST_F(TrainTest, EdgeVariantNeedsDetector) {
    auto cfg = tiny(1, 0.01);
    cfg.variant = Variant::aim_ed;
    EXPECT_THROW(train(data, {}, cfg, nullptr), ConfigError);
    EXPECT_THROW(train({}, {}, tiny(1, 0.01), nullptr), DataError);
}

TEST(Register, ZeroMotionIdentity) {
    auto s = clean_series_from_phantom(small_phantom(64, 5, 3, 0.0));
    const auto net = RegistrationNet<float>::initialise(1);
    const auto r = register_target(net, s, 2);
    ASSERT_EQ(r.registered.size(), s.plane());
    EXPECT_EQ(r.fields.size(), 4 * 2 * s.plane());
    EXPECT_EQ(r.source_indices, (std::vector<std::size_t>{0, 1, 3, 4}));
    for (float u : r.fields) EXPECT_EQ(u, 0.0f);
    const auto plain = unregistered_mean(s.frames, 2);
    for (std::size_t i = 0; i < s.plane(); ++i) {
        EXPECT_NEAR(r.registered[i], plain[i], 1e-6);
        EXPECT_NEAR(r.registered[i], s.frames[0][i], 1e-6);
    }
    EXPECT_THROW(register_target(net, s, 5), DimensionError);
}

TEST(ModelFile, RoundTripIsBitExact) {
    const auto dir = scratch_dir("model");
    RegistrationModel m;
    m.net = RegistrationNet<float>::initialise(17);
    // Give the zero-initialised flow layer some values too.
    Rng rng(2);
    for (auto& v : m.net.layers().back().weight.mutable_data()) v = static_cast<float>(rng.normal());
    m.variant = Variant::vxm_ed;
    m.loss = LossConfig::defaults_for(SimilarityMode::edge);
    m.k = 6;
    save_model(dir / "m.aimd", m);
    auto back = load_registration_model(dir / "m.aimd");
    EXPECT_EQ(back.variant, Variant::vxm_ed);
    EXPECT_EQ(back.k, 6u);
    EXPECT_EQ(back.loss.lambda, m.loss.lambda);
    EXPECT_TRUE(bit_equal(flat_params(back.net), flat_params(m.net)));
    EXPECT_EQ(peek_model_kind(dir / "m.aimd"), ModelKind::registration);

    const auto t = groupreg::testing::random_tensor<float>({1, 1, 32, 32}, 1);
    const auto s = groupreg::testing::random_tensor<float>({1, 1, 32, 32}, 2);
    const auto ua = m.net.predict(t, s), ub = back.net.predict(t, s);
    EXPECT_TRUE(bit_equal({ua.data().begin(), ua.data().end()}, {ub.data().begin(), ub.data().end()}));

    save_model(dir / "m2.aimd", back);
    EXPECT_EQ(file_bytes(dir / "m.aimd"), file_bytes(dir / "m2.aimd"));
}

TEST(ModelFile, CorruptionIsDetected) {
    const auto dir = scratch_dir("corrupt");
    RegistrationModel m;
    m.net = RegistrationNet<float>::initialise(3);
    save_model(dir / "m.aimd", m);
    const auto bytes = file_bytes(dir / "m.aimd");

    auto write = [&](const fs::path& p, const std::vector<char>& b) {
        std::ofstream out(p, std::ios::binary);
        out.write(b.data(), static_cast<std::streamsize>(b.size()));
    };
    write(dir / "trunc.aimd", {bytes.begin(), bytes.end() - 100});
    EXPECT_THROW(load_registration_model(dir / "trunc.aimd"), ChecksumError);

    auto flipped = bytes;
    flipped[bytes.size() / 2] ^= 0x10;
    write(dir / "flip.aimd", flipped);
    EXPECT_THROW(load_registration_model(dir / "flip.aimd"), ChecksumError);

    auto magic = bytes;
    magic[0] = 'X';
    write(dir / "magic.aimd", magic);
    EXPECT_THROW(load_registration_model(dir / "magic.aimd"), FormatError);

    EXPECT_THROW(load_edge_detector(dir / "m.aimd"), FormatError);
    EXPECT_THROW(load_registration_model(dir / "missing.aimd"), DataError);
}

TEST(SeriesStore, RoundTrip) {
    const auto dir = scratch_dir("series");
    PhantomSpec spec;
    spec.size = 32;
    spec.frames = 3;
    spec.noise_snr_db = 6.0;
    const auto s = series_from_phantom(generate(spec));
    write_series(dir / "s0", s);
    const auto back = read_series(dir / "s0");
    ASSERT_EQ(back.frame_count(), 3u);
    for (std::size_t f = 0; f < 3; ++f) {
        EXPECT_TRUE(bit_equal(back.frames[f], s.frames[f]));
        EXPECT_TRUE(bit_equal(back.gt_fields[f], s.gt_fields[f]));
    }
    EXPECT_TRUE(bit_equal(back.reference, s.reference));
    EXPECT_EQ(back.snr_db, s.snr_db);
    ASSERT_TRUE(back.heart.has_value());
    EXPECT_EQ(back.heart->row, s.heart->row);

    EXPECT_EQ(list_series(dir / "s0").size(), 1u);
    write_series(dir / "s1", s);
    EXPECT_EQ(list_series(dir), (std::vector<fs::path>{dir / "s0", dir / "s1"}));

    fs::resize_file(dir / "s1" / "frame_001.raw", 10);
    EXPECT_THROW(read_series(dir / "s1"), DataError);
    EXPECT_THROW(read_series(dir / "nothing"), DataError);
}

TEST(Reports, CsvHeaderAndRows) {
    const auto dir = scratch_dir("report");
    auto s = series_from_phantom(small_phantom(32, 3, 1));
    const auto report = evaluate_plain_mean(s);
    ASSERT_EQ(report.rows.size(), 3u);
    write_report_csv(dir / "r.csv", report);
    std::ifstream in(dir / "r.csv");
    std::string header;
    std::getline(in, header);
    EXPECT_EQ(header, "method,snr_db,target_idx,rsnr_db,ssim,epe_px");
    std::size_t lines = 0;
    for (std::string l; std::getline(in, l);) ++lines;
    EXPECT_EQ(lines, 3u);
    EXPECT_EQ(format_number(kRsnrExact), "inf");
    EXPECT_EQ(format_number(1.5), "1.500000");
}
