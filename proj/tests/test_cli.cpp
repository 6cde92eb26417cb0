#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <string>

#include <json.hpp>

#include "groupreg/model.hpp"
#include "groupreg/pipeline/model_file.hpp"
#include "groupreg/pipeline/series_store.hpp"
#include "groupreg/random.hpp"

using namespace groupreg;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string output;  // stdout and stderr
};

Run cli(const std::string& args) {
    const std::string cmd = std::string(GROUPREG_CLI) + " " + args + " 2>&1";
    Run r;
    FILE* p = popen(cmd.c_str(), "r");
    if (!p) return r;
    char buf[4096];
    while (std::size_t n = std::fread(buf, 1, sizeof buf, p)) r.output.append(buf, n);
    const int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::map<std::string, std::string> tree(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = bytes(e.path());
    return out;
}

std::size_t line_count(const fs::path& p) {
    std::ifstream in(p);
    std::size_t n = 0;
    for (std::string l; std::getline(in, l);) ++n;
    return n;
}

class Cli : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        root = fs::temp_directory_path() / "groupreg_test_cli";
        fs::remove_all(root);
        fs::create_directories(root);
        const auto r = cli("phantom --out " + (root / "data").string() +
                           " --size 32 --frames 3 --count 4 --depth 2 --seed 3");
        ASSERT_EQ(r.code, 0) << r.output;
    }
    static inline fs::path root;
};

}  // namespace

TEST_F(Cli, PhantomDefaults) {
    const auto r = cli("phantom --out " + (root / "default").string());
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_NE(r.output.find("resolved config:"), std::string::npos);
    EXPECT_NE(r.output.find("seed:"), std::string::npos);
    const auto s = read_series(root / "default");
    EXPECT_EQ(s.frame_count(), 15u);
    EXPECT_EQ(s.height, 192u);
    EXPECT_EQ(s.width, 192u);
}

TEST_F(Cli, StaticNoiselessFramesIdentical) {
    const auto dir = root / "static";
    ASSERT_EQ(cli("phantom --out " + dir.string() + " --size 64 --frames 5 --depth 0 --snr-db none").code, 0);
    const auto first = bytes(dir / "frame_000.raw");
    ASSERT_EQ(first.size(), 64u * 64u * 4u);
    for (int f = 1; f < 5; ++f) {
        char name[32];
        std::snprintf(name, sizeof name, "frame_%03d.raw", f);
        EXPECT_EQ(bytes(dir / name), first) << name;
    }
}

TEST_F(Cli, PhantomSeedIsReproducible) {
    for (const char* d : {"seed_a", "seed_b"})
        ASSERT_EQ(cli("phantom --out " + (root / d).string() + " --size 32 --frames 4 --seed 7 --snr-db 6").code, 0);
    EXPECT_EQ(tree(root / "seed_a"), tree(root / "seed_b"));
}

TEST_F(Cli, UsageErrorsExitTwo) {
    EXPECT_EQ(cli("phantom --out " + (root / "x").string() + " --bogus 1").code, 2);
    EXPECT_EQ(cli("").code, 2);
    EXPECT_EQ(cli("phantom --out /proc/groupreg_no_such_dir/x --size 32").code, 2);
    EXPECT_EQ(cli("phantom --out " + (root / "x").string() + " --frames 1").code, 2);
    EXPECT_EQ(cli("train --data " + (root / "data").string() + " --out " + (root / "m.aimd").string() +
                  " --variant aim-ed --k 2 --epochs 1")
                  .code,
              2);
}

TEST_F(Cli, DataErrorsExitThree) {
    fs::create_directories(root / "empty");
    EXPECT_EQ(cli("train-edges --data " + (root / "empty").string() + " --out " + (root / "e.aimd").string()).code, 3);
    EXPECT_EQ(cli("register --model " + (root / "missing.aimd").string() + " --series " +
                  (root / "data" / "series_000").string() + " --out " + (root / "r").string())
                  .code,
              3);
}

TEST_F(Cli, NumericFailureExitsFour) {
    const auto r = cli("train --data " + (root / "data").string() + " --out " + (root / "nan.aimd").string() +
                       " --variant aim-cc --k 2 --epochs 20 --cc-window 5 --lr-max 1e30 --grad-clip none");
    EXPECT_EQ(r.code, 4) << r.output;
}

TEST_F(Cli, ZeroLearningRateKeepsInitialisation) {
    const auto model = root / "lr0.aimd";
    const auto r = cli("train --data " + (root / "data").string() + " --out " + model.string() +
                       " --variant aim-cc --k 2 --epochs 1 --lr-max 0 --lr-min 0 --cc-window 5 --seed 11");
    ASSERT_EQ(r.code, 0) << r.output;
    auto loaded = load_registration_model(model);
    auto init = RegistrationNet<float>::initialise(derive_seed(11, "init"));
    const auto a = loaded.net.parameters(), b = init.parameters();
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        ASSERT_EQ(std::memcmp(a[i]->data().data(), b[i]->data().data(), a[i]->size() * sizeof(float)), 0);
}

TEST_F(Cli, TrainLogHasOneRowPerEpochAndConfigMerges) {
    const auto cfg = root / "train.json";
    std::ofstream(cfg) << R"({"epochs": 5, "k": 2, "cc_window": 5, "variant": "aim-cc"})";
    const auto model = root / "logged.aimd";
    // The flag wins over the file.
    const auto r = cli("train --data " + (root / "data").string() + " --out " + model.string() + " --config " +
                       cfg.string() + " --epochs 3");
    ASSERT_EQ(r.code, 0) << r.output;
    const auto log = root / "logged.log.csv";
    EXPECT_EQ(line_count(log), 4u);
    std::ifstream in(log);
    std::string header;
    std::getline(in, header);
    EXPECT_EQ(header, "epoch,train_loss,val_loss,lr,grad_norm");
    EXPECT_TRUE(fs::exists(root / "logged.best.aimd"));

    std::ofstream(root / "bad.json") << R"({"epochz": 5})";
    EXPECT_EQ(cli("train --data " + (root / "data").string() + " --out " + model.string() + " --config " +
                  (root / "bad.json").string())
                  .code,
              2);
}

TEST_F(Cli, RegisterAndEvaluate) {
    const auto series = root / "still";
    ASSERT_EQ(cli("phantom --out " + series.string() + " --size 32 --frames 3 --depth 0").code, 0);
    const auto model = root / "reg.aimd";
    ASSERT_EQ(cli("train --data " + (root / "data").string() + " --out " + model.string() +
                  " --variant aim-cc --k 2 --epochs 1 --lr-max 0 --lr-min 0 --cc-window 5")
                  .code,
              0);
    const auto out = root / "registered";
    auto r = cli("register --model " + model.string() + " --series " + series.string() +
                 " --target 1 --save-fields --out " + out.string());
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_NE(r.output.find("registration time:"), std::string::npos);
    EXPECT_EQ(fs::file_size(out / "registered.raw"), 32u * 32u * 4u);
    EXPECT_EQ(fs::file_size(out / "fields.raw"), 2u * 2u * 32u * 32u * 4u);
    // Zero flow on a motionless noiseless series: the mean is any frame.
    EXPECT_EQ(bytes(out / "registered.raw"), bytes(series / "frame_000.raw"));

    EXPECT_EQ(cli("register --model " + model.string() + " --series " + series.string() +
                  " --target 3 --out " + out.string())
                  .code,
              2);

    const auto report = root / "report.csv";
    r = cli("eval --series " + series.string() + " --registered " + (series / "reference.raw").string() +
            " --target 0 --report " + report.string());
    ASSERT_EQ(r.code, 0) << r.output;
    std::ifstream in(report);
    std::string header, row;
    std::getline(in, header);
    std::getline(in, row);
    EXPECT_EQ(header, "method,snr_db,target_idx,rsnr_db,ssim,epe_px");
    EXPECT_EQ(row, "registered,,0,inf,1.000000,");
    EXPECT_NE(r.output.find("> 300 dB"), std::string::npos);
    EXPECT_TRUE(fs::exists(root / "report.json"));
}

TEST_F(Cli, EvalWithoutReferenceExitsTwo) {
    const auto series = root / "noref";
    ASSERT_EQ(cli("phantom --out " + series.string() + " --size 32 --frames 3 --snr-db 6").code, 0);
    auto manifest = nlohmann::json::parse(bytes(series / "manifest.json"));
    manifest["has_reference"] = false;
    std::ofstream(series / "manifest.json") << manifest.dump();
    fs::remove(series / "reference.raw");
    const auto r = cli("eval --series " + series.string() + " --plain-mean --report " +
                       (root / "noref.csv").string());
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.output.find("reference required for rSNR/SSIM"), std::string::npos);
}

TEST_F(Cli, AblateTableShapeAndRerun) {
    const std::string common = "ablate --data " + (root / "data").string() +
                               " --epochs 2 --k 2 --cc-window 5 --seeds 0 --snr-levels 11,6,1 --edge-epochs 1";
    for (const char* d : {"ablate_a", "ablate_b"}) {
        const auto r = cli(common + " --out " + (root / d).string());
        ASSERT_EQ(r.code, 0) << r.output;
    }
    const auto table = root / "ablate_a" / "table.csv";
    EXPECT_EQ(line_count(table), 1u + 5u * 3u);  // four variants and the plain mean
    std::ifstream in(table);
    std::string line;
    std::getline(in, line);
    std::size_t cells = 0;
    while (std::getline(in, line)) {
        // One test series of 3 frames: every cell averages 3 target rotations.
        const auto c1 = line.find(','), c2 = line.find(',', c1 + 1), c3 = line.find(',', c2 + 1);
        EXPECT_EQ(line.substr(c2 + 1, c3 - c2 - 1), "3") << line;
        ++cells;
    }
    EXPECT_EQ(cells, 15u);
    EXPECT_EQ(tree(root / "ablate_a"), tree(root / "ablate_b"));
}
