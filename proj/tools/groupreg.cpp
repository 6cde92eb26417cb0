// groupreg: phantom generation, edge-detector and registration training,
// inference, evaluation and the four-variant comparison.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "groupreg/error.hpp"
#include "groupreg/pipeline/ablation.hpp"
#include "groupreg/pipeline/inference.hpp"
#include "groupreg/pipeline/model_file.hpp"
#include "groupreg/pipeline/series_store.hpp"
#include "groupreg/pipeline/training.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace groupreg;

namespace {

enum Exit { ok = 0, usage = 2, data = 3, numeric = 4 };

// Values from a JSON config file fill every option not given on the command line.
void merge_config(CLI::App& cmd, const std::string& file) {
    if (file.empty()) return;
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot read config file " + file);
    json cfg;
    try {
        cfg = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("config file " + file + ": " + e.what());
    }
    if (!cfg.is_object()) throw ConfigError("config file " + file + " must hold a JSON object");
    for (const auto& [key, value] : cfg.items()) {
        std::string name = key;
        for (auto& c : name)
            if (c == '_') c = '-';
        CLI::Option* opt = nullptr;
        try {
            opt = cmd.get_option("--" + name);
        } catch (const CLI::OptionNotFound&) {
            throw ConfigError("config file " + file + ": unknown option '" + key + "'");
        }
        if (opt->count() > 0) continue;
        std::vector<std::string> parts;
        auto text = [](const json& v) {
            if (v.is_string()) return v.get<std::string>();
            if (v.is_null()) return std::string("none");
            return v.dump();
        };
        if (value.is_array()) {
            std::string joined;
            for (const auto& v : value) joined += (joined.empty() ? "" : ",") + text(v);
            parts.push_back(joined);
        } else {
            parts.push_back(text(value));
        }
        for (const auto& p : parts) opt->add_result(p);
        opt->run_callback();
    }
}

void print_resolved(const std::string& command, const json& resolved) {
    std::cout << "command: " << command << '\n'
              << "resolved config: " << resolved.dump() << '\n';
    if (resolved.contains("seed")) std::cout << "seed: " << resolved["seed"].dump() << '\n';
    std::cout.flush();
}

std::optional<double> parse_optional_db(const std::string& s) {
    if (s.empty() || s == "none" || s == "null") return std::nullopt;
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("expected a number or 'none', got '" + s + "'");
    }
}

template <typename T>
std::vector<T> parse_list(const std::string& s, const std::string& what) {
    std::vector<T> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            std::size_t used = 0;
            if constexpr (std::is_floating_point_v<T>) {
                out.push_back(static_cast<T>(std::stod(item, &used)));
            } else {
                out.push_back(static_cast<T>(std::stoull(item, &used)));
            }
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError("bad " + what + " list entry '" + item + "'");
        }
    }
    if (out.empty()) throw ConfigError(what + " list is empty");
    return out;
}

void ensure_writable_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw ConfigError("cannot create output directory " + dir.string());
    const auto probe = dir / ".write_probe";
    {
        std::ofstream out(probe);
        if (!out) throw ConfigError("output directory is not writable: " + dir.string());
    }
    fs::remove(probe, ec);
}

void ensure_parent(const fs::path& file) {
    if (file.has_parent_path()) ensure_writable_dir(file.parent_path());
}

std::vector<BasicTensor<float>> frame_tensors(const std::vector<Series>& set, bool all_frames) {
    std::vector<BasicTensor<float>> out;
    for (const auto& s : set) {
        const auto clean = clean_frames(s);
        const std::size_t n = all_frames ? clean.size() : 1;
        for (std::size_t f = 0; f < n; ++f) out.emplace_back(Shape{1, 1, s.height, s.width}, clean[f]);
    }
    return out;
}

// ---------------------------------------------------------------- phantom

struct PhantomOptions {
    std::string out;
    std::size_t size = 192, frames = 15, count = 1;
    std::uint64_t seed = 0;
    std::string snr_db = "none";
    double depth = 3.0, period = 5.0, hysteresis = 0.4;
    int exponent = 1;
    std::string lesion = "on";
};

int run_phantom(const PhantomOptions& o) {
    PhantomSpec spec;
    spec.size = o.size;
    spec.frames = o.frames;
    spec.breathing.depth_px = o.depth;
    spec.breathing.period_frames = o.period;
    spec.breathing.hysteresis_phase = o.hysteresis;
    spec.breathing.shape_exponent = o.exponent;
    if (o.lesion != "on" && o.lesion != "off") throw ConfigError("--lesion must be on or off");
    spec.lesion.enabled = o.lesion == "on";
    spec.noise_snr_db = parse_optional_db(o.snr_db);
    if (o.count < 1) throw ConfigError("--count must be >= 1");
    spec.validate();
    print_resolved("phantom", {{"out", o.out}, {"size", o.size}, {"frames", o.frames}, {"count", o.count},
                               {"seed", o.seed}, {"snr_db", spec.noise_snr_db ? json(*spec.noise_snr_db) : json(nullptr)},
                               {"depth", o.depth}, {"period", o.period}, {"hysteresis", o.hysteresis},
                               {"exponent", o.exponent}, {"lesion", o.lesion}});
    ensure_writable_dir(o.out);
    for (std::size_t i = 0; i < o.count; ++i) {
        PhantomSpec s = spec;
        s.anatomy_seed = o.count == 1 ? o.seed : derive_seed(o.seed, "series", i);
        s.noise_seed = s.anatomy_seed;
        const auto g = generate(s);
        char name[32];
        std::snprintf(name, sizeof name, "series_%03zu", i);
        const fs::path dir = o.count == 1 ? fs::path(o.out) : fs::path(o.out) / name;
        write_series(dir, series_from_phantom(g));
        std::cout << "wrote " << dir.string() << " (" << g.noisy_frames.size() << " frames, " << o.size
                  << "x" << o.size;
        if (!g.snr_actual_db.empty()) {
            double m = 0;
            for (double v : g.snr_actual_db) m += v;
            std::printf(", measured SNR %.3f dB", m / static_cast<double>(g.snr_actual_db.size()));
            std::fflush(stdout);
        }
        std::cout << ")\n";
    }
    return ok;
}

// ------------------------------------------------------------ train-edges

struct EdgeOptions {
    std::string data, out;
    double snr_lo = 1.0, snr_hi = 23.0, threshold = 0.2, lr_max = 0.005, max_shift = 0.5;
    bool binary = false;
    std::size_t epochs = 100, batch_size = 8;
    std::uint64_t seed = 0;
};

int run_train_edges(const EdgeOptions& o) {
    EdgeTrainConfig cfg;
    cfg.snr_lo_db = o.snr_lo;
    cfg.snr_hi_db = o.snr_hi;
    cfg.threshold = o.threshold;
    cfg.binary_target = o.binary;
    cfg.epochs = o.epochs;
    cfg.batch_size = o.batch_size;
    cfg.lr_max = o.lr_max;
    cfg.lr_min = o.lr_max / 100.0;
    cfg.max_intensity_shift = o.max_shift;
    cfg.seed = o.seed;
    print_resolved("train-edges", {{"data", o.data}, {"out", o.out}, {"snr_lo", o.snr_lo}, {"snr_hi", o.snr_hi},
                                   {"threshold", o.threshold}, {"binary", o.binary}, {"epochs", o.epochs}, {"batch_size", o.batch_size},
                                   {"lr_max", o.lr_max}, {"max_shift", o.max_shift}, {"seed", o.seed}});
    ensure_parent(o.out);
    auto split = split_dataset(read_dataset(o.data));
    const auto train_images = frame_tensors(split.train, true);
    auto held_out = frame_tensors(split.test.empty() ? split.val : split.test, false);
    if (held_out.empty()) held_out = frame_tensors(split.train, false);

    const auto detector = train_edge_detector(train_images, cfg);
    save_model(o.out, detector);
    std::cout << "wrote " << o.out << " (" << train_images.size() << " training images)\n";
    std::cout << "snr_db,detector_mse,sobel_mse\n";
    for (double snr : {23.0, 16.0, 11.0, 6.0, 1.0}) {
        const auto e = edge_robustness(detector, held_out, snr, derive_seed(o.seed, "robustness"));
        std::printf("%.1f,%.6f,%.6f\n", snr, e.detector_mse, e.sobel_mse);
    }
    std::fflush(stdout);
    return ok;
}

// ------------------------------------------------------------------ train

struct TrainOptions {
    std::string data, out, detector, log, best_out;
    std::string variant = "aim-ed";
    std::size_t k = 14, epochs = 2500, batch_size = 4, size = 0, cc_window = 9;
    std::string lambda = "default";
    std::string lr_max = "default", lr_min = "default", grad_clip = "default";
    double momentum = 0.9;
    double noise_center = 11.0, noise_halfwidth = 3.5, jitter = 0.1;
    long max_shift = 2;
    std::uint64_t seed = 0;
};

TrainConfig train_config(const TrainOptions& o) {
    TrainConfig c;
    c.variant = parse_variant(o.variant);
    c.k = o.k;
    c.epochs = o.epochs;
    c.batch_size = o.batch_size;
    if (o.lr_max != "default") c.lr_max = parse_optional_db(o.lr_max);
    if (o.grad_clip == "none" || o.grad_clip == "off")
        c.grad_clip = std::numeric_limits<double>::infinity();
    else if (o.grad_clip != "default")
        c.grad_clip = parse_optional_db(o.grad_clip);
    if (o.lr_min != "default") c.lr_min = parse_optional_db(o.lr_min);
    if (o.lambda != "default") c.lambda = parse_optional_db(o.lambda);
    c.momentum = o.momentum;
    c.cc_window = o.cc_window;
    c.seed = o.seed;
    c.augment.noise_center_db = o.noise_center;
    c.augment.noise_halfwidth_db = o.noise_halfwidth;
    c.augment.max_shift_px = o.max_shift;
    c.augment.intensity_jitter_frac = o.jitter;
    c.validate();
    return c;
}

json train_json(const TrainConfig& c, std::size_t size) {
    return {{"variant", to_string(c.variant)},
            {"k", c.k},
            {"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"lr_max", c.resolved_lr_max()},
            {"lr_min", c.resolved_lr_min()},
            {"grad_clip", std::isinf(c.resolved_grad_clip()) ? json("none") : json(c.resolved_grad_clip())},
            {"momentum", c.momentum},
            {"lambda", c.loss().lambda},
            {"cc_window", c.cc_window},
            {"noise_center_db", c.augment.noise_center_db},
            {"noise_halfwidth_db", c.augment.noise_halfwidth_db},
            {"max_shift_px", c.augment.max_shift_px},
            {"intensity_jitter_frac", c.augment.intensity_jitter_frac},
            {"size", size},
            {"seed", c.seed}};
}

std::vector<Series> maybe_resize(std::vector<Series> v, std::size_t size) {
    if (size == 0) return v;
    for (auto& s : v) s = resize_series(s, size);
    return v;
}

EdgeDetector<float> detector_for(Variant v, const std::string& file) {
    if (similarity_of(v) != SimilarityMode::edge) return {};
    if (file.empty()) throw ConfigError("variant " + to_string(v) + " needs --detector FILE");
    return load_edge_detector(file);
}

void write_log(const fs::path& file, const std::vector<EpochLog>& log) {
    std::ofstream out(file, std::ios::trunc);
    if (!out) throw DataError("cannot write " + file.string());
    out << "epoch,train_loss,val_loss,lr,grad_norm\n";
    for (const auto& e : log)
        out << e.epoch << ',' << format_number(e.train_loss) << ','
            << (std::isnan(e.val_loss) ? std::string() : format_number(e.val_loss)) << ','
            << format_number(e.lr) << ',' << format_number(e.grad_norm) << '\n';
}

int run_train(const TrainOptions& o) {
    const auto cfg = train_config(o);
    auto resolved = train_json(cfg, o.size);
    resolved["data"] = o.data;
    resolved["out"] = o.out;
    resolved["detector"] = o.detector;
    print_resolved("train", resolved);
    const auto detector = detector_for(cfg.variant, o.detector);
    ensure_parent(o.out);
    auto split = split_dataset(maybe_resize(read_dataset(o.data), o.size));
    std::cout << "series: " << split.train.size() << " train, " << split.val.size() << " validation, "
              << split.test.size() << " held out\n";
    const auto every = std::max<std::size_t>(1, cfg.epochs / 20);
    const auto result = train(split.train, split.val, cfg, detector.ready() ? &detector : nullptr,
                              [&](const EpochLog& e) {
                                  if (e.epoch % every == 0 || e.epoch + 1 == cfg.epochs)
                                      std::fprintf(stderr, "epoch %zu  train %.6f  val %.6f  lr %.6g\n",
                                                   e.epoch, e.train_loss, e.val_loss, e.lr);
                              });
    save_model(o.out, result.final_model);
    const fs::path log = o.log.empty() ? fs::path(o.out).replace_extension(".log.csv") : fs::path(o.log);
    write_log(log, result.log);
    const fs::path best = o.best_out.empty() ? fs::path(o.out).replace_extension(".best.aimd") : fs::path(o.best_out);
    save_model(best, result.best_model);
    std::cout << "wrote " << o.out << ", " << best.string() << " (best epoch " << result.best_epoch << "), "
              << log.string() << '\n';
    return ok;
}

// --------------------------------------------------------------- register

struct RegisterOptions {
    std::string model, series, out;
    std::size_t target = 0;
    bool save_fields = false;
};

int run_register(const RegisterOptions& o) {
    print_resolved("register", {{"model", o.model}, {"series", o.series}, {"target", o.target},
                                {"out", o.out}, {"save_fields", o.save_fields}});
    const auto model = load_registration_model(o.model);
    const auto s = read_series(o.series);
    ensure_writable_dir(o.out);
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = register_target(model.net, s, o.target);
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    write_raw(fs::path(o.out) / "registered.raw", r.registered);
    if (o.save_fields) write_raw(fs::path(o.out) / "fields.raw", r.fields);
    json meta{{"size", {s.height, s.width}},
              {"target", o.target},
              {"sources", r.source_indices},
              {"variant", to_string(model.variant)},
              {"fields", o.save_fields ? json("fields.raw") : json(nullptr)}};
    std::ofstream(fs::path(o.out) / "registration.json") << meta.dump(2) << '\n';
    std::printf("registration time: %.1f ms (K=%zu, %zux%zu)\n", ms, r.source_indices.size(), s.height, s.width);
    std::fflush(stdout);
    return ok;
}

// ------------------------------------------------------------------- eval

struct EvalOptions {
    std::string series, registered, report, fields;
    std::string method = "registered";
    long target = -1;
    bool plain_mean = false;
};

int run_eval(const EvalOptions& o) {
    print_resolved("eval", {{"series", o.series}, {"registered", o.registered}, {"report", o.report},
                            {"method", o.method}, {"target", o.target}, {"fields", o.fields},
                            {"plain_mean", o.plain_mean}});
    const auto s = read_series(o.series);
    if (!s.has_reference()) throw ConfigError("reference required for rSNR/SSIM");
    ensure_parent(o.report);
    MetricReport report;
    const auto e = eval_view(s);
    if (o.plain_mean) {
        report = evaluate_plain_mean(s, o.method == "registered" ? "mean" : o.method);
    } else if (o.registered.empty()) {
        throw ConfigError("eval needs --registered FILE|DIR or --plain-mean");
    } else if (fs::is_directory(o.registered)) {
        // One registered_%03d.raw per target.
        std::vector<std::vector<float>> reg;
        for (std::size_t t = 0; t < s.frame_count(); ++t) {
            char name[40];
            std::snprintf(name, sizeof name, "registered_%03zu.raw", t);
            reg.push_back(read_raw(fs::path(o.registered) / name, s.plane()));
        }
        report = evaluate_registered(e, reg, o.method);
    } else {
        if (o.target < 0) throw ConfigError("--target is required with a single registered file");
        const auto reg = read_raw(o.registered, s.plane());
        std::optional<std::span<const float>> fspan;
        std::vector<float> fields;
        if (!o.fields.empty()) {
            fields = read_raw(o.fields, (s.frame_count() - 1) * 2 * s.plane());
            fspan = std::span<const float>(fields);
        }
        report.rows.push_back(score_target(e, static_cast<std::size_t>(o.target), reg, o.method, fspan));
    }
    write_report_csv(o.report, report);
    const auto json_path = fs::path(o.report).replace_extension(".json");
    write_report_json(json_path, report);
    for (const auto& r : report.rows)
        std::cout << r.method << " target " << r.target_idx << ": rSNR " << format_rsnr(r.rsnr_db)
                  << ", SSIM " << format_number(r.ssim)
                  << (r.epe_px ? ", EPE " + format_number(*r.epe_px) + " px" : std::string()) << '\n';
    std::cout << "wrote " << o.report << ", " << json_path.string() << '\n';
    return ok;
}

// ----------------------------------------------------------------- ablate

struct AblateOptions {
    std::string data, out, detector;
    std::string snr_levels = "11,6,1", seeds = "0,1,2";
    std::size_t edge_epochs = 100;
    TrainOptions train;
};

int run_ablate(const AblateOptions& o) {
    AblationConfig cfg;
    cfg.snr_levels = parse_list<double>(o.snr_levels, "SNR");
    cfg.seeds = parse_list<std::uint64_t>(o.seeds, "seed");
    cfg.train = train_config(o.train);
    auto resolved = train_json(cfg.train, o.train.size);
    resolved.erase("variant");
    resolved.erase("seed");
    resolved["data"] = o.data;
    resolved["out"] = o.out;
    resolved["detector"] = o.detector;
    resolved["snr_levels"] = cfg.snr_levels;
    resolved["seeds"] = cfg.seeds;
    resolved["edge_epochs"] = o.edge_epochs;
    print_resolved("ablate", resolved);
    std::cout << "seed: " << json(cfg.seeds).dump() << '\n';
    ensure_writable_dir(o.out);
    auto split = split_dataset(maybe_resize(read_dataset(o.data), o.train.size));
    std::vector<Series> clean_test;
    for (auto& s : split.test) {
        auto c = s;
        c.frames = clean_frames(s);
        c.snr_db.reset();
        clean_test.push_back(std::move(c));
    }
    split.test = std::move(clean_test);

    EdgeDetector<float> detector;
    if (!o.detector.empty()) {
        detector = load_edge_detector(o.detector);
    } else {
        EdgeTrainConfig ec;
        ec.epochs = o.edge_epochs;
        ec.seed = cfg.seeds.front();
        detector = train_edge_detector(frame_tensors(split.train, true), ec);
        save_model(fs::path(o.out) / "edge_detector.aimd", detector);
    }
    const auto result = run_ablation(split, detector, cfg, [](const std::string& msg) {
        std::fprintf(stderr, "%s\n", msg.c_str());
    });
    write_ablation(o.out, result, cfg);
    std::printf("%-8s %7s %16s %14s %14s\n", "method", "snr_db", "rsnr_db", "ssim", "epe_px");
    for (const auto& c : result.table)
        std::printf("%-8s %7.1f %8.3f+-%-6.3f %7.4f+-%-5.4f %7.3f+-%-5.3f\n", c.method.c_str(), c.snr_db,
                    c.all.rsnr_mean, c.all.rsnr_std, c.all.ssim_mean, c.all.ssim_std,
                    c.all.epe_mean.value_or(NAN), c.all.epe_std.value_or(NAN));
    std::cout << "wrote " << (fs::path(o.out) / "table.csv").string() << '\n';
    return ok;
}

void add_train_options(CLI::App* cmd, TrainOptions& t) {
    cmd->add_option("--variant", t.variant, "vxm-cc, vxm-ed, aim-cc or aim-ed")->capture_default_str();
    cmd->add_option("--k", t.k, "sources per group")->capture_default_str();
    cmd->add_option("--lambda", t.lambda, "smoothness weight (default: 0.01 cc, 0.1 edge)")->capture_default_str();
    cmd->add_option("--epochs", t.epochs)->capture_default_str();
    cmd->add_option("--batch-size", t.batch_size)->capture_default_str();
    cmd->add_option("--lr-max", t.lr_max, "default: 3 for edge variants, 0.1 for cc")
        ->capture_default_str();
    cmd->add_option("--lr-min", t.lr_min, "default: lr-max / 100")->capture_default_str();
    cmd->add_option("--grad-clip", t.grad_clip, "global gradient-norm cap, or none; default: 0.05 for edge variants, 1 for cc")
        ->capture_default_str();
    cmd->add_option("--cc-window", t.cc_window, "local correlation window (odd)")->capture_default_str();
    cmd->add_option("--momentum", t.momentum)->capture_default_str();
    cmd->add_option("--noise-center", t.noise_center, "augmentation SNR centre, dB")->capture_default_str();
    cmd->add_option("--noise-halfwidth", t.noise_halfwidth, "augmentation SNR halfwidth, dB")->capture_default_str();
    cmd->add_option("--max-shift", t.max_shift, "augmentation shift, px")->capture_default_str();
    cmd->add_option("--jitter", t.jitter, "augmentation intensity jitter fraction")->capture_default_str();
    cmd->add_option("--size", t.size, "crop/pad frames to this size (0: keep)")->capture_default_str();
    cmd->add_option("--seed", t.seed)->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Groupwise deformable registration for averaging noisy image series"};
    app.require_subcommand(1);
    std::string config_file;

    PhantomOptions ph;
    auto* phantom = app.add_subcommand("phantom", "write a synthetic free-breathing series");
    phantom->add_option("--out", ph.out)->required();
    phantom->add_option("--size", ph.size)->capture_default_str();
    phantom->add_option("--frames", ph.frames, "K + 1")->capture_default_str();
    phantom->add_option("--count", ph.count, "number of series (subdirectories when > 1)")->capture_default_str();
    phantom->add_option("--seed", ph.seed)->capture_default_str();
    phantom->add_option("--snr-db", ph.snr_db, "noise level in dB, or none")->capture_default_str();
    phantom->add_option("--depth", ph.depth, "breathing depth, px")->capture_default_str();
    phantom->add_option("--period", ph.period, "frames per breathing cycle")->capture_default_str();
    phantom->add_option("--hysteresis", ph.hysteresis, "radians")->capture_default_str();
    phantom->add_option("--exponent", ph.exponent, "n in sin^(2n)")->capture_default_str();
    phantom->add_option("--lesion", ph.lesion, "on or off")->capture_default_str();
    phantom->add_option("--config", config_file, "JSON file of option values");

    EdgeOptions ed;
    auto* edges = app.add_subcommand("train-edges", "train the noise-robust edge detector");
    edges->add_option("--data", ed.data)->required();
    edges->add_option("--out", ed.out)->required();
    edges->add_option("--snr-lo", ed.snr_lo)->capture_default_str();
    edges->add_option("--snr-hi", ed.snr_hi)->capture_default_str();
    edges->add_option("--threshold", ed.threshold, "binarisation threshold with --binary")->capture_default_str();
    edges->add_flag("--binary", ed.binary, "train on binarised Sobel targets");
    edges->add_option("--epochs", ed.epochs)->capture_default_str();
    edges->add_option("--batch-size", ed.batch_size)->capture_default_str();
    edges->add_option("--lr-max", ed.lr_max)->capture_default_str();
    edges->add_option("--max-shift", ed.max_shift, "intensity shift augmentation")->capture_default_str();
    edges->add_option("--seed", ed.seed)->capture_default_str();
    edges->add_option("--config", config_file, "JSON file of option values");

    TrainOptions tr;
    auto* train_cmd = app.add_subcommand("train", "train a registration network");
    train_cmd->add_option("--data", tr.data)->required();
    train_cmd->add_option("--out", tr.out)->required();
    train_cmd->add_option("--detector", tr.detector, "edge detector model (edge variants)");
    train_cmd->add_option("--log", tr.log, "training log CSV (default: <out>.log.csv)");
    train_cmd->add_option("--best-out", tr.best_out, "best-validation model (default: <out>.best.aimd)");
    add_train_options(train_cmd, tr);
    train_cmd->add_option("--config", config_file, "JSON file of option values");

    RegisterOptions rg;
    auto* reg = app.add_subcommand("register", "register one target of a series");
    reg->add_option("--model", rg.model)->required();
    reg->add_option("--series", rg.series)->required();
    reg->add_option("--target", rg.target)->capture_default_str();
    reg->add_option("--out", rg.out)->required();
    reg->add_flag("--save-fields", rg.save_fields);
    reg->add_option("--config", config_file, "JSON file of option values");

    EvalOptions ev;
    auto* eval = app.add_subcommand("eval", "score registered images against the clean reference");
    eval->add_option("--series", ev.series)->required();
    eval->add_option("--registered", ev.registered, "registered.raw, or a directory of registered_%03d.raw");
    eval->add_option("--report", ev.report)->required();
    eval->add_option("--method", ev.method)->capture_default_str();
    eval->add_option("--target", ev.target, "target index for a single registered file");
    eval->add_option("--fields", ev.fields, "fields.raw for endpoint error");
    eval->add_flag("--plain-mean", ev.plain_mean, "score the unregistered mean of every rotation");
    eval->add_option("--config", config_file, "JSON file of option values");

    AblateOptions ab;
    ab.train.epochs = 500;
    ab.train.k = 4;
    auto* ablate = app.add_subcommand("ablate", "train and compare the four variants");
    ablate->add_option("--data", ab.data)->required();
    ablate->add_option("--out", ab.out)->required();
    ablate->add_option("--detector", ab.detector, "edge detector model (trained when absent)");
    ablate->add_option("--snr-levels", ab.snr_levels)->capture_default_str();
    ablate->add_option("--seeds", ab.seeds)->capture_default_str();
    ablate->add_option("--edge-epochs", ab.edge_epochs)->capture_default_str();
    add_train_options(ablate, ab.train);
    ablate->remove_option(ablate->get_option("--variant"));
    ablate->remove_option(ablate->get_option("--seed"));
    ablate->add_option("--config", config_file, "JSON file of option values");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : usage;
    }

    try {
        auto* cmd = app.get_subcommands().front();
        try {
            merge_config(*cmd, config_file);
        } catch (const CLI::ParseError& e) {
            throw ConfigError(std::string("config file: ") + e.what());
        }
        if (cmd == phantom) return run_phantom(ph);
        if (cmd == edges) return run_train_edges(ed);
        if (cmd == train_cmd) return run_train(tr);
        if (cmd == reg) return run_register(rg);
        if (cmd == eval) return run_eval(ev);
        if (cmd == ablate) return run_ablate(ab);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return usage;
    } catch (const DimensionError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return usage;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return numeric;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return data;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return data;
    }
    return usage;
}
