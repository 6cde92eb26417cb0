#include "groupreg/pipeline/ablation.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "groupreg/error.hpp"
#include "groupreg/image.hpp"
#include "groupreg/pipeline/inference.hpp"
#include "groupreg/pipeline/model_file.hpp"

namespace groupreg {

namespace fs = std::filesystem;
using json = nlohmann::json;

const AblationCell& AblationResult::cell(const std::string& method, double snr_db) const {
    for (const auto& c : table)
        if (c.method == method && c.snr_db == snr_db) return c;
    throw DataError("ablation: no cell for " + method + " at " + std::to_string(snr_db) + " dB");
}

Series with_noise(const Series& clean, double snr_db, std::uint64_t seed) {
    Series s = clean;
    double power = 0;
    for (const auto& f : clean.frames) power += mean_square(f);
    power /= static_cast<double>(clean.frame_count());
    const double sigma = noise_sigma(power, snr_db);
    Rng rng(seed, "noise");
    for (auto& f : s.frames) add_gaussian_noise(f, sigma, rng);
    s.snr_db = snr_db;
    return s;
}

namespace {

MetricSummary summarise(const std::vector<const MetricRow*>& rows, const std::string& method,
                        double snr) {
    MetricReport r;
    for (const auto* m : rows) r.rows.push_back(*m);
    auto agg = r.aggregate();
    if (agg.size() != 1) throw DataError("ablation: inconsistent cell " + method);
    agg[0].snr_db = snr;
    return agg[0];
}

}  // namespace

AblationResult run_ablation(const DatasetSplit& split, const EdgeDetector<float>& detector,
                            const AblationConfig& cfg,
                            const std::function<void(const std::string&)>& progress) {
    if (split.train.empty() || split.test.empty())
        throw DataError("ablation: need training and test series");
    if (cfg.seeds.empty() || cfg.snr_levels.empty() || cfg.variants.empty())
        throw ConfigError("ablation: seeds, SNR levels and variants must be non-empty");
    for (const auto& s : split.test)
        if (!s.has_reference() || !s.has_gt_fields())
            throw DataError("ablation: test series need a clean reference and ground-truth fields");

    AblationResult result;
    std::vector<std::string> methods;
    for (auto v : cfg.variants) methods.push_back(to_string(v));
    if (cfg.include_plain_mean) methods.push_back("mean");

    for (auto seed : cfg.seeds) {
        std::vector<const RegistrationNet<float>*> nets;
        const std::size_t first_run = result.runs.size();
        for (auto v : cfg.variants) {
            TrainConfig tc = cfg.train;
            tc.variant = v;
            tc.seed = seed;
            if (progress) progress("training " + to_string(v) + " seed " + std::to_string(seed));
            result.runs.push_back(train(split.train, split.val, tc, &detector));
        }
        for (std::size_t i = first_run; i < result.runs.size(); ++i)
            nets.push_back(&result.runs[i].final_model.net);

        for (std::size_t li = 0; li < cfg.snr_levels.size(); ++li) {
            const double snr = cfg.snr_levels[li];
            for (std::size_t si = 0; si < split.test.size(); ++si) {
                const auto noisy = with_noise(split.test[si], snr,
                                              derive_seed(seed, "test-noise", li * 100003 + si));
                for (std::size_t m = 0; m < methods.size(); ++m) {
                    const auto report = m < nets.size() ? evaluate_model(*nets[m], noisy, methods[m])
                                                        : evaluate_plain_mean(noisy, methods[m]);
                    for (const auto& row : report.rows) result.rows.push_back({seed, si, row});
                }
            }
            if (progress) progress("scored seed " + std::to_string(seed) + " at " + format_number(snr) + " dB");
        }
    }

    for (const auto& method : methods)
        for (double snr : cfg.snr_levels) {
            AblationCell c;
            c.method = method;
            c.snr_db = snr;
            std::vector<const MetricRow*> all;
            for (const auto& r : result.rows)
                if (r.metrics.method == method && r.metrics.snr_db == snr) all.push_back(&r.metrics);
            c.all = summarise(all, method, snr);
            for (auto seed : cfg.seeds) {
                std::vector<const MetricRow*> mine;
                for (const auto& r : result.rows)
                    if (r.seed == seed && r.metrics.method == method && r.metrics.snr_db == snr)
                        mine.push_back(&r.metrics);
                c.per_seed.push_back(summarise(mine, method, snr));
            }
            result.table.push_back(std::move(c));
        }
    return result;
}

namespace {

std::string opt_number(const std::optional<double>& v) { return v ? format_number(*v) : ""; }

json opt_json(const std::optional<double>& v) {
    if (!v) return nullptr;
    if (std::isinf(*v)) return "inf";
    return *v;
}

json summary_json(const MetricSummary& s) {
    return {{"count", s.count},
            {"rsnr_db_mean", opt_json(s.rsnr_mean)},
            {"rsnr_db_std", opt_json(s.rsnr_std)},
            {"ssim_mean", s.ssim_mean},
            {"ssim_std", s.ssim_std},
            {"epe_px_mean", opt_json(s.epe_mean)},
            {"epe_px_std", opt_json(s.epe_std)},
            {"motion_px_mean", opt_json(s.motion_mean)}};
}

std::ofstream open_out(const fs::path& file) {
    std::ofstream out(file, std::ios::trunc);
    if (!out) throw DataError("cannot write " + file.string());
    return out;
}

}  // namespace

void write_ablation(const fs::path& dir, const AblationResult& result, const AblationConfig& cfg) {
    std::error_code ec;
    fs::create_directories(dir / "models", ec);
    if (ec) throw DataError("cannot create " + (dir / "models").string());

    {
        auto out = open_out(dir / "rows.csv");
        out << "method,snr_db,target_idx,rsnr_db,ssim,epe_px,seed,series,motion_px\n";
        for (const auto& r : result.rows) {
            const auto& m = r.metrics;
            out << m.method << ',' << opt_number(m.snr_db) << ',' << m.target_idx << ','
                << format_number(m.rsnr_db) << ',' << format_number(m.ssim) << ','
                << opt_number(m.epe_px) << ',' << r.seed << ',' << r.series << ','
                << opt_number(m.motion_px) << '\n';
        }
    }
    {
        auto out = open_out(dir / "table.csv");
        out << "method,snr_db,count,rsnr_db_mean,rsnr_db_std,ssim_mean,ssim_std,epe_px_mean,epe_px_std\n";
        for (const auto& c : result.table) {
            const auto& s = c.all;
            out << c.method << ',' << format_number(c.snr_db) << ',' << s.count << ','
                << format_number(s.rsnr_mean) << ',' << format_number(s.rsnr_std) << ','
                << format_number(s.ssim_mean) << ',' << format_number(s.ssim_std) << ','
                << opt_number(s.epe_mean) << ',' << opt_number(s.epe_std) << '\n';
        }
    }
    {
        json cells = json::array();
        for (const auto& c : result.table) {
            json per_seed = json::array();
            for (std::size_t i = 0; i < c.per_seed.size(); ++i) {
                auto j = summary_json(c.per_seed[i]);
                j["seed"] = cfg.seeds.at(i);
                per_seed.push_back(std::move(j));
            }
            auto j = summary_json(c.all);
            j["method"] = c.method;
            j["snr_db"] = c.snr_db;
            j["per_seed"] = std::move(per_seed);
            cells.push_back(std::move(j));
        }
        json variants = json::array();
        for (auto v : cfg.variants) {
            auto t = cfg.train;
            t.variant = v;
            variants.push_back({{"variant", to_string(v)},
                                {"lr_max", t.resolved_lr_max()},
                                {"lr_min", t.resolved_lr_min()},
                                {"grad_clip", t.resolved_grad_clip()},
                                {"lambda", t.loss().lambda}});
        }
        json doc{{"model_selection", "final_epoch"},
                 {"variants", std::move(variants)},
                 {"seeds", cfg.seeds},
                 {"snr_levels_db", cfg.snr_levels},
                 {"epochs", cfg.train.epochs},
                 {"k", cfg.train.k},
                 {"cells", std::move(cells)}};
        open_out(dir / "table.json") << doc.dump(2) << '\n';
    }
    for (std::size_t i = 0; i < result.runs.size(); ++i) {
        const auto& run = result.runs[i];
        const auto seed = cfg.seeds.at(i / cfg.variants.size());
        const std::string stem = to_string(run.final_model.variant) + "_seed" + std::to_string(seed);
        save_model(dir / "models" / (stem + ".aimd"), run.final_model);
        auto log = open_out(dir / "models" / (stem + "_log.csv"));
        log << "epoch,train_loss,val_loss,lr,grad_norm\n";
        for (const auto& e : run.log)
            log << e.epoch << ',' << format_number(e.train_loss) << ','
                << (std::isnan(e.val_loss) ? std::string() : format_number(e.val_loss)) << ','
                << format_number(e.lr) << ',' << format_number(e.grad_norm) << '\n';
    }
}

}  // namespace groupreg
