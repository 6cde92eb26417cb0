#pragma once

// The four-variant comparison: train every variant per seed, then score each
// on the held-out series at several noise levels and all target rotations.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "groupreg/edge.hpp"
#include "groupreg/metrics.hpp"
#include "groupreg/pipeline/training.hpp"

namespace groupreg {

struct AblationConfig {
    std::vector<double> snr_levels{11.0, 6.0, 1.0};
    std::vector<std::uint64_t> seeds{0, 1, 2};
    std::vector<Variant> variants{Variant::vxm_cc, Variant::vxm_ed, Variant::aim_cc, Variant::aim_ed};
    TrainConfig train;  // variant and seed are set per run
    bool include_plain_mean = true;
};

struct AblationRow {
    std::uint64_t seed = 0;
    std::size_t series = 0;  // index in the test split
    MetricRow metrics;
};

/// Mean over all rows of one (method, snr) cell, and the per-seed means.
struct AblationCell {
    std::string method;
    double snr_db = 0;
    MetricSummary all;
    std::vector<MetricSummary> per_seed;  // in seed order
};

struct AblationResult {
    std::vector<AblationRow> rows;
    std::vector<AblationCell> table;  // methods in run order, SNR in config order
    std::vector<TrainResult> runs;    // seed-major, variant-minor

    const AblationCell& cell(const std::string& method, double snr_db) const;
};

/// Noisy copy of a noiseless series at `snr_db`, noise drawn from `seed`.
Series with_noise(const Series& clean, double snr_db, std::uint64_t seed);

/// Trains on split.train (validating on split.val) and scores on split.test.
/// Models are selected at the final epoch.
AblationResult run_ablation(const DatasetSplit& split, const EdgeDetector<float>& detector,
                            const AblationConfig& cfg,
                            const std::function<void(const std::string&)>& progress = {});

/// rows.csv (report columns plus seed and series), table.csv, table.json,
/// training logs and models/<variant>_seed<seed>.aimd under `dir`.
void write_ablation(const std::filesystem::path& dir, const AblationResult& result,
                    const AblationConfig& cfg);

}  // namespace groupreg
