#pragma once

// Inference on stored series and the metric reports built from it.

#include <cstddef>
#include <filesystem>
#include <vector>

#include "groupreg/metrics.hpp"
#include "groupreg/model.hpp"
#include "groupreg/pipeline/series_store.hpp"

namespace groupreg {

struct Registration {
    std::vector<float> registered;           // H x W, intensities of the input frames
    std::vector<float> fields;               // [K,2,H,W]
    std::vector<std::size_t> source_indices; // frame order, target excluded
};

/// Runs the network on standardised frames with frame `target` as the noisy
/// target and every other frame as a source, then averages the input frames
/// warped by the predicted fields.
Registration register_target(const RegistrationNet<float>& net, const Series& s, std::size_t target);

/// Registered image and fields for every target rotation.
MetricReport evaluate_model(const RegistrationNet<float>& net, const Series& s,
                            const std::string& method);

/// Plain mean of the other frames (zero fields) for every target rotation.
MetricReport evaluate_plain_mean(const Series& s, const std::string& method = "mean");

/// CSV with the header method,snr_db,target_idx,rsnr_db,ssim,epe_px.
void write_report_csv(const std::filesystem::path& file, const MetricReport& report);
/// Aggregate (per method and SNR) as JSON.
void write_report_json(const std::filesystem::path& file, const MetricReport& report);

/// Fixed-format number used by every report; "inf" for the rSNR sentinel.
std::string format_number(double v);

}  // namespace groupreg
