#pragma once

// Image-quality and motion metrics: rSNR, SSIM and endpoint error, plus the
// per-target report used by evaluation and the ablation.

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace groupreg {

inline constexpr double kRsnrExact = std::numeric_limits<double>::infinity();

/// -10 log10(|x - ref|^2 / |ref|^2) in dB; +infinity when x == ref exactly.
/// Throws DataError for an all-zero reference, DimensionError on size mismatch.
template <typename T>
double rsnr(std::span<const T> ref, std::span<const T> x);

/// "inf" sentinel rendered as "> 300 dB" for people, numbers otherwise.
std::string format_rsnr(double db);

/// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
/// K2 = 0.03, dynamic range from the joint min/max of the pair, averaged
/// over windows lying fully inside the h x w image.
template <typename T>
double ssim(std::span<const T> ref, std::span<const T> x, std::size_t h, std::size_t w);

/// Mean |est - gt| over mask pixels; fields are [2,H,W] (row then column).
template <typename T>
double endpoint_error(std::span<const T> est, std::span<const T> gt,
                      std::span<const unsigned char> mask);

/// Displacement taking target pixels to source pixels given the fields
/// g_t, g_j that map reference to each frame: solves u = g_t(p) - g_j(p + u)
/// by fixed-point iteration with bilinear sampling of g_j.
std::vector<float> relative_ground_truth(std::span<const float> g_target,
                                         std::span<const float> g_source, std::size_t h,
                                         std::size_t w, int iterations = 20);

struct MetricRow {
    std::string method;
    std::optional<double> snr_db;
    std::size_t target_idx = 0;
    double rsnr_db = 0.0;
    double ssim = 0.0;
    std::optional<double> epe_px;
    std::optional<double> motion_px;  // EPE of the zero field, for reference
};

struct MetricSummary {
    std::string method;
    std::optional<double> snr_db;
    std::size_t count = 0;
    double rsnr_mean = 0, rsnr_std = 0;
    double ssim_mean = 0, ssim_std = 0;
    std::optional<double> epe_mean, epe_std, motion_mean;
};

struct MetricReport {
    std::vector<MetricRow> rows;

    /// One summary per (method, snr) in first-appearance order; population std.
    std::vector<MetricSummary> aggregate() const;
};

/// What the scorer needs from a series.
struct EvalSeries {
    std::size_t height = 0, width = 0;
    std::vector<float> reference;                 // clean, reference pose
    std::vector<std::vector<float>> gt_fields;    // empty if unknown
    std::optional<double> snr_db;
    std::optional<double> heart_row, heart_col, heart_radius;
    std::size_t frames = 0;
};

/// Clean image in the pose of `target`: warp(reference, gt[target]) when
/// ground-truth fields exist, else the reference itself.
std::vector<float> reference_for_target(const EvalSeries& s, std::size_t target);

/// Scores one registered image for one target choice. `fields` are the
/// estimated [K,2,H,W] displacements for the sources in frame order without
/// the target; EPE needs them plus ground truth and a heart location.
MetricRow score_target(const EvalSeries& s, std::size_t target, std::span<const float> registered,
                       const std::string& method,
                       std::optional<std::span<const float>> fields = std::nullopt);

/// Scores every target rotation; registered[t] is the result with frame t as target.
MetricReport evaluate_registered(const EvalSeries& s,
                                 const std::vector<std::vector<float>>& registered,
                                 const std::string& method,
                                 const std::vector<std::vector<float>>* fields = nullptr);

/// Plain mean of all frames except `target`, in frame order.
std::vector<float> unregistered_mean(const std::vector<std::vector<float>>& frames,
                                     std::size_t target);

}  // namespace groupreg
