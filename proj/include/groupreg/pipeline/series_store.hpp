#pragma once

// On-disk image series: a directory with manifest.json and headerless
// little-endian f32 rasters.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "groupreg/metrics.hpp"
#include "groupreg/phantom.hpp"

namespace groupreg {

struct HeartLocation {
    double row = 0, col = 0, radius = 0;
};

struct Series {
    std::size_t height = 0, width = 0;
    std::vector<std::vector<float>> frames;
    std::vector<float> reference;                // empty when unknown
    std::vector<std::vector<float>> gt_fields;   // [2,H,W] per frame, or empty
    std::optional<double> snr_db;                // nominal; none for noiseless data
    std::optional<HeartLocation> heart;

    std::size_t frame_count() const { return frames.size(); }
    std::size_t plane() const { return height * width; }
    bool has_reference() const { return !reference.empty(); }
    bool has_gt_fields() const { return !gt_fields.empty(); }

    /// Throws DataError when rasters disagree with the declared size.
    void validate() const;
};

/// The noisy frames of a generated phantom with all its ground truth.
Series series_from_phantom(const GeneratedSeries& g);

/// The same series with its clean frames in place of the noisy ones.
Series clean_series_from_phantom(const GeneratedSeries& g);

EvalSeries eval_view(const Series& s);

void write_raw(const std::filesystem::path& file, std::span<const float> data);
/// Reads exactly `count` values; DataError on a missing or wrongly sized file.
std::vector<float> read_raw(const std::filesystem::path& file, std::size_t count);

/// Writes manifest.json, frame_%03d.raw, reference.raw and gt_field_%03d.raw.
/// Throws DataError when the directory cannot be created or written.
void write_series(const std::filesystem::path& dir, const Series& s);
Series read_series(const std::filesystem::path& dir);

/// A dataset root is either one series directory or a directory of series
/// directories; returned in lexicographic order of their paths.
std::vector<std::filesystem::path> list_series(const std::filesystem::path& root);
std::vector<Series> read_dataset(const std::filesystem::path& root);

}  // namespace groupreg
