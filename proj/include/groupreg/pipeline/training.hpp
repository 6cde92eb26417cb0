#pragma once

// Preprocessing, noise/shift/intensity augmentation and the SGD training
// loop for the registration network.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "groupreg/image.hpp"
#include "groupreg/model.hpp"
#include "groupreg/pipeline/model_file.hpp"
#include "groupreg/pipeline/series_store.hpp"
#include "groupreg/random.hpp"

namespace groupreg {

/// Centre crop (or symmetric zero pad) of an h x w raster to size x size.
std::vector<float> crop_or_pad(std::span<const float> img, std::size_t h, std::size_t w,
                               std::size_t size);

struct Preprocessed {
    std::vector<float> image;
    Standardisation norm;
};

/// crop_or_pad to `size`, then zero mean / unit std over the frame.
Preprocessed preprocess(std::span<const float> img, std::size_t h, std::size_t w, std::size_t size);

/// Every raster of the series cropped or padded to size x size; fields and
/// the heart location follow the crop offset.
Series resize_series(const Series& s, std::size_t size);

struct AugmentConfig {
    double noise_center_db = 11.0;
    double noise_halfwidth_db = 3.5;
    long max_shift_px = 2;
    double intensity_jitter_frac = 0.1;

    void validate() const;
};

struct TrainConfig {
    Variant variant = Variant::aim_ed;
    std::size_t epochs = 2500;
    std::optional<double> lr_max;  // default: per similarity mode
    std::optional<double> lr_min;  // default: lr_max / 100
    double momentum = 0.9;
    std::size_t batch_size = 4;
    std::optional<double> grad_clip;  // global gradient-norm cap; default per mode, inf: off
    std::optional<double> lambda;  // default: per similarity mode
    std::size_t cc_window = 9;
    std::size_t k = 14;
    std::uint64_t seed = 0;
    AugmentConfig augment;
    std::vector<double> snr_eval_levels{11.0, 6.0, 1.0};

    /// The edge loss is about two orders of magnitude flatter than cc, so
    /// the two modes get different step sizes (3 for edge, 0.1 for cc) and
    /// gradient caps (0.05 and 1).
    double resolved_lr_max() const;
    double resolved_grad_clip() const;
    double resolved_lr_min() const { return lr_min ? *lr_min : resolved_lr_max() / 100.0; }
    LossConfig loss() const;
    /// ConfigError on epochs < 1, lr_max < lr_min < 0, batch_size < 1, k < 1.
    void validate() const;
};

double lr_schedule(std::size_t epoch, const TrainConfig& cfg);

/// Indices of the k sources used when `target` is the target frame: the k
/// frames following it cyclically, returned in frame order.
std::vector<std::size_t> source_indices(std::size_t frames, std::size_t target, std::size_t k);

/// Noiseless frames of a series, from the frames themselves or, for a noisy
/// series, from its reference and ground-truth fields. DataError otherwise.
std::vector<std::vector<float>> clean_frames(const Series& s);

/// Training example before augmentation: target_noisy and sources hold clean
/// raw-intensity frames, clean_reference the standardised clean target.
GroupInput<float> clean_group(const std::vector<std::vector<float>>& clean, std::size_t h,
                              std::size_t w, std::size_t target, std::size_t k);

struct AugmentRecord {
    double snr_db = 0.0;
    std::vector<std::pair<long, long>> shifts;  // per source (rows, cols)
    std::vector<double> gains;                  // target first, then sources
};

/// Fresh noise at an SNR drawn from center +- halfwidth (relative to the
/// clean target power) on the target and every source, integer shifts of the
/// sources, per-frame standardisation and a multiplicative intensity jitter.
/// The clean reference is passed through untouched.
GroupInput<float> augment(const GroupInput<float>& sample, const AugmentConfig& cfg, Rng& rng,
                          AugmentRecord* record = nullptr);

/// Network input for inference: standardised frames of the series.
GroupInput<float> inference_group(const Series& s, std::size_t target,
                                  const std::vector<std::size_t>& sources);

struct EpochLog {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;  // NaN without a validation set
    double lr = 0.0;
    double grad_norm = 0.0;  // largest pre-clip norm over the epoch's steps
};

struct TrainResult {
    RegistrationModel final_model;
    RegistrationModel best_model;
    std::size_t best_epoch = 0;
    std::vector<EpochLog> log;
};

struct DatasetSplit {
    std::vector<Series> train, val, test;
};

/// Consecutive 6:3:3 split of the series list (at least one training series).
DatasetSplit split_dataset(std::vector<Series> all);

/// Each epoch draws one target per training series, visits the series in a
/// seeded order and steps after every batch_size groups. Validation uses a
/// fixed noise draw at the centre SNR. Edge variants need `detector`.
/// Throws DataError on an empty set, NumericError on a non-finite loss.
TrainResult train(const std::vector<Series>& train_set, const std::vector<Series>& val_set,
                  const TrainConfig& cfg, const EdgeDetector<float>* detector,
                  const std::function<void(const EpochLog&)>& on_epoch = {});

/// Mean loss over the fixed validation draws of `val_set`.
double validation_loss(const RegistrationModel& model, const std::vector<Series>& val_set,
                       const TrainConfig& cfg, const EdgeDetector<float>* detector);

}  // namespace groupreg
