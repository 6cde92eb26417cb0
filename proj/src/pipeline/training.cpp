#include "groupreg/pipeline/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "groupreg/error.hpp"
#include "groupreg/kernels.hpp"
#include "groupreg/optim.hpp"

namespace groupreg {

namespace {

// Offset of the output window inside the input (negative when padding).
std::ptrdiff_t crop_offset(std::size_t from, std::size_t to) {
    return (static_cast<std::ptrdiff_t>(from) - static_cast<std::ptrdiff_t>(to)) / 2;
}

std::vector<float> crop_plane(std::span<const float> img, std::size_t h, std::size_t w,
                              std::size_t size) {
    const auto oy = crop_offset(h, size), ox = crop_offset(w, size);
    std::vector<float> out(size * size, 0.0f);
    for (std::size_t i = 0; i < size; ++i) {
        const auto si = static_cast<std::ptrdiff_t>(i) + oy;
        if (si < 0 || si >= static_cast<std::ptrdiff_t>(h)) continue;
        for (std::size_t j = 0; j < size; ++j) {
            const auto sj = static_cast<std::ptrdiff_t>(j) + ox;
            if (sj < 0 || sj >= static_cast<std::ptrdiff_t>(w)) continue;
            out[i * size + j] = img[static_cast<std::size_t>(si) * w + static_cast<std::size_t>(sj)];
        }
    }
    return out;
}

Tensor image_tensor(std::vector<float> v, std::size_t n, std::size_t h, std::size_t w) {
    return Tensor({n, 1, h, w}, std::move(v));
}

void require_finite(double loss, const std::string& where) {
    if (!std::isfinite(loss)) throw NumericError("non-finite training loss at " + where);
}

}  // namespace

std::vector<float> crop_or_pad(std::span<const float> img, std::size_t h, std::size_t w,
                               std::size_t size) {
    if (img.size() != h * w) throw DimensionError("crop_or_pad: raster is not h x w");
    if (size == 0) throw ConfigError("crop_or_pad: size must be positive");
    return crop_plane(img, h, w, size);
}

Preprocessed preprocess(std::span<const float> img, std::size_t h, std::size_t w, std::size_t size) {
    Preprocessed p;
    p.image = crop_or_pad(img, h, w, size);
    p.norm = standardise(p.image);
    return p;
}

Series resize_series(const Series& s, std::size_t size) {
    if (s.height == size && s.width == size) return s;
    Series out = s;
    out.height = out.width = size;
    for (auto& f : out.frames) f = crop_plane(f, s.height, s.width, size);
    if (s.has_reference()) out.reference = crop_plane(s.reference, s.height, s.width, size);
    const std::size_t p = s.plane();
    for (auto& g : out.gt_fields) {
        auto rows = crop_plane(std::span<const float>(g).subspan(0, p), s.height, s.width, size);
        auto cols = crop_plane(std::span<const float>(g).subspan(p, p), s.height, s.width, size);
        rows.insert(rows.end(), cols.begin(), cols.end());
        g = std::move(rows);
    }
    if (out.heart) {
        out.heart->row -= static_cast<double>(crop_offset(s.height, size));
        out.heart->col -= static_cast<double>(crop_offset(s.width, size));
    }
    return out;
}

void AugmentConfig::validate() const {
    if (!(noise_halfwidth_db >= 0)) throw ConfigError("augment: noise halfwidth must be >= 0");
    if (std::isnan(noise_center_db)) throw ConfigError("augment: noise centre must be a number");
    if (max_shift_px < 0) throw ConfigError("augment: max shift must be >= 0");
    if (!(intensity_jitter_frac >= 0 && intensity_jitter_frac < 1))
        throw ConfigError("augment: intensity jitter must lie in [0, 1)");
}

LossConfig TrainConfig::loss() const {
    auto l = LossConfig::defaults_for(similarity_of(variant));
    if (lambda) l.lambda = *lambda;
    l.cc_window = cc_window;
    l.validate();
    return l;
}

double TrainConfig::resolved_lr_max() const {
    if (lr_max) return *lr_max;
    return similarity_of(variant) == SimilarityMode::edge ? 3.0 : 0.1;
}

double TrainConfig::resolved_grad_clip() const {
    if (grad_clip) return *grad_clip;
    return similarity_of(variant) == SimilarityMode::edge ? 0.05 : 1.0;
}

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
    const double lo = resolved_lr_min();
    const double hi = resolved_lr_max();
    if (!(hi >= lo && lo >= 0) || !std::isfinite(hi))
        throw ConfigError("train: need lr_max >= lr_min >= 0");
    if (!(momentum >= 0 && momentum < 1)) throw ConfigError("train: momentum must lie in [0, 1)");
    if (batch_size < 1) throw ConfigError("train: batch size must be >= 1");
    if (k < 1) throw ConfigError("train: K must be >= 1");
    if (!(resolved_grad_clip() > 0)) throw ConfigError("train: grad_clip must be positive");
    augment.validate();
    loss();
}

double lr_schedule(std::size_t epoch, const TrainConfig& cfg) {
    return cosine_lr(epoch, cfg.epochs, cfg.resolved_lr_max(), cfg.resolved_lr_min());
}

std::vector<std::size_t> source_indices(std::size_t frames, std::size_t target, std::size_t k) {
    if (target >= frames)
        throw DimensionError("target index " + std::to_string(target) + " outside 0.." +
                             std::to_string(frames - 1));
    if (k < 1 || k + 1 > frames)
        throw DimensionError("K = " + std::to_string(k) + " needs at least K + 1 frames, series has " +
                             std::to_string(frames));
    std::vector<std::size_t> idx;
    for (std::size_t d = 1; d <= k; ++d) idx.push_back((target + d) % frames);
    std::sort(idx.begin(), idx.end());
    return idx;
}

std::vector<std::vector<float>> clean_frames(const Series& s) {
    if (!s.snr_db) return s.frames;
    if (!s.has_reference() || !s.has_gt_fields())
        throw DataError("training needs noiseless frames or a clean reference with ground-truth fields");
    const auto e = eval_view(s);
    std::vector<std::vector<float>> out;
    for (std::size_t f = 0; f < s.frame_count(); ++f) out.push_back(reference_for_target(e, f));
    return out;
}

GroupInput<float> clean_group(const std::vector<std::vector<float>>& clean, std::size_t h,
                              std::size_t w, std::size_t target, std::size_t k) {
    const auto src = source_indices(clean.size(), target, k);
    std::vector<float> sources;
    for (auto j : src) sources.insert(sources.end(), clean[j].begin(), clean[j].end());
    auto ref = clean[target];
    standardise(ref);
    GroupInput<float> g;
    g.target_noisy = image_tensor(clean[target], 1, h, w);
    g.sources = image_tensor(std::move(sources), src.size(), h, w);
    g.clean_reference = image_tensor(std::move(ref), 1, h, w);
    return g;
}

GroupInput<float> augment(const GroupInput<float>& sample, const AugmentConfig& cfg, Rng& rng,
                          AugmentRecord* record) {
    const std::size_t k = sample.k(), h = sample.sources.extent(2), w = sample.sources.extent(3);
    const std::size_t plane = h * w;
    AugmentRecord rec;
    rec.snr_db = cfg.noise_halfwidth_db > 0
                     ? rng.uniform(cfg.noise_center_db - cfg.noise_halfwidth_db,
                                   cfg.noise_center_db + cfg.noise_halfwidth_db)
                     : cfg.noise_center_db;
    const double sigma = noise_sigma(mean_square(sample.target_noisy.data()), rec.snr_db);

    auto finish = [&](std::vector<float>& frame) {
        add_gaussian_noise(frame, sigma, rng);
        standardise(frame);
        const double gain =
            cfg.intensity_jitter_frac > 0
                ? 1.0 + rng.uniform(-cfg.intensity_jitter_frac, cfg.intensity_jitter_frac)
                : 1.0;
        for (auto& v : frame) v = static_cast<float>(v * gain);
        rec.gains.push_back(gain);
    };

    std::vector<float> target(sample.target_noisy.data().begin(), sample.target_noisy.data().end());
    finish(target);
    std::vector<float> sources;
    sources.reserve(k * plane);
    for (std::size_t j = 0; j < k; ++j) {
        const auto src = sample.sources.data().subspan(j * plane, plane);
        long dy = 0, dx = 0;
        if (cfg.max_shift_px > 0) {
            dy = rng.uniform_int(-cfg.max_shift_px, cfg.max_shift_px);
            dx = rng.uniform_int(-cfg.max_shift_px, cfg.max_shift_px);
        }
        auto frame = (dy == 0 && dx == 0) ? std::vector<float>(src.begin(), src.end())
                                          : shift_image(src, h, w, dy, dx);
        rec.shifts.emplace_back(dy, dx);
        finish(frame);
        sources.insert(sources.end(), frame.begin(), frame.end());
    }
    if (record) *record = std::move(rec);
    GroupInput<float> out;
    out.target_noisy = image_tensor(std::move(target), 1, h, w);
    out.sources = image_tensor(std::move(sources), k, h, w);
    out.clean_reference = sample.clean_reference;
    return out;
}

GroupInput<float> inference_group(const Series& s, std::size_t target,
                                  const std::vector<std::size_t>& sources) {
    if (target >= s.frame_count()) throw DimensionError("inference_group: bad target index");
    auto t = s.frames[target];
    standardise(t);
    std::vector<float> src;
    for (auto j : sources) {
        if (j >= s.frame_count() || j == target) throw DimensionError("inference_group: bad source index");
        auto f = s.frames[j];
        standardise(f);
        src.insert(src.end(), f.begin(), f.end());
    }
    GroupInput<float> g;
    g.target_noisy = image_tensor(std::move(t), 1, s.height, s.width);
    g.sources = image_tensor(std::move(src), sources.size(), s.height, s.width);
    g.clean_reference = Tensor({0}, {});
    return g;
}

DatasetSplit split_dataset(std::vector<Series> all) {
    if (all.empty()) throw DataError("split_dataset: no series");
    const std::size_t n = all.size();
    std::size_t n_val = n / 4, n_test = n / 4;
    std::size_t n_train = n - n_val - n_test;
    DatasetSplit s;
    for (std::size_t i = 0; i < n; ++i) {
        auto& dst = i < n_train ? s.train : (i < n_train + n_val ? s.val : s.test);
        dst.push_back(std::move(all[i]));
    }
    return s;
}

namespace {

struct ValidationItem {
    GroupInput<float> input;
};

// One fixed noisy group per validation series.
std::vector<ValidationItem> validation_items(const std::vector<Series>& val_set,
                                             const TrainConfig& cfg) {
    std::vector<ValidationItem> items;
    AugmentConfig fixed;
    fixed.noise_center_db = cfg.augment.noise_center_db;
    fixed.noise_halfwidth_db = 0;
    fixed.max_shift_px = 0;
    fixed.intensity_jitter_frac = 0;
    for (std::size_t i = 0; i < val_set.size(); ++i) {
        const auto& s = val_set[i];
        const auto clean = clean_frames(s);
        const std::size_t target = i % s.frame_count();
        Rng rng(derive_seed(cfg.seed, "validation", i));
        items.push_back({augment(clean_group(clean, s.height, s.width, target, cfg.k), fixed, rng)});
    }
    return items;
}

double mean_validation_loss(const RegistrationNet<float>& net, const std::vector<ValidationItem>& items,
                            const LossConfig& loss, Variant variant, const EdgeDetector<float>* det) {
    if (items.empty()) return std::numeric_limits<double>::quiet_NaN();
    NoGradGuard no_grad;
    double total = 0;
    for (const auto& it : items) total += training_loss(net, it.input, loss, variant, det).item();
    return total / static_cast<double>(items.size());
}

void check_training_inputs(const std::vector<Series>& train_set, const TrainConfig& cfg,
                           const EdgeDetector<float>* detector) {
    cfg.validate();
    if (train_set.empty()) throw DataError("train: empty training set");
    if (similarity_of(cfg.variant) == SimilarityMode::edge && (!detector || !detector->ready()))
        throw ConfigError("train: variant " + to_string(cfg.variant) + " needs an edge detector");
    for (const auto& s : train_set) {
        s.validate();
        if (s.frame_count() < cfg.k + 1)
            throw DataError("train: K = " + std::to_string(cfg.k) + " needs series with at least " +
                            std::to_string(cfg.k + 1) + " frames");
        if (s.height != train_set.front().height || s.width != train_set.front().width)
            throw DataError("train: all series must share one image size");
    }
}

}  // namespace

double validation_loss(const RegistrationModel& model, const std::vector<Series>& val_set,
                       const TrainConfig& cfg, const EdgeDetector<float>* detector) {
    return mean_validation_loss(model.net, validation_items(val_set, cfg), model.loss, model.variant,
                                detector);
}

TrainResult train(const std::vector<Series>& train_set, const std::vector<Series>& val_set,
                  const TrainConfig& cfg, const EdgeDetector<float>* detector,
                  const std::function<void(const EpochLog&)>& on_epoch) {
    check_training_inputs(train_set, cfg, detector);
    for (const auto& s : val_set)
        if (s.frame_count() < cfg.k + 1) throw DataError("train: validation series has too few frames");
    const LossConfig loss = cfg.loss();
    const std::size_t h = train_set.front().height, w = train_set.front().width;

    std::vector<std::vector<std::vector<float>>> clean;
    for (const auto& s : train_set) clean.push_back(clean_frames(s));
    const auto val_items = validation_items(val_set, cfg);

    TrainResult result;
    RegistrationModel model;
    model.net = RegistrationNet<float>::initialise(derive_seed(cfg.seed, "init"));
    model.variant = cfg.variant;
    model.loss = loss;
    model.k = cfg.k;
    result.best_model = model;
    double best_val = std::numeric_limits<double>::infinity();

    const auto params = model.net.parameters();
    SgdMomentum<float> opt(params, cfg.momentum);
    Rng data_rng(cfg.seed, "data");
    Rng aug_rng(cfg.seed, "augment");
    std::vector<std::size_t> order(train_set.size());

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = lr_schedule(epoch, cfg);
        std::iota(order.begin(), order.end(), 0);
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[static_cast<std::size_t>(data_rng.uniform_int(0, static_cast<std::int64_t>(i - 1)))]);

        double epoch_loss = 0, grad_norm = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            const float scale = 1.0f / static_cast<float>(stop - start);
            opt.zero_grad();
            for (std::size_t b = start; b < stop; ++b) {
                const std::size_t si = order[b];
                const std::size_t frames = clean[si].size();
                const auto target = static_cast<std::size_t>(
                    data_rng.uniform_int(0, static_cast<std::int64_t>(frames - 1)));
                const auto sample = augment(clean_group(clean[si], h, w, target, cfg.k), cfg.augment, aug_rng);
                auto l = training_loss(model.net, sample, loss, cfg.variant, detector);
                const double value = l.item();
                require_finite(value, "epoch " + std::to_string(epoch) + ", batch " +
                                          std::to_string(start / cfg.batch_size) + ", series " +
                                          std::to_string(si) + ", target " + std::to_string(target));
                epoch_loss += value;
                ops::scalar_mul(l, scale).backward();
            }
            grad_norm = std::max(grad_norm, clip_grad_norm(params, cfg.resolved_grad_clip()));
            opt.step(lr);
        }

        EpochLog entry{epoch, epoch_loss / static_cast<double>(order.size()),
                       mean_validation_loss(model.net, val_items, loss, cfg.variant, detector), lr,
                       grad_norm};
        if (!val_items.empty() && !std::isfinite(entry.val_loss))
            throw NumericError("non-finite validation loss at epoch " + std::to_string(epoch));
        if (val_items.empty() || entry.val_loss < best_val) {
            best_val = val_items.empty() ? best_val : entry.val_loss;
            result.best_epoch = epoch;
            result.best_model.net = model.net.cast_to<float>(false);
        }
        result.log.push_back(entry);
        if (on_epoch) on_epoch(entry);
    }
    model.net.set_trainable(false);
    result.final_model = std::move(model);
    return result;
}

}  // namespace groupreg
