#include "groupreg/edge.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "groupreg/error.hpp"
#include "groupreg/image.hpp"
#include "groupreg/ops.hpp"
#include "groupreg/optim.hpp"

namespace groupreg {

template <typename Real>
BasicTensor<Real> sobel_edges(const BasicTensor<Real>& img, double eps) {
    if (img.dim() != 4 || img.extent(1) != 1)
        throw DimensionError("sobel_edges: expected [N,1,H,W], got " + to_string(img.shape()));
    const std::size_t n = img.extent(0), h = img.extent(2), w = img.extent(3);
    if (h < 3 || w < 3) throw DimensionError("sobel_edges: needs H,W >= 3");
    const auto src = img.data();
    std::vector<Real> out(img.size());
    const double floor = std::sqrt(eps);
    for (std::size_t b = 0; b < n; ++b) {
        const Real* p = src.data() + b * h * w;
        Real* o = out.data() + b * h * w;
        auto at = [&](long i, long j) {
            i = std::clamp(i, 0L, static_cast<long>(h) - 1);
            j = std::clamp(j, 0L, static_cast<long>(w) - 1);
            return static_cast<double>(p[static_cast<std::size_t>(i) * w + static_cast<std::size_t>(j)]);
        };
        double peak = 0.0;
        for (std::size_t i = 0; i < h; ++i)
            for (std::size_t j = 0; j < w; ++j) {
                const long y = static_cast<long>(i), x = static_cast<long>(j);
                const double gx = (at(y - 1, x + 1) + 2 * at(y, x + 1) + at(y + 1, x + 1)) -
                                  (at(y - 1, x - 1) + 2 * at(y, x - 1) + at(y + 1, x - 1));
                const double gy = (at(y + 1, x - 1) + 2 * at(y + 1, x) + at(y + 1, x + 1)) -
                                  (at(y - 1, x - 1) + 2 * at(y - 1, x) + at(y - 1, x + 1));
                const double m = std::sqrt(gx * gx + gy * gy + eps) - floor;
                o[i * w + j] = static_cast<Real>(m);
                peak = std::max(peak, m);
            }
        for (std::size_t i = 0; i < h * w; ++i)
            o[i] = peak <= eps ? Real(0) : static_cast<Real>(o[i] / peak);
    }
    return BasicTensor<Real>(img.shape(), std::move(out));
}

template <typename Real>
BasicTensor<Real> binary_edge_target(const BasicTensor<Real>& clean, double threshold) {
    auto e = sobel_edges(clean);
    std::vector<Real> v(e.data().begin(), e.data().end());
    for (auto& x : v) x = x >= static_cast<Real>(threshold) ? Real(1) : Real(0);
    return BasicTensor<Real>(e.shape(), std::move(v));
}

template <typename Real>
EdgeDetector<Real> EdgeDetector<Real>::initialise(std::uint64_t seed) {
    EdgeDetector d;
    Rng rng(seed, "edge-init");
    const std::size_t widths[] = {1, kWidth, kWidth, kWidth, 1};
    for (std::size_t k = 0; k < 4; ++k) {
        auto l = make_conv_layer<Real>("edge" + std::to_string(k), widths[k], widths[k + 1]);
        he_init(l, rng, kSlope);
        d.layers_.push_back(std::move(l));
    }
    return d;
}

template <typename Real>
void EdgeDetector<Real>::set_input_normalisation(double mean, double std) {
    if (!(std > 0) || !std::isfinite(mean)) throw ConfigError("edge detector: bad normalisation");
    input_mean_ = mean;
    input_std_ = std;
}

template <typename Real>
BasicTensor<Real> EdgeDetector<Real>::detect(const BasicTensor<Real>& img) const {
    if (!ready()) throw ConfigError("edge detector is not trained or loaded");
    if (img.dim() != 4 || img.extent(1) != 1)
        throw DimensionError("detect: expected [N,1,H,W], got " + to_string(img.shape()));
    auto x = ops::scalar_mul(ops::add_scalar(img, static_cast<Real>(-input_mean_)),
                             static_cast<Real>(1.0 / input_std_));
    for (std::size_t k = 0; k < layers_.size(); ++k) {
        x = layers_[k].forward(x);
        if (k + 1 < layers_.size()) x = ops::leaky_relu(x, static_cast<Real>(kSlope));
    }
    return ops::sigmoid(x);
}

template <typename Real>
void EdgeDetector<Real>::set_trainable(bool on) {
    for (auto& l : layers_) {
        l.weight.set_requires_grad(on);
        l.bias.set_requires_grad(on);
    }
}

template <typename Real>
std::vector<BasicTensor<Real>*> EdgeDetector<Real>::parameters() {
    std::vector<BasicTensor<Real>*> out;
    for (auto& l : layers_) {
        out.push_back(&l.weight);
        out.push_back(&l.bias);
    }
    return out;
}

template <typename Real>
std::size_t EdgeDetector<Real>::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.parameter_count();
    return n;
}

template class EdgeDetector<float>;
template class EdgeDetector<double>;
template BasicTensor<float> sobel_edges(const BasicTensor<float>&, double);
template BasicTensor<double> sobel_edges(const BasicTensor<double>&, double);
template BasicTensor<float> binary_edge_target(const BasicTensor<float>&, double);
template BasicTensor<double> binary_edge_target(const BasicTensor<double>&, double);

namespace {

void require_single_images(const std::vector<BasicTensor<float>>& images) {
    if (images.empty()) throw DataError("edge detector training: empty dataset");
    for (const auto& im : images)
        if (im.dim() != 4 || im.extent(0) != 1 || im.extent(1) != 1 ||
            im.shape() != images.front().shape())
            throw DimensionError("edge detector training: images must share one [1,1,H,W] shape");
}

// Noisy, standardised copy of a clean raster.
std::vector<float> noisy_input(std::span<const float> clean, double snr_db, Rng& rng) {
    std::vector<float> v(clean.begin(), clean.end());
    add_gaussian_noise(v, noise_sigma(mean_square(clean), snr_db), rng);
    standardise(v);
    return v;
}

void flip(std::vector<float>& v, std::size_t h, std::size_t w, bool rows, bool cols) {
    std::vector<float> out(v.size());
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j)
            out[i * w + j] = v[(rows ? h - 1 - i : i) * w + (cols ? w - 1 - j : j)];
    v.swap(out);
}

}  // namespace

EdgeDetector<float> train_edge_detector(const std::vector<BasicTensor<float>>& clean_images,
                                        const EdgeTrainConfig& cfg) {
    require_single_images(clean_images);
    if (!(cfg.snr_lo_db < cfg.snr_hi_db)) throw ConfigError("edge training: need snr_lo < snr_hi");
    if (cfg.epochs == 0 || cfg.batch_size == 0) throw ConfigError("edge training: empty schedule");

    const std::size_t h = clean_images.front().extent(2), w = clean_images.front().extent(3);
    std::vector<std::vector<float>> targets;
    for (const auto& im : clean_images) {
        const auto t = cfg.binary_target ? binary_edge_target(im, cfg.threshold) : sobel_edges(im);
        targets.emplace_back(t.data().begin(), t.data().end());
    }

    auto detector = EdgeDetector<float>::initialise(cfg.seed);
    // Training inputs are standardised frames plus a uniform shift in
    // [-s, s], so their pooled spread is sqrt(1 + s^2 / 3).
    const double s = cfg.max_intensity_shift;
    detector.set_input_normalisation(0.0, std::sqrt(1.0 + s * s / 3.0));
    // Start the sigmoid at the mean target so the sparse edges do not push
    // every output towards zero first.
    double mean_target = 0;
    for (const auto& t : targets) mean_target += std::accumulate(t.begin(), t.end(), 0.0);
    mean_target /= static_cast<double>(targets.size() * h * w);
    mean_target = std::clamp(mean_target, 1e-3, 1 - 1e-3);
    detector.layers().back().bias.mutable_data()[0] =
        static_cast<float>(std::log(mean_target / (1 - mean_target)));
    detector.set_trainable(true);
    Adam<float> opt(detector.parameters(), cfg.momentum);
    Rng rng(cfg.seed, "edge-train");

    const std::size_t count = clean_images.size();
    const std::size_t steps = (count + cfg.batch_size - 1) / cfg.batch_size;
    std::vector<std::size_t> order(count);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = cosine_lr(epoch, cfg.epochs, cfg.lr_max, cfg.lr_min);
        for (std::size_t i = 0; i < count; ++i) order[i] = i;
        for (std::size_t i = count; i > 1; --i)
            std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(0, long(i) - 1))]);
        for (std::size_t step = 0; step < steps; ++step) {
            const std::size_t begin = step * cfg.batch_size;
            const std::size_t end = std::min(count, begin + cfg.batch_size);
            std::vector<float> in, tgt;
            for (std::size_t k = begin; k < end; ++k) {
                const std::size_t idx = order[k];
                auto x = noisy_input(clean_images[idx].data(), rng.uniform(cfg.snr_lo_db, cfg.snr_hi_db), rng);
                const float shift = static_cast<float>(rng.uniform(-cfg.max_intensity_shift, cfg.max_intensity_shift));
                for (auto& v : x) v += shift;
                auto y = targets[idx];
                const bool fr = rng.uniform() < 0.5, fc = rng.uniform() < 0.5;
                flip(x, h, w, fr, fc);
                flip(y, h, w, fr, fc);
                in.insert(in.end(), x.begin(), x.end());
                tgt.insert(tgt.end(), y.begin(), y.end());
            }
            const std::size_t b = end - begin;
            Tensor input(Shape{b, 1, h, w}, std::move(in));
            Tensor target(Shape{b, 1, h, w}, std::move(tgt));
            opt.zero_grad();
            auto loss = ops::mean_all(ops::square(ops::sub(detector.detect(input), target)));
            if (!std::isfinite(loss.item()))
                throw NumericError("edge training: non-finite loss at epoch " + std::to_string(epoch));
            loss.backward();
            opt.step(lr);
        }
    }
    detector.set_trainable(false);
    return detector;
}

EdgeErrors edge_robustness(const EdgeDetector<float>& detector,
                           const std::vector<BasicTensor<float>>& clean_images, double snr_db,
                           std::uint64_t seed) {
    require_single_images(clean_images);
    Rng rng(seed, "edge-eval");
    EdgeErrors acc;
    NoGradGuard no_grad;
    for (const auto& im : clean_images) {
        const auto ref = sobel_edges(im);
        std::vector<float> raw(im.data().begin(), im.data().end());
        add_gaussian_noise(raw, noise_sigma(mean_square(im.data()), snr_db), rng);
        std::vector<float> standardised = raw;
        standardise(standardised);
        const auto det = detector.detect(Tensor(im.shape(), standardised));
        const auto sob = sobel_edges(Tensor(im.shape(), raw));
        double d = 0, s = 0;
        for (std::size_t i = 0; i < ref.size(); ++i) {
            d += (det.data()[i] - ref.data()[i]) * (det.data()[i] - ref.data()[i]);
            s += (sob.data()[i] - ref.data()[i]) * (sob.data()[i] - ref.data()[i]);
        }
        acc.detector_mse += d / static_cast<double>(ref.size());
        acc.sobel_mse += s / static_cast<double>(ref.size());
    }
    acc.detector_mse /= static_cast<double>(clean_images.size());
    acc.sobel_mse /= static_cast<double>(clean_images.size());
    return acc;
}

}  // namespace groupreg
