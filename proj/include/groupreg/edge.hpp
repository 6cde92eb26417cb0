#pragma once

// Edge maps: a classical Sobel magnitude and a small trainable CNN detector
// that stays reliable on noisy images.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "groupreg/layers.hpp"
#include "groupreg/tensor.hpp"

namespace groupreg {

/// Sobel gradient magnitude sqrt(Gx^2 + Gy^2 + eps) - sqrt(eps) of each
/// [N,1,H,W] plane, scaled to [0,1] by the plane maximum (a plane whose
/// maximum is <= eps maps to zeros). Borders replicate the edge pixel, so a
/// constant image has no response anywhere. Not differentiable.
template <typename Real>
BasicTensor<Real> sobel_edges(const BasicTensor<Real>& img, double eps = 1e-5);

/// Sobel target thresholded to {0,1}.
template <typename Real>
BasicTensor<Real> binary_edge_target(const BasicTensor<Real>& clean, double threshold);

/// 4 conv layers (1-16-16-16-1, 3x3), leaky relu between, sigmoid output.
/// Inputs are standardised by constants fixed at training time.
template <typename Real>
class EdgeDetector {
public:
    static constexpr double kSlope = 0.2;
    static constexpr std::size_t kWidth = 16;

    EdgeDetector() = default;

    /// Untrained detector with He-initialised weights.
    static EdgeDetector initialise(std::uint64_t seed);

    bool ready() const { return !layers_.empty(); }

    /// Edge probability map of an [N,1,H,W] batch; differentiable in img.
    BasicTensor<Real> detect(const BasicTensor<Real>& img) const;

    std::vector<ConvLayer<Real>>& layers() { return layers_; }
    const std::vector<ConvLayer<Real>>& layers() const { return layers_; }
    double input_mean() const { return input_mean_; }
    double input_std() const { return input_std_; }
    void set_input_normalisation(double mean, double std);

    /// Freezes or unfreezes every parameter.
    void set_trainable(bool on);
    std::vector<BasicTensor<Real>*> parameters();
    std::size_t parameter_count() const;

    template <typename To>
    EdgeDetector<To> cast_to() const {
        EdgeDetector<To> out;
        for (const auto& l : layers_) out.layers().push_back(cast_layer<To>(l, false));
        out.set_input_normalisation(input_mean_, input_std_);
        return out;
    }

private:
    std::vector<ConvLayer<Real>> layers_;
    double input_mean_ = 0.0;
    double input_std_ = 1.0;
};

template <typename Real>
BasicTensor<Real> detect(const EdgeDetector<Real>& detector, const BasicTensor<Real>& img) {
    return detector.detect(img);
}

struct EdgeTrainConfig {
    double snr_lo_db = 1.0;
    double snr_hi_db = 23.0;
    bool binary_target = false;  // regress the Sobel map itself unless set
    double threshold = 0.2;
    std::size_t epochs = 100;
    std::size_t batch_size = 8;
    double lr_max = 0.005;  // Adam step size
    double lr_min = 0.00005;
    double momentum = 0.9;  // Adam beta1
    double max_intensity_shift = 0.5;  // in standardised units
    std::uint64_t seed = 0;
};

/// Supervised training on clean [1,1,H,W] images: inputs are noisy (SNR drawn
/// uniformly in [snr_lo, snr_hi] dB) and standardised, targets are the
/// Sobel maps of the clean image, optionally binarised. Deterministic given
/// the seed.
EdgeDetector<float> train_edge_detector(const std::vector<BasicTensor<float>>& clean_images,
                                        const EdgeTrainConfig& cfg);

/// Edge-map error of one image at one noise level.
struct EdgeErrors {
    double detector_mse = 0.0;  // MSE(detect(noisy), sobel(clean))
    double sobel_mse = 0.0;     // MSE(sobel(noisy), sobel(clean))
};

/// Averages EdgeErrors over images with fresh noise at snr_db.
EdgeErrors edge_robustness(const EdgeDetector<float>& detector,
                           const std::vector<BasicTensor<float>>& clean_images, double snr_db,
                           std::uint64_t seed);

}  // namespace groupreg
