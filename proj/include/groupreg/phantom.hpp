#pragma once

// Synthetic free-breathing series: a geometric chest/heart image, a
// respiratory motion curve, ground-truth displacement fields and additive
// white Gaussian noise.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

namespace groupreg {

struct BreathingSpec {
    double depth_px = 3.0;
    double period_frames = 5.0;     // frames per breathing cycle
    int shape_exponent = 1;         // n in sin^(2n)
    double hysteresis_phase = 0.4;  // radians, lag of the anterior-posterior axis
};

struct LesionSpec {
    bool enabled = true;
    double angle = 0.8;            // position on the myocardial ring, radians
    double radius_along = 0.035;   // semi-axes as fractions of the image size
    double radius_across = 0.02;
    double intensity_delta = 0.55;
};

struct PhantomSpec {
    std::size_t size = 192;
    std::size_t frames = 15;  // K + 1
    BreathingSpec breathing;
    LesionSpec lesion;
    std::uint64_t anatomy_seed = 0;
    std::uint64_t noise_seed = 0;
    std::optional<double> noise_snr_db;  // none: noiseless

    /// Throws ConfigError on frames < 2, depth < 0, period <= 0, n < 1 or size < 32.
    void validate() const;
};

/// (si, ap) amplitudes in pixels:
/// si = depth sin^(2n)(pi f / period), ap = 0.4 depth sin^(2n)(pi f / period + hysteresis).
struct BreathingAmplitude {
    double si = 0.0;
    double ap = 0.0;
};
BreathingAmplitude breathing_curve(const BreathingSpec& spec, std::size_t frame_index);

/// Placement of the anatomical structures for one seed, in pixels.
struct AnatomyLayout {
    double torso_row = 0, torso_col = 0, torso_radius_row = 0, torso_radius_col = 0;
    double lung_row = 0, lung_offset = 0, lung_radius_row = 0, lung_radius_col = 0;
    double heart_row = 0, heart_col = 0, heart_outer = 0, heart_inner = 0;
    double papillary_row = 0, papillary_col = 0, papillary_radius = 0;
    double lesion_row = 0, lesion_col = 0, lesion_along = 0, lesion_across = 0, lesion_angle = 0;
    double lesion_delta = 0;
};

namespace anatomy_intensity {
inline constexpr double background = 0.0;
inline constexpr double torso = 0.35;
inline constexpr double lung = 0.08;
inline constexpr double myocardium = 0.2;
inline constexpr double blood = 0.85;
inline constexpr double papillary = 0.25;
}  // namespace anatomy_intensity

AnatomyLayout anatomy_layout(std::uint64_t seed, std::size_t size, const LesionSpec& lesion);

/// True when (row, col) lies in the lesion ellipse (before clipping to the myocardium).
bool in_lesion_ellipse(const AnatomyLayout& a, double row, double col);

/// Row-major size x size image in [0,1], 4x4 supersampled per pixel.
std::vector<float> render_anatomy(const AnatomyLayout& a, std::size_t size, bool lesion);

/// anatomy(seed, size) with the default lesion.
std::vector<float> anatomy(std::uint64_t seed, std::size_t size, bool lesion = true);

struct GeneratedSeries {
    std::size_t size = 0;
    std::vector<float> clean_reference;              // t
    std::vector<std::vector<float>> clean_frames;    // K + 1
    std::vector<std::vector<float>> noisy_frames;    // K + 1 (copies of clean when noiseless)
    std::vector<std::vector<float>> gt_fields;       // [2,H,W] each, frame <- reference
    std::vector<double> snr_actual_db;               // per frame; empty when noiseless
    std::optional<double> snr_db;
    double noise_sigma = 0.0;
    double heart_row = 0, heart_col = 0, heart_radius = 0;
};

/// Displacement field of one frame: u_row = si (1 + 0.25 g), u_col = ap, with
/// g a unit Gaussian bump (sigma = size / 8) centred on the heart.
std::vector<float> breathing_field(const PhantomSpec& spec, const AnatomyLayout& a,
                                   std::size_t frame_index);

GeneratedSeries generate(const PhantomSpec& spec);

/// Pixels within the outer myocardial radius (plus margin) of the heart centre.
std::vector<unsigned char> heart_mask(std::size_t h, std::size_t w, double row, double col,
                                      double radius);

}  // namespace groupreg
