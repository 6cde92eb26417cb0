#include "groupreg/phantom.hpp"

#include <cmath>
#include <numbers>

#include "groupreg/error.hpp"
#include "groupreg/image.hpp"
#include "groupreg/kernels.hpp"
#include "groupreg/random.hpp"

namespace groupreg {

void PhantomSpec::validate() const {
    if (size < 32) throw ConfigError("phantom size must be >= 32");
    if (frames < 2) throw ConfigError("phantom needs at least 2 frames");
    if (!(breathing.depth_px >= 0)) throw ConfigError("breathing depth must be >= 0");
    if (!(breathing.period_frames > 0)) throw ConfigError("breathing period must be > 0");
    if (breathing.shape_exponent < 1) throw ConfigError("breathing shape exponent must be >= 1");
    if (noise_snr_db && !std::isfinite(*noise_snr_db)) throw ConfigError("SNR must be finite");
}

BreathingAmplitude breathing_curve(const BreathingSpec& spec, std::size_t frame_index) {
    const double phase =
        std::numbers::pi * static_cast<double>(frame_index) / spec.period_frames;
    const int p = 2 * spec.shape_exponent;
    return {spec.depth_px * std::pow(std::sin(phase), p),
            0.4 * spec.depth_px * std::pow(std::sin(phase + spec.hysteresis_phase), p)};
}

AnatomyLayout anatomy_layout(std::uint64_t seed, std::size_t size, const LesionSpec& lesion) {
    Rng rng(seed, "anatomy");
    const double s = static_cast<double>(size);
    auto jitter = [&](double frac) { return 1.0 + rng.uniform(-frac, frac); };
    AnatomyLayout a;
    a.torso_row = 0.5 * s * jitter(0.03);
    a.torso_col = 0.5 * s * jitter(0.03);
    a.torso_radius_row = 0.36 * s * jitter(0.06);
    a.torso_radius_col = 0.45 * s * jitter(0.05);
    a.lung_row = 0.44 * s * jitter(0.05);
    a.lung_offset = 0.22 * s * jitter(0.08);
    a.lung_radius_row = 0.20 * s * jitter(0.10);
    a.lung_radius_col = 0.11 * s * jitter(0.10);
    a.heart_row = 0.55 * s * jitter(0.04);
    a.heart_col = 0.54 * s * jitter(0.04);
    a.heart_outer = 0.14 * s * jitter(0.10);
    a.heart_inner = a.heart_outer * rng.uniform(0.55, 0.68);
    const double pap_angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double pap_dist = a.heart_inner * 0.6;
    a.papillary_row = a.heart_row + pap_dist * std::sin(pap_angle);
    a.papillary_col = a.heart_col + pap_dist * std::cos(pap_angle);
    a.papillary_radius = std::max(1.0, 0.018 * s);
    const double ring = 0.5 * (a.heart_outer + a.heart_inner);
    a.lesion_angle = lesion.angle;
    a.lesion_row = a.heart_row + ring * std::sin(lesion.angle);
    a.lesion_col = a.heart_col + ring * std::cos(lesion.angle);
    a.lesion_along = lesion.radius_along * s;
    a.lesion_across = lesion.radius_across * s;
    a.lesion_delta = lesion.intensity_delta;
    return a;
}

bool in_lesion_ellipse(const AnatomyLayout& a, double row, double col) {
    // Long axis tangent to the myocardial ring.
    const double dy = row - a.lesion_row, dx = col - a.lesion_col;
    const double c = std::cos(a.lesion_angle), s = std::sin(a.lesion_angle);
    const double radial = dx * c + dy * s;
    const double tangential = -dx * s + dy * c;
    const double q = (tangential / a.lesion_along) * (tangential / a.lesion_along) +
                     (radial / a.lesion_across) * (radial / a.lesion_across);
    return q <= 1.0;
}

namespace {

bool in_ellipse(double row, double col, double cr, double cc, double rr, double rc) {
    const double y = (row - cr) / rr, x = (col - cc) / rc;
    return x * x + y * y <= 1.0;
}

double point_intensity(const AnatomyLayout& a, double row, double col, bool lesion) {
    namespace ai = anatomy_intensity;
    if (!in_ellipse(row, col, a.torso_row, a.torso_col, a.torso_radius_row, a.torso_radius_col))
        return ai::background;
    const double r = std::hypot(row - a.heart_row, col - a.heart_col);
    if (r <= a.heart_inner) {
        if (std::hypot(row - a.papillary_row, col - a.papillary_col) <= a.papillary_radius)
            return ai::papillary;
        return ai::blood;
    }
    if (r <= a.heart_outer) {
        if (lesion && in_lesion_ellipse(a, row, col))
            return ai::myocardium + a.lesion_delta;
        return ai::myocardium;
    }
    const double lr = a.lung_radius_row, lc = a.lung_radius_col;
    if (in_ellipse(row, col, a.lung_row, a.torso_col - a.lung_offset, lr, lc) ||
        in_ellipse(row, col, a.lung_row, a.torso_col + a.lung_offset, lr, lc))
        return ai::lung;
    return ai::torso;
}

}  // namespace

std::vector<float> render_anatomy(const AnatomyLayout& a, std::size_t size, bool lesion) {
    constexpr int sub = 4;
    std::vector<float> img(size * size);
    for (std::size_t i = 0; i < size; ++i)
        for (std::size_t j = 0; j < size; ++j) {
            double acc = 0;
            for (int p = 0; p < sub; ++p)
                for (int q = 0; q < sub; ++q) {
                    const double row = static_cast<double>(i) + (p + 0.5) / sub - 0.5;
                    const double col = static_cast<double>(j) + (q + 0.5) / sub - 0.5;
                    acc += point_intensity(a, row, col, lesion);
                }
            img[i * size + j] = static_cast<float>(acc / (sub * sub));
        }
    return img;
}

std::vector<float> anatomy(std::uint64_t seed, std::size_t size, bool lesion) {
    if (size < 32) throw ConfigError("anatomy size must be >= 32");
    return render_anatomy(anatomy_layout(seed, size, LesionSpec{}), size, lesion);
}

std::vector<float> breathing_field(const PhantomSpec& spec, const AnatomyLayout& a,
                                   std::size_t frame_index) {
    const std::size_t n = spec.size;
    const auto amp = breathing_curve(spec.breathing, frame_index);
    const double sigma = static_cast<double>(n) / 8.0;
    std::vector<float> u(2 * n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double dy = static_cast<double>(i) - a.heart_row;
            const double dx = static_cast<double>(j) - a.heart_col;
            const double g = std::exp(-(dy * dy + dx * dx) / (2 * sigma * sigma));
            u[i * n + j] = static_cast<float>(amp.si * (1.0 + 0.25 * g));
            u[n * n + i * n + j] = static_cast<float>(amp.ap);
        }
    return u;
}

GeneratedSeries generate(const PhantomSpec& spec) {
    spec.validate();
    const std::size_t n = spec.size, plane = n * n;
    const auto layout = anatomy_layout(spec.anatomy_seed, n, spec.lesion);

    GeneratedSeries out;
    out.size = n;
    out.snr_db = spec.noise_snr_db;
    out.heart_row = layout.heart_row;
    out.heart_col = layout.heart_col;
    out.heart_radius = layout.heart_outer;
    out.clean_reference = render_anatomy(layout, n, spec.lesion.enabled);

    const kernels::ImageGeometry g{1, 1, n, n};
    for (std::size_t f = 0; f < spec.frames; ++f) {
        auto u = breathing_field(spec, layout, f);
        std::vector<float> frame(plane);
        kernels::warp_bilinear_forward<float>(g, out.clean_reference, u, frame);
        out.gt_fields.push_back(std::move(u));
        out.clean_frames.push_back(std::move(frame));
    }

    out.noisy_frames = out.clean_frames;
    if (spec.noise_snr_db) {
        double power = 0;
        for (const auto& f : out.clean_frames) power += mean_square(f);
        power /= static_cast<double>(spec.frames);
        out.noise_sigma = noise_sigma(power, *spec.noise_snr_db);
        Rng rng(spec.noise_seed, "noise");
        for (std::size_t f = 0; f < spec.frames; ++f) {
            auto& x = out.noisy_frames[f];
            add_gaussian_noise(x, out.noise_sigma, rng);
            double noise = 0;
            for (std::size_t i = 0; i < plane; ++i) {
                const double d = static_cast<double>(x[i]) - out.clean_frames[f][i];
                noise += d * d;
            }
            noise /= static_cast<double>(plane);
            out.snr_actual_db.push_back(10.0 * std::log10(mean_square(out.clean_frames[f]) / noise));
        }
    }
    return out;
}

std::vector<unsigned char> heart_mask(std::size_t h, std::size_t w, double row, double col,
                                      double radius) {
    std::vector<unsigned char> m(h * w, 0);
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j)
            if (std::hypot(static_cast<double>(i) - row, static_cast<double>(j) - col) <=
                radius + 1.0)
                m[i * w + j] = 1;
    return m;
}

}  // namespace groupreg
