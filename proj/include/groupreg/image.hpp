#pragma once

// Plain raster helpers used outside the autodiff graph.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "groupreg/random.hpp"

namespace groupreg {

inline double mean_square(std::span<const float> x) {
    double acc = 0.0;
    for (float v : x) acc += static_cast<double>(v) * v;
    return x.empty() ? 0.0 : acc / static_cast<double>(x.size());
}

/// Standard deviation of white noise giving `snr_db` against `signal_power`.
inline double noise_sigma(double signal_power, double snr_db) {
    return std::sqrt(signal_power * std::pow(10.0, -snr_db / 10.0));
}

inline void add_gaussian_noise(std::span<float> x, double sigma, Rng& rng) {
    for (auto& v : x) v = static_cast<float>(v + sigma * rng.normal());
}

struct Standardisation {
    double mean = 0.0;
    double std = 1.0;
};

/// In-place zero mean / unit standard deviation; a constant frame keeps
/// std = 1 and maps to zeros.
inline Standardisation standardise(std::span<float> x) {
    Standardisation s;
    if (x.empty()) return s;
    double sum = 0.0;
    for (float v : x) sum += v;
    s.mean = sum / static_cast<double>(x.size());
    double ss = 0.0;
    for (float v : x) ss += (v - s.mean) * (v - s.mean);
    const double sd = std::sqrt(ss / static_cast<double>(x.size()));
    s.std = sd > 1e-12 ? sd : 1.0;
    for (auto& v : x) v = static_cast<float>((v - s.mean) / s.std);
    return s;
}

/// out(i,j) = in(i - dy, j - dx) with zero fill: content moves by (+dy, +dx).
inline std::vector<float> shift_image(std::span<const float> in, std::size_t h, std::size_t w,
                                      long dy, long dx) {
    std::vector<float> out(h * w, 0.0f);
    for (std::size_t i = 0; i < h; ++i) {
        const long si = static_cast<long>(i) - dy;
        if (si < 0 || si >= static_cast<long>(h)) continue;
        for (std::size_t j = 0; j < w; ++j) {
            const long sj = static_cast<long>(j) - dx;
            if (sj < 0 || sj >= static_cast<long>(w)) continue;
            out[i * w + j] = in[static_cast<std::size_t>(si) * w + static_cast<std::size_t>(sj)];
        }
    }
    return out;
}

}  // namespace groupreg
