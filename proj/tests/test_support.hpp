#pragma once

// Shared helpers for the unit tests: random tensors and independent loop oracles.

#include <cstddef>
#include <vector>

#include "groupreg/random.hpp"
#include "groupreg/tensor.hpp"

namespace groupreg::testing {

template <typename Real>
BasicTensor<Real> random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0,
                                double hi = 1.0, bool requires_grad = false) {
    Rng rng(seed);
    std::vector<Real> v(numel(shape));
    for (auto& x : v) x = static_cast<Real>(rng.uniform(lo, hi));
    return BasicTensor<Real>(std::move(shape), std::move(v), requires_grad);
}

/// Values kept at least `margin` away from zero (leaky-relu / abs kinks).
inline BasicTensor<double> random_away_from_zero(Shape shape, std::uint64_t seed,
                                                 double margin = 0.05) {
    Rng rng(seed);
    std::vector<double> v(numel(shape));
    for (auto& x : v) {
        do {
            x = rng.uniform(-1.0, 1.0);
        } while (std::abs(x) < margin);
    }
    return BasicTensor<double>(std::move(shape), std::move(v));
}

/// Direct nested-loop cross-correlation with zero padding.
inline std::vector<double> conv_oracle(const std::vector<double>& in, std::size_t n,
                                       std::size_t c, std::size_t h, std::size_t w,
                                       const std::vector<double>& k, std::size_t f,
                                       std::size_t kh, std::size_t kw,
                                       const std::vector<double>& bias, std::size_t stride,
                                       std::size_t pad) {
    const std::size_t ho = (h + 2 * pad - kh) / stride + 1;
    const std::size_t wo = (w + 2 * pad - kw) / stride + 1;
    std::vector<double> out(n * f * ho * wo, 0.0);
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t o = 0; o < f; ++o)
            for (std::size_t y = 0; y < ho; ++y)
                for (std::size_t x = 0; x < wo; ++x) {
                    double acc = bias.empty() ? 0.0 : bias[o];
                    for (std::size_t ci = 0; ci < c; ++ci)
                        for (std::size_t dy = 0; dy < kh; ++dy)
                            for (std::size_t dx = 0; dx < kw; ++dx) {
                                const long iy = long(y * stride + dy) - long(pad);
                                const long ix = long(x * stride + dx) - long(pad);
                                if (iy < 0 || ix < 0 || iy >= long(h) || ix >= long(w)) continue;
                                acc += k[((o * c + ci) * kh + dy) * kw + dx] *
                                       in[((b * c + ci) * h + std::size_t(iy)) * w + std::size_t(ix)];
                            }
                    out[((b * f + o) * ho + y) * wo + x] = acc;
                }
    return out;
}

}  // namespace groupreg::testing
