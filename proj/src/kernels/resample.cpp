#include <algorithm>
#include <cmath>
#include <vector>

#include "groupreg/kernels.hpp"

namespace groupreg::kernels {

namespace {

template <typename Real>
inline Real sample_or_zero(const Real* plane, std::ptrdiff_t h, std::ptrdiff_t w, std::ptrdiff_t y,
                           std::ptrdiff_t x) {
    return (y >= 0 && y < h && x >= 0 && x < w) ? plane[y * w + x] : Real(0);
}

// Bilinear sample of every channel of one batch item at one output pixel.
template <typename Real>
inline void warp_pixel(const ImageGeometry& g, const Real* src_item, Real dy, Real dx,
                       std::size_t i, std::size_t j, Real* out_item) {
    const auto h = static_cast<std::ptrdiff_t>(g.height);
    const auto w = static_cast<std::ptrdiff_t>(g.width);
    const Real y = static_cast<Real>(i) + dy;
    const Real x = static_cast<Real>(j) + dx;
    const Real yf = std::floor(y);
    const Real xf = std::floor(x);
    const Real fy = y - yf;
    const Real fx = x - xf;
    const auto y0 = static_cast<std::ptrdiff_t>(yf);
    const auto x0 = static_cast<std::ptrdiff_t>(xf);
    const Real w00 = (Real(1) - fy) * (Real(1) - fx);
    const Real w01 = (Real(1) - fy) * fx;
    const Real w10 = fy * (Real(1) - fx);
    const Real w11 = fy * fx;
    const std::size_t plane = g.plane();
    for (std::size_t c = 0; c < g.channels; ++c) {
        const Real* s = src_item + c * plane;
        Real v = w00 * sample_or_zero(s, h, w, y0, x0);
        v += w01 * sample_or_zero(s, h, w, y0, x0 + 1);
        v += w10 * sample_or_zero(s, h, w, y0 + 1, x0);
        v += w11 * sample_or_zero(s, h, w, y0 + 1, x0 + 1);
        out_item[c * plane + i * g.width + j] = v;
    }
}

template <typename Real>
inline void warp_pixel_backward(const ImageGeometry& g, const Real* src_item, Real dy, Real dx,
                                std::size_t i, std::size_t j, const Real* gout_item,
                                Real* gsrc_item, Real& gdy, Real& gdx) {
    const auto h = static_cast<std::ptrdiff_t>(g.height);
    const auto w = static_cast<std::ptrdiff_t>(g.width);
    const Real y = static_cast<Real>(i) + dy;
    const Real x = static_cast<Real>(j) + dx;
    const Real yf = std::floor(y);
    const Real xf = std::floor(x);
    const Real fy = y - yf;
    const Real fx = x - xf;
    const auto y0 = static_cast<std::ptrdiff_t>(yf);
    const auto x0 = static_cast<std::ptrdiff_t>(xf);
    const std::size_t plane = g.plane();
    Real acc_y = 0, acc_x = 0;
    for (std::size_t c = 0; c < g.channels; ++c) {
        const Real go = gout_item[c * plane + i * g.width + j];
        if (go == Real(0)) continue;
        const Real* s = src_item + c * plane;
        const Real s00 = sample_or_zero(s, h, w, y0, x0);
        const Real s01 = sample_or_zero(s, h, w, y0, x0 + 1);
        const Real s10 = sample_or_zero(s, h, w, y0 + 1, x0);
        const Real s11 = sample_or_zero(s, h, w, y0 + 1, x0 + 1);
        acc_y += go * ((Real(1) - fx) * (s10 - s00) + fx * (s11 - s01));
        acc_x += go * ((Real(1) - fy) * (s01 - s00) + fy * (s11 - s10));
        if (gsrc_item != nullptr) {
            Real* gs = gsrc_item + c * plane;
            auto scatter = [&](std::ptrdiff_t yy, std::ptrdiff_t xx, Real wgt) {
                if (yy >= 0 && yy < h && xx >= 0 && xx < w) gs[yy * w + xx] += go * wgt;
            };
            scatter(y0, x0, (Real(1) - fy) * (Real(1) - fx));
            scatter(y0, x0 + 1, (Real(1) - fy) * fx);
            scatter(y0 + 1, x0, fy * (Real(1) - fx));
            scatter(y0 + 1, x0 + 1, fy * fx);
        }
    }
    gdy += acc_y;
    gdx += acc_x;
}

}  // namespace

template <typename Real>
void warp_bilinear_forward(const ImageGeometry& g, std::span<const Real> src,
                           std::span<const Real> disp, std::span<Real> out) {
    const std::size_t plane = g.plane();
    const auto rows = static_cast<std::ptrdiff_t>(g.batch * g.height);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t r = 0; r < rows; ++r) {
        const std::size_t n = static_cast<std::size_t>(r) / g.height;
        const std::size_t i = static_cast<std::size_t>(r) % g.height;
        const Real* d = disp.data() + n * 2 * plane;
        for (std::size_t j = 0; j < g.width; ++j) {
            warp_pixel(g, src.data() + n * g.channels * plane, d[i * g.width + j],
                       d[plane + i * g.width + j], i, j, out.data() + n * g.channels * plane);
        }
    }
}

template <typename Real>
void warp_bilinear_backward(const ImageGeometry& g, std::span<const Real> src,
                            std::span<const Real> disp, std::span<const Real> grad_out,
                            std::span<Real> grad_src, std::span<Real> grad_disp) {
    const std::size_t plane = g.plane();
    const auto items = static_cast<std::ptrdiff_t>(g.batch);
    // Source gradients scatter within one item, so parallelism stops at the batch.
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t nn = 0; nn < items; ++nn) {
        const auto n = static_cast<std::size_t>(nn);
        const Real* d = disp.data() + n * 2 * plane;
        Real* gsrc = grad_src.empty() ? nullptr : grad_src.data() + n * g.channels * plane;
        for (std::size_t i = 0; i < g.height; ++i) {
            for (std::size_t j = 0; j < g.width; ++j) {
                Real gdy = 0, gdx = 0;
                warp_pixel_backward(g, src.data() + n * g.channels * plane, d[i * g.width + j],
                                    d[plane + i * g.width + j], i, j,
                                    grad_out.data() + n * g.channels * plane, gsrc, gdy, gdx);
                if (!grad_disp.empty()) {
                    grad_disp[n * 2 * plane + i * g.width + j] += gdy;
                    grad_disp[n * 2 * plane + plane + i * g.width + j] += gdx;
                }
            }
        }
    }
}

template <typename Real>
void box_sum(const ImageGeometry& g, std::size_t window, std::span<const Real> in,
             std::span<Real> out) {
    const auto radius = static_cast<std::ptrdiff_t>(window / 2);
    const auto h = static_cast<std::ptrdiff_t>(g.height);
    const auto w = static_cast<std::ptrdiff_t>(g.width);
    const auto planes = static_cast<std::ptrdiff_t>(g.batch * g.channels);
#pragma omp parallel
    {
        std::vector<Real> tmp(g.plane());
#pragma omp for schedule(static)
        for (std::ptrdiff_t p = 0; p < planes; ++p) {
            const Real* src = in.data() + p * h * w;
            Real* dst = out.data() + p * h * w;
            for (std::ptrdiff_t y = 0; y < h; ++y) {
                for (std::ptrdiff_t x = 0; x < w; ++x) {
                    Real s = 0;
                    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, x - radius);
                    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(w - 1, x + radius);
                    for (std::ptrdiff_t k = lo; k <= hi; ++k) s += src[y * w + k];
                    tmp[y * w + x] = s;
                }
            }
            for (std::ptrdiff_t y = 0; y < h; ++y) {
                const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, y - radius);
                const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(h - 1, y + radius);
                for (std::ptrdiff_t x = 0; x < w; ++x) dst[y * w + x] = 0;
                for (std::ptrdiff_t k = lo; k <= hi; ++k) {
                    for (std::ptrdiff_t x = 0; x < w; ++x) dst[y * w + x] += tmp[k * w + x];
                }
            }
        }
    }
}

template <typename Real>
void upsample2x_forward(const ImageGeometry& g, std::span<const Real> in, std::span<Real> out) {
    const std::size_t w2 = 2 * g.width;
    const auto planes = static_cast<std::ptrdiff_t>(g.batch * g.channels);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t p = 0; p < planes; ++p) {
        const Real* src = in.data() + static_cast<std::size_t>(p) * g.plane();
        Real* dst = out.data() + static_cast<std::size_t>(p) * 4 * g.plane();
        for (std::size_t y = 0; y < g.height; ++y) {
            Real* r0 = dst + (2 * y) * w2;
            for (std::size_t x = 0; x < g.width; ++x) {
                const Real v = src[y * g.width + x];
                r0[2 * x] = v;
                r0[2 * x + 1] = v;
            }
            std::copy(r0, r0 + w2, r0 + w2);
        }
    }
}

template <typename Real>
void upsample2x_backward(const ImageGeometry& g, std::span<const Real> grad_out,
                         std::span<Real> grad_in) {
    const std::size_t w2 = 2 * g.width;
    const auto planes = static_cast<std::ptrdiff_t>(g.batch * g.channels);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t p = 0; p < planes; ++p) {
        const Real* src = grad_out.data() + static_cast<std::size_t>(p) * 4 * g.plane();
        Real* dst = grad_in.data() + static_cast<std::size_t>(p) * g.plane();
        for (std::size_t y = 0; y < g.height; ++y) {
            const Real* r0 = src + (2 * y) * w2;
            const Real* r1 = r0 + w2;
            for (std::size_t x = 0; x < g.width; ++x) {
                dst[y * g.width + x] += (r0[2 * x] + r0[2 * x + 1]) + (r1[2 * x] + r1[2 * x + 1]);
            }
        }
    }
}

namespace reference {

template <typename Real>
void warp_bilinear_forward(const ImageGeometry& g, std::span<const Real> src,
                           std::span<const Real> disp, std::span<Real> out) {
    const std::size_t plane = g.plane();
    for (std::size_t n = 0; n < g.batch; ++n) {
        const Real* d = disp.data() + n * 2 * plane;
        for (std::size_t i = 0; i < g.height; ++i) {
            for (std::size_t j = 0; j < g.width; ++j) {
                warp_pixel(g, src.data() + n * g.channels * plane, d[i * g.width + j],
                           d[plane + i * g.width + j], i, j, out.data() + n * g.channels * plane);
            }
        }
    }
}

template <typename Real>
void warp_bilinear_backward(const ImageGeometry& g, std::span<const Real> src,
                            std::span<const Real> disp, std::span<const Real> grad_out,
                            std::span<Real> grad_src, std::span<Real> grad_disp) {
    const std::size_t plane = g.plane();
    for (std::size_t n = 0; n < g.batch; ++n) {
        const Real* d = disp.data() + n * 2 * plane;
        Real* gsrc = grad_src.empty() ? nullptr : grad_src.data() + n * g.channels * plane;
        for (std::size_t i = 0; i < g.height; ++i) {
            for (std::size_t j = 0; j < g.width; ++j) {
                Real gdy = 0, gdx = 0;
                warp_pixel_backward(g, src.data() + n * g.channels * plane, d[i * g.width + j],
                                    d[plane + i * g.width + j], i, j,
                                    grad_out.data() + n * g.channels * plane, gsrc, gdy, gdx);
                if (!grad_disp.empty()) {
                    grad_disp[n * 2 * plane + i * g.width + j] += gdy;
                    grad_disp[n * 2 * plane + plane + i * g.width + j] += gdx;
                }
            }
        }
    }
}

template <typename Real>
void box_sum(const ImageGeometry& g, std::size_t window, std::span<const Real> in,
             std::span<Real> out) {
    const auto radius = static_cast<std::ptrdiff_t>(window / 2);
    const auto h = static_cast<std::ptrdiff_t>(g.height);
    const auto w = static_cast<std::ptrdiff_t>(g.width);
    for (std::size_t p = 0; p < g.batch * g.channels; ++p) {
        const Real* src = in.data() + p * g.plane();
        Real* dst = out.data() + p * g.plane();
        for (std::ptrdiff_t y = 0; y < h; ++y) {
            for (std::ptrdiff_t x = 0; x < w; ++x) {
                Real s = 0;
                for (std::ptrdiff_t dy = -radius; dy <= radius; ++dy) {
                    for (std::ptrdiff_t dx = -radius; dx <= radius; ++dx) {
                        s += sample_or_zero(src, h, w, y + dy, x + dx);
                    }
                }
                dst[y * w + x] = s;
            }
        }
    }
}

}  // namespace reference

#define GROUPREG_INSTANTIATE_RESAMPLE(Real)                                                     \
    template void warp_bilinear_forward<Real>(const ImageGeometry&, std::span<const Real>,      \
                                              std::span<const Real>, std::span<Real>);          \
    template void warp_bilinear_backward<Real>(const ImageGeometry&, std::span<const Real>,     \
                                               std::span<const Real>, std::span<const Real>,    \
                                               std::span<Real>, std::span<Real>);               \
    template void box_sum<Real>(const ImageGeometry&, std::size_t, std::span<const Real>,       \
                                std::span<Real>);                                               \
    template void upsample2x_forward<Real>(const ImageGeometry&, std::span<const Real>,         \
                                           std::span<Real>);                                    \
    template void upsample2x_backward<Real>(const ImageGeometry&, std::span<const Real>,        \
                                            std::span<Real>);                                   \
    template void reference::warp_bilinear_forward<Real>(                                       \
        const ImageGeometry&, std::span<const Real>, std::span<const Real>, std::span<Real>);   \
    template void reference::warp_bilinear_backward<Real>(                                      \
        const ImageGeometry&, std::span<const Real>, std::span<const Real>,                     \
        std::span<const Real>, std::span<Real>, std::span<Real>);                               \
    template void reference::box_sum<Real>(const ImageGeometry&, std::size_t,                   \
                                           std::span<const Real>, std::span<Real>);

GROUPREG_INSTANTIATE_RESAMPLE(float)
GROUPREG_INSTANTIATE_RESAMPLE(double)

}  // namespace groupreg::kernels
