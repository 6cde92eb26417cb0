#include <Eigen/Core>
#include <algorithm>
#include <vector>

#include "groupreg/kernels.hpp"

namespace groupreg::kernels {

namespace {

template <typename Real>
using RowMatrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Real>
using MatrixMap = Eigen::Map<RowMatrix<Real>>;
template <typename Real>
using ConstMatrixMap = Eigen::Map<const RowMatrix<Real>>;

// Output columns [lo, hi) whose input column ox * stride - pad + k lies inside [0, w).
struct ValidRange {
    std::size_t lo, hi;
};

inline ValidRange valid_columns(std::ptrdiff_t w, std::ptrdiff_t stride, std::ptrdiff_t offset,
                                std::size_t wo) {
    // need 0 <= ox * stride + offset < w
    std::ptrdiff_t lo = offset >= 0 ? 0 : (-offset + stride - 1) / stride;
    std::ptrdiff_t hi = w - offset <= 0 ? 0 : (w - offset + stride - 1) / stride;
    hi = std::min<std::ptrdiff_t>(hi, static_cast<std::ptrdiff_t>(wo));
    lo = std::min(lo, hi);
    return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

// col is [C*kh*kw, Ho*Wo] for one batch item.
template <typename Real>
void im2col(const ConvGeometry& g, const Real* in, Real* col) {
    const std::size_t ho = g.out_height(), wo = g.out_width();
    const auto h = static_cast<std::ptrdiff_t>(g.height);
    const auto w = static_cast<std::ptrdiff_t>(g.width);
    const auto pad = static_cast<std::ptrdiff_t>(g.padding);
    const auto stride = static_cast<std::ptrdiff_t>(g.stride);
    for (std::size_t c = 0; c < g.in_channels; ++c) {
        const Real* plane = in + c * g.height * g.width;
        for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
            for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
                Real* row = col + ((c * g.kernel_h + ky) * g.kernel_w + kx) * ho * wo;
                const std::ptrdiff_t offset = static_cast<std::ptrdiff_t>(kx) - pad;
                const auto [lo, hi] = valid_columns(w, stride, offset, wo);
                for (std::size_t oy = 0; oy < ho; ++oy) {
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy) * stride - pad +
                                              static_cast<std::ptrdiff_t>(ky);
                    Real* dst = row + oy * wo;
                    if (iy < 0 || iy >= h) {
                        std::fill(dst, dst + wo, Real(0));
                        continue;
                    }
                    const Real* src = plane + iy * w + offset;
                    std::fill(dst, dst + lo, Real(0));
                    if (stride == 1) {
                        std::copy(src + lo, src + hi, dst + lo);
                    } else {
                        for (std::size_t ox = lo; ox < hi; ++ox)
                            dst[ox] = src[static_cast<std::ptrdiff_t>(ox) * stride];
                    }
                    std::fill(dst + hi, dst + wo, Real(0));
                }
            }
        }
    }
}

template <typename Real>
void col2im_add(const ConvGeometry& g, const Real* col, Real* in) {
    const std::size_t ho = g.out_height(), wo = g.out_width();
    const auto h = static_cast<std::ptrdiff_t>(g.height);
    const auto w = static_cast<std::ptrdiff_t>(g.width);
    const auto pad = static_cast<std::ptrdiff_t>(g.padding);
    const auto stride = static_cast<std::ptrdiff_t>(g.stride);
    for (std::size_t c = 0; c < g.in_channels; ++c) {
        Real* plane = in + c * g.height * g.width;
        for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
            for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
                const Real* row = col + ((c * g.kernel_h + ky) * g.kernel_w + kx) * ho * wo;
                const std::ptrdiff_t offset = static_cast<std::ptrdiff_t>(kx) - pad;
                const auto [lo, hi] = valid_columns(w, stride, offset, wo);
                for (std::size_t oy = 0; oy < ho; ++oy) {
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy) * stride - pad +
                                              static_cast<std::ptrdiff_t>(ky);
                    if (iy < 0 || iy >= h) continue;
                    const Real* src = row + oy * wo;
                    Real* dst = plane + iy * w + offset;
                    if (stride == 1) {
                        for (std::size_t ox = lo; ox < hi; ++ox) dst[ox] += src[ox];
                    } else {
                        for (std::size_t ox = lo; ox < hi; ++ox)
                            dst[static_cast<std::ptrdiff_t>(ox) * stride] += src[ox];
                    }
                }
            }
        }
    }
}

}  // namespace

template <typename Real>
void conv2d_forward(const ConvGeometry& g, std::span<const Real> input,
                    std::span<const Real> weight, std::span<const Real> bias,
                    std::span<Real> output) {
    const std::size_t ck = g.in_channels * g.kernel_h * g.kernel_w;
    const std::size_t pixels = g.out_height() * g.out_width();
    const auto n_items = static_cast<std::ptrdiff_t>(g.batch);
    ConstMatrixMap<Real> w_mat(weight.data(), static_cast<Eigen::Index>(g.out_channels),
                               static_cast<Eigen::Index>(ck));

#pragma omp parallel
    {
        std::vector<Real> col(ck * pixels);
#pragma omp for schedule(static)
        for (std::ptrdiff_t n = 0; n < n_items; ++n) {
            im2col(g, input.data() + n * g.in_channels * g.height * g.width, col.data());
            MatrixMap<Real> out_mat(output.data() + n * g.out_channels * pixels,
                                    static_cast<Eigen::Index>(g.out_channels),
                                    static_cast<Eigen::Index>(pixels));
            ConstMatrixMap<Real> col_mat(col.data(), static_cast<Eigen::Index>(ck),
                                         static_cast<Eigen::Index>(pixels));
            out_mat.noalias() = w_mat * col_mat;
            if (!bias.empty()) {
                for (std::size_t f = 0; f < g.out_channels; ++f) out_mat.row(f).array() += bias[f];
            }
        }
    }
}

template <typename Real>
void conv2d_backward(const ConvGeometry& g, std::span<const Real> input,
                     std::span<const Real> weight, std::span<const Real> grad_output,
                     std::span<Real> grad_input, std::span<Real> grad_weight,
                     std::span<Real> grad_bias) {
    const std::size_t ck = g.in_channels * g.kernel_h * g.kernel_w;
    const std::size_t pixels = g.out_height() * g.out_width();
    const std::size_t wsize = g.weight_size();
    const auto n_items = static_cast<std::ptrdiff_t>(g.batch);
    const bool want_weight = !grad_weight.empty();
    const bool want_bias = !grad_bias.empty();
    const bool want_input = !grad_input.empty();

    // Per-item partials, reduced afterwards in batch order.
    std::vector<Real> weight_partial(want_weight ? g.batch * wsize : 0);
    std::vector<Real> bias_partial(want_bias ? g.batch * g.out_channels : 0);

    ConstMatrixMap<Real> w_mat(weight.data(), static_cast<Eigen::Index>(g.out_channels),
                               static_cast<Eigen::Index>(ck));

#pragma omp parallel
    {
        std::vector<Real> col(ck * pixels);
#pragma omp for schedule(static)
        for (std::ptrdiff_t n = 0; n < n_items; ++n) {
            ConstMatrixMap<Real> gout(grad_output.data() + n * g.out_channels * pixels,
                                      static_cast<Eigen::Index>(g.out_channels),
                                      static_cast<Eigen::Index>(pixels));
            if (want_bias) {
                for (std::size_t f = 0; f < g.out_channels; ++f) {
                    const Real* row = gout.data() + f * pixels;
                    Real s = 0;
                    for (std::size_t p = 0; p < pixels; ++p) s += row[p];
                    bias_partial[n * g.out_channels + f] = s;
                }
            }
            if (want_weight) {
                im2col(g, input.data() + n * g.in_channels * g.height * g.width, col.data());
                ConstMatrixMap<Real> col_mat(col.data(), static_cast<Eigen::Index>(ck),
                                             static_cast<Eigen::Index>(pixels));
                MatrixMap<Real> gw(weight_partial.data() + n * wsize,
                                   static_cast<Eigen::Index>(g.out_channels),
                                   static_cast<Eigen::Index>(ck));
                gw.noalias() = gout * col_mat.transpose();
            }
            if (want_input) {
                MatrixMap<Real> gcol(col.data(), static_cast<Eigen::Index>(ck),
                                     static_cast<Eigen::Index>(pixels));
                gcol.noalias() = w_mat.transpose() * gout;
                col2im_add(g, col.data(),
                           grad_input.data() + n * g.in_channels * g.height * g.width);
            }
        }
    }

    for (std::size_t n = 0; n < g.batch; ++n) {
        if (want_weight) {
            const Real* part = weight_partial.data() + n * wsize;
            for (std::size_t i = 0; i < wsize; ++i) grad_weight[i] += part[i];
        }
        if (want_bias) {
            const Real* part = bias_partial.data() + n * g.out_channels;
            for (std::size_t f = 0; f < g.out_channels; ++f) grad_bias[f] += part[f];
        }
    }
}

namespace reference {

template <typename Real>
void conv2d_forward(const ConvGeometry& g, std::span<const Real> input,
                    std::span<const Real> weight, std::span<const Real> bias,
                    std::span<Real> output) {
    const std::size_t ho = g.out_height(), wo = g.out_width();
    for (std::size_t n = 0; n < g.batch; ++n) {
        for (std::size_t f = 0; f < g.out_channels; ++f) {
            for (std::size_t oy = 0; oy < ho; ++oy) {
                for (std::size_t ox = 0; ox < wo; ++ox) {
                    Real acc = bias.empty() ? Real(0) : bias[f];
                    for (std::size_t c = 0; c < g.in_channels; ++c) {
                        for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
                            const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                            static_cast<std::ptrdiff_t>(g.padding);
                            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) continue;
                            for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
                                const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                                                static_cast<std::ptrdiff_t>(g.padding);
                                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.width)) continue;
                                acc += weight[((f * g.in_channels + c) * g.kernel_h + ky) *
                                                  g.kernel_w +
                                              kx] *
                                       input[((n * g.in_channels + c) * g.height +
                                              static_cast<std::size_t>(iy)) *
                                                 g.width +
                                             static_cast<std::size_t>(ix)];
                            }
                        }
                    }
                    output[((n * g.out_channels + f) * ho + oy) * wo + ox] = acc;
                }
            }
        }
    }
}

template <typename Real>
void conv2d_backward(const ConvGeometry& g, std::span<const Real> input,
                     std::span<const Real> weight, std::span<const Real> grad_output,
                     std::span<Real> grad_input, std::span<Real> grad_weight,
                     std::span<Real> grad_bias) {
    const std::size_t ho = g.out_height(), wo = g.out_width();
    for (std::size_t n = 0; n < g.batch; ++n) {
        for (std::size_t f = 0; f < g.out_channels; ++f) {
            for (std::size_t oy = 0; oy < ho; ++oy) {
                for (std::size_t ox = 0; ox < wo; ++ox) {
                    const Real go = grad_output[((n * g.out_channels + f) * ho + oy) * wo + ox];
                    if (!grad_bias.empty()) grad_bias[f] += go;
                    for (std::size_t c = 0; c < g.in_channels; ++c) {
                        for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
                            const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                            static_cast<std::ptrdiff_t>(g.padding);
                            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) continue;
                            for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
                                const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                                                static_cast<std::ptrdiff_t>(g.padding);
                                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.width)) continue;
                                const std::size_t wi =
                                    ((f * g.in_channels + c) * g.kernel_h + ky) * g.kernel_w + kx;
                                const std::size_t ii = ((n * g.in_channels + c) * g.height +
                                                        static_cast<std::size_t>(iy)) *
                                                           g.width +
                                                       static_cast<std::size_t>(ix);
                                if (!grad_weight.empty()) grad_weight[wi] += go * input[ii];
                                if (!grad_input.empty()) grad_input[ii] += go * weight[wi];
                            }
                        }
                    }
                }
            }
        }
    }
}

}  // namespace reference

#define GROUPREG_INSTANTIATE_CONV(Real)                                                        \
    template void conv2d_forward<Real>(const ConvGeometry&, std::span<const Real>,             \
                                       std::span<const Real>, std::span<const Real>,           \
                                       std::span<Real>);                                       \
    template void conv2d_backward<Real>(const ConvGeometry&, std::span<const Real>,            \
                                        std::span<const Real>, std::span<const Real>,          \
                                        std::span<Real>, std::span<Real>, std::span<Real>);    \
    template void reference::conv2d_forward<Real>(const ConvGeometry&, std::span<const Real>,  \
                                                  std::span<const Real>,                       \
                                                  std::span<const Real>, std::span<Real>);     \
    template void reference::conv2d_backward<Real>(                                            \
        const ConvGeometry&, std::span<const Real>, std::span<const Real>,                     \
        std::span<const Real>, std::span<Real>, std::span<Real>, std::span<Real>);

GROUPREG_INSTANTIATE_CONV(float)
GROUPREG_INSTANTIATE_CONV(double)

}  // namespace groupreg::kernels
