#pragma once

// Raw numeric kernels behind the differentiable ops.
//
// Every kernel exists twice: the default version is parallelised with OpenMP
// over independent outputs (batch items, output channels, rows), and
// `reference::` holds a plain serial loop nest kept for testing and
// benchmarking. Parallel kernels never split a reduction across threads, so
// their results do not depend on the thread count.
//
// Layout is row-major N,C,H,W throughout. Backward kernels accumulate (+=)
// into their gradient outputs.

#include <cstddef>
#include <span>

namespace groupreg::kernels {

struct ConvGeometry {
    std::size_t batch = 1;
    std::size_t in_channels = 1;
    std::size_t height = 1;
    std::size_t width = 1;
    std::size_t out_channels = 1;
    std::size_t kernel_h = 3;
    std::size_t kernel_w = 3;
    std::size_t stride = 1;
    std::size_t padding = 1;

    std::size_t out_height() const { return (height + 2 * padding - kernel_h) / stride + 1; }
    std::size_t out_width() const { return (width + 2 * padding - kernel_w) / stride + 1; }
    std::size_t input_size() const { return batch * in_channels * height * width; }
    std::size_t weight_size() const { return out_channels * in_channels * kernel_h * kernel_w; }
    std::size_t output_size() const { return batch * out_channels * out_height() * out_width(); }
};

struct ImageGeometry {
    std::size_t batch = 1;
    std::size_t channels = 1;
    std::size_t height = 1;
    std::size_t width = 1;

    std::size_t plane() const { return height * width; }
    std::size_t size() const { return batch * channels * height * width; }
};

// Cross-correlation, zero padding. bias may be empty.
template <typename Real>
void conv2d_forward(const ConvGeometry& g, std::span<const Real> input,
                    std::span<const Real> weight, std::span<const Real> bias,
                    std::span<Real> output);

// Any of grad_input / grad_weight / grad_bias may be empty to skip it.
template <typename Real>
void conv2d_backward(const ConvGeometry& g, std::span<const Real> input,
                     std::span<const Real> weight, std::span<const Real> grad_output,
                     std::span<Real> grad_input, std::span<Real> grad_weight,
                     std::span<Real> grad_bias);

// Bilinear resampling of src [N,C,H,W] at (i + disp[n,0,i,j], j + disp[n,1,i,j]),
// zero outside the image.
template <typename Real>
void warp_bilinear_forward(const ImageGeometry& g, std::span<const Real> src,
                           std::span<const Real> disp, std::span<Real> out);

template <typename Real>
void warp_bilinear_backward(const ImageGeometry& g, std::span<const Real> src,
                            std::span<const Real> disp, std::span<const Real> grad_out,
                            std::span<Real> grad_src, std::span<Real> grad_disp);

// Zero-padded sum over a centred window x window box. The operator is
// self-adjoint, so the same kernel serves the backward pass.
template <typename Real>
void box_sum(const ImageGeometry& g, std::size_t window, std::span<const Real> in,
             std::span<Real> out);

// Nearest-neighbour 2x upsampling; out has 2H x 2W planes.
template <typename Real>
void upsample2x_forward(const ImageGeometry& g, std::span<const Real> in, std::span<Real> out);

// Sums each 2x2 block of grad_out into grad_in.
template <typename Real>
void upsample2x_backward(const ImageGeometry& g, std::span<const Real> grad_out,
                         std::span<Real> grad_in);

namespace reference {

template <typename Real>
void conv2d_forward(const ConvGeometry& g, std::span<const Real> input,
                    std::span<const Real> weight, std::span<const Real> bias,
                    std::span<Real> output);

template <typename Real>
void conv2d_backward(const ConvGeometry& g, std::span<const Real> input,
                     std::span<const Real> weight, std::span<const Real> grad_output,
                     std::span<Real> grad_input, std::span<Real> grad_weight,
                     std::span<Real> grad_bias);

template <typename Real>
void warp_bilinear_forward(const ImageGeometry& g, std::span<const Real> src,
                           std::span<const Real> disp, std::span<Real> out);

template <typename Real>
void warp_bilinear_backward(const ImageGeometry& g, std::span<const Real> src,
                            std::span<const Real> disp, std::span<const Real> grad_out,
                            std::span<Real> grad_src, std::span<Real> grad_disp);

template <typename Real>
void box_sum(const ImageGeometry& g, std::size_t window, std::span<const Real> in,
             std::span<Real> out);

}  // namespace reference

}  // namespace groupreg::kernels
