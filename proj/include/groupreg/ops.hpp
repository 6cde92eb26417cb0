#pragma once

// Differentiable operations on BasicTensor. Image-shaped tensors are N,C,H,W.

#include <cstddef>
#include <vector>

#include "groupreg/tensor.hpp"

namespace groupreg::ops {

/// Cross-correlation conv with zero padding. input [N,C,H,W], kernel
/// [F,C,kh,kw] (odd extents), bias [F] or empty-shaped ({0}) for none.
/// Output extent is floor((H + 2p - kh) / stride) + 1.
template <typename Real>
BasicTensor<Real> conv2d(const BasicTensor<Real>& input, const BasicTensor<Real>& kernel,
                         const BasicTensor<Real>& bias, std::size_t stride, std::size_t padding);

template <typename Real>
BasicTensor<Real> leaky_relu(const BasicTensor<Real>& x, Real slope);

template <typename Real>
BasicTensor<Real> sigmoid(const BasicTensor<Real>& x);

/// Nearest-neighbour 2x upsampling of the last two axes.
template <typename Real>
BasicTensor<Real> upsample2x(const BasicTensor<Real>& x);

template <typename Real>
BasicTensor<Real> add(const BasicTensor<Real>& a, const BasicTensor<Real>& b);
template <typename Real>
BasicTensor<Real> sub(const BasicTensor<Real>& a, const BasicTensor<Real>& b);
template <typename Real>
BasicTensor<Real> mul(const BasicTensor<Real>& a, const BasicTensor<Real>& b);
/// a / b elementwise; callers guard b away from zero.
template <typename Real>
BasicTensor<Real> div(const BasicTensor<Real>& a, const BasicTensor<Real>& b);
template <typename Real>
BasicTensor<Real> scalar_mul(const BasicTensor<Real>& a, Real s);
template <typename Real>
BasicTensor<Real> add_scalar(const BasicTensor<Real>& a, Real s);
template <typename Real>
BasicTensor<Real> square(const BasicTensor<Real>& a);
/// sqrt(a + eps).
template <typename Real>
BasicTensor<Real> sqrt_eps(const BasicTensor<Real>& a, Real eps);

template <typename Real>
BasicTensor<Real> sum_all(const BasicTensor<Real>& a);
template <typename Real>
BasicTensor<Real> mean_all(const BasicTensor<Real>& a);

/// Concatenate [N,Ci,H,W] tensors along the channel axis.
template <typename Real>
BasicTensor<Real> concat_channels(const std::vector<BasicTensor<Real>>& parts);
/// Concatenate tensors along the leading (batch) axis.
template <typename Real>
BasicTensor<Real> concat_batch(const std::vector<BasicTensor<Real>>& parts);

/// Items [begin, end) of the leading axis.
template <typename Real>
BasicTensor<Real> slice_batch(const BasicTensor<Real>& x, std::size_t begin, std::size_t end);
/// Channels [begin, end) of an N,C,H,W tensor.
template <typename Real>
BasicTensor<Real> slice_channels(const BasicTensor<Real>& x, std::size_t begin, std::size_t end);

/// [1,...] -> [n,...] by copying; backward sums the copies.
template <typename Real>
BasicTensor<Real> repeat_batch(const BasicTensor<Real>& x, std::size_t n);
/// [N,...] -> [1,...], the average over the leading axis in index order.
template <typename Real>
BasicTensor<Real> mean_batch(const BasicTensor<Real>& x);

/// Zero-padded window sum over the last two axes (window odd).
template <typename Real>
BasicTensor<Real> box_sum(const BasicTensor<Real>& x, std::size_t window);

/// x[..., i+1, :] - x[..., i, :]; the H axis shrinks by one.
template <typename Real>
BasicTensor<Real> diff_rows(const BasicTensor<Real>& x);
/// x[..., :, j+1] - x[..., :, j]; the W axis shrinks by one.
template <typename Real>
BasicTensor<Real> diff_cols(const BasicTensor<Real>& x);

template <typename Real>
BasicTensor<Real> reshape(const BasicTensor<Real>& x, Shape shape);

}  // namespace groupreg::ops
