#pragma once

// Spatial transformer: identity grid, bilinear warping by a displacement
// field, and the parameter-free mean layer.
//
// Images are [N,C,H,W] tensors and displacement fields [N,2,H,W] with
// channel 0 the row and channel 1 the column displacement, in pixels. The
// deformation is phi = p + u, so warped(i,j) = src(i + u_row, j + u_col).

#include <cstddef>
#include <vector>

#include "groupreg/tensor.hpp"

namespace groupreg {

/// [2,H,W] grid with coords[0][i][j] = i and coords[1][i][j] = j.
template <typename Real>
BasicTensor<Real> identity_grid(std::size_t h, std::size_t w);

/// Throws NumericError if any value is NaN or infinite.
template <typename Real>
void require_finite(const BasicTensor<Real>& t, const char* what);

/// Bilinear resampling with zero padding outside the image. src is
/// [N,C,H,W], u is [N,2,H,W]; differentiable in both.
template <typename Real>
BasicTensor<Real> warp_bilinear(const BasicTensor<Real>& src, const BasicTensor<Real>& u);

/// Pixelwise average of equally shaped images, summed in list order.
template <typename Real>
BasicTensor<Real> compose_mean(const std::vector<BasicTensor<Real>>& warped);

}  // namespace groupreg
