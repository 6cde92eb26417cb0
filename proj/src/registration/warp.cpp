#include "groupreg/warp.hpp"

#include <cmath>
#include <string>

#include "groupreg/error.hpp"
#include "groupreg/kernels.hpp"
#include "groupreg/ops.hpp"

namespace groupreg {

template <typename Real>
BasicTensor<Real> identity_grid(std::size_t h, std::size_t w) {
    if (h == 0 || w == 0) throw DimensionError("identity_grid: extents must be positive");
    std::vector<Real> v(2 * h * w);
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j) {
            v[i * w + j] = static_cast<Real>(i);
            v[h * w + i * w + j] = static_cast<Real>(j);
        }
    return BasicTensor<Real>(Shape{2, h, w}, std::move(v));
}

template <typename Real>
void require_finite(const BasicTensor<Real>& t, const char* what) {
    const auto d = t.data();
    for (std::size_t i = 0; i < d.size(); ++i)
        if (!std::isfinite(d[i]))
            throw NumericError(std::string(what) + ": non-finite value at flat index " +
                               std::to_string(i));
}

template <typename Real>
BasicTensor<Real> warp_bilinear(const BasicTensor<Real>& src, const BasicTensor<Real>& u) {
    if (src.dim() != 4 || u.dim() != 4)
        throw DimensionError("warp_bilinear: expected [N,C,H,W] image and [N,2,H,W] field, got " +
                             to_string(src.shape()) + " and " + to_string(u.shape()));
    const auto& s = src.shape();
    const auto& us = u.shape();
    if (us[1] != 2)
        throw DimensionError("warp_bilinear: field axis 1 must have 2 components, got " +
                             std::to_string(us[1]));
    if (s[0] != us[0] || s[2] != us[2] || s[3] != us[3])
        throw DimensionError("warp_bilinear: image " + to_string(s) + " and field " +
                             to_string(us) + " disagree on axes 0, 2 or 3");
    require_finite(u, "warp_bilinear displacement");

    const kernels::ImageGeometry g{s[0], s[1], s[2], s[3]};
    std::vector<Real> out(g.size());
    kernels::warp_bilinear_forward<Real>(g, src.data(), u.data(), out);
    return detail::make_result<Real>(
        s, std::move(out), {&src, &u}, [g](detail::Node<Real>& self) {
            auto& src_node = *self.parents[0];
            auto& u_node = *self.parents[1];
            std::span<Real> gs, gu;
            if (src_node.requires_grad) gs = src_node.ensure_grad();
            if (u_node.requires_grad) gu = u_node.ensure_grad();
            kernels::warp_bilinear_backward<Real>(g, src_node.data, u_node.data, self.grad, gs,
                                                  gu);
        });
}

template <typename Real>
BasicTensor<Real> compose_mean(const std::vector<BasicTensor<Real>>& warped) {
    if (warped.empty()) throw DimensionError("compose_mean: empty list");
    for (const auto& w : warped)
        if (w.shape() != warped.front().shape())
            throw DimensionError("compose_mean: shape mismatch " + to_string(w.shape()) + " vs " +
                                 to_string(warped.front().shape()));
    // Same arithmetic as ops::mean_batch: running sum in list order, then 1/K.
    BasicTensor<Real> acc = warped.front();
    for (std::size_t k = 1; k < warped.size(); ++k) acc = ops::add(acc, warped[k]);
    return ops::scalar_mul(acc, Real(1) / static_cast<Real>(warped.size()));
}

#define GROUPREG_INSTANTIATE_WARP(Real)                                                          \
    template BasicTensor<Real> identity_grid<Real>(std::size_t, std::size_t);                   \
    template void require_finite<Real>(const BasicTensor<Real>&, const char*);                  \
    template BasicTensor<Real> warp_bilinear<Real>(const BasicTensor<Real>&,                    \
                                                   const BasicTensor<Real>&);                   \
    template BasicTensor<Real> compose_mean<Real>(const std::vector<BasicTensor<Real>>&);

GROUPREG_INSTANTIATE_WARP(float)
GROUPREG_INSTANTIATE_WARP(double)

}  // namespace groupreg
