#pragma once

// Central finite-difference check of reverse-mode gradients.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "groupreg/tensor.hpp"

namespace groupreg {

template <typename Real>
struct GradCheckResult {
    Real max_rel_error = 0;
    std::size_t worst_index = 0;
    Real analytic = 0;
    Real numeric = 0;
    std::size_t checked = 0;
};

/// Compares d f / d param from backward() against
/// (f(p + h e_i) - f(p - h e_i)) / 2h for each listed coordinate (all when
/// `indices` is empty). `param` must be a leaf with requires_grad; it is
/// perturbed in place and restored. Relative error is
/// |a - n| / max(|a|, |n|, abs_floor).
template <typename Real>
GradCheckResult<Real> gradient_check_param(const std::function<BasicTensor<Real>()>& f,
                                           BasicTensor<Real>& param, Real h,
                                           const std::vector<std::size_t>& indices = {},
                                           Real abs_floor = Real(1e-8)) {
    param.zero_grad();
    BasicTensor<Real> y = f();
    y.backward();
    const std::vector<Real> analytic(param.grad().begin(), param.grad().end());
    param.zero_grad();

    std::vector<std::size_t> coords = indices;
    if (coords.empty()) {
        coords.resize(param.size());
        for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
    }

    GradCheckResult<Real> result;
    NoGradGuard no_grad;
    auto values = param.mutable_data();
    for (std::size_t i : coords) {
        const Real saved = values[i];
        values[i] = saved + h;
        const Real fp = f().item();
        values[i] = saved - h;
        const Real fm = f().item();
        values[i] = saved;
        const Real numeric = (fp - fm) / (Real(2) * h);
        const Real a = analytic[i];
        const Real denom = std::max({std::abs(a), std::abs(numeric), abs_floor});
        const Real rel = std::abs(a - numeric) / denom;
        if (rel > result.max_rel_error || result.checked == 0) {
            if (rel >= result.max_rel_error) {
                result.max_rel_error = rel;
                result.worst_index = i;
                result.analytic = a;
                result.numeric = numeric;
            }
        }
        ++result.checked;
    }
    return result;
}

/// Gradient check of a scalar function of one tensor argument.
template <typename Real>
GradCheckResult<Real> gradient_check(
    const std::function<BasicTensor<Real>(const BasicTensor<Real>&)>& f,
    const BasicTensor<Real>& x, Real h, Real abs_floor = Real(1e-8)) {
    BasicTensor<Real> leaf(x.shape(), std::vector<Real>(x.data().begin(), x.data().end()), true);
    return gradient_check_param<Real>([&] { return f(leaf); }, leaf, h, {}, abs_floor);
}

}  // namespace groupreg
