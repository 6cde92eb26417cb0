#pragma once

// Convolution layer record shared by the registration and edge networks.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "groupreg/ops.hpp"
#include "groupreg/random.hpp"
#include "groupreg/tensor.hpp"

namespace groupreg {

template <typename Real>
struct ConvLayer {
    std::string name;
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::size_t kernel = 3;
    std::size_t stride = 1;
    BasicTensor<Real> weight;  // [out, in, k, k]
    BasicTensor<Real> bias;    // [out]

    BasicTensor<Real> forward(const BasicTensor<Real>& x) const {
        return ops::conv2d(x, weight, bias, stride, kernel / 2);
    }

    std::size_t parameter_count() const {
        return out_channels * in_channels * kernel * kernel + out_channels;
    }
};

/// Zero-initialised trainable layer.
template <typename Real>
ConvLayer<Real> make_conv_layer(std::string name, std::size_t in, std::size_t out,
                                std::size_t kernel = 3, std::size_t stride = 1) {
    ConvLayer<Real> l;
    l.name = std::move(name);
    l.in_channels = in;
    l.out_channels = out;
    l.kernel = kernel;
    l.stride = stride;
    l.weight = BasicTensor<Real>(Shape{out, in, kernel, kernel},
                                 std::vector<Real>(out * in * kernel * kernel), true);
    l.bias = BasicTensor<Real>(Shape{out}, std::vector<Real>(out), true);
    return l;
}

/// He-normal weights for a leaky-relu network, zero bias.
template <typename Real>
void he_init(ConvLayer<Real>& l, Rng& rng, double slope) {
    const double fan_in = static_cast<double>(l.in_channels * l.kernel * l.kernel);
    const double sd = std::sqrt(2.0 / ((1.0 + slope * slope) * fan_in));
    for (auto& w : l.weight.mutable_data()) w = static_cast<Real>(sd * rng.normal());
    for (auto& b : l.bias.mutable_data()) b = Real(0);
}

template <typename To, typename From>
ConvLayer<To> cast_layer(const ConvLayer<From>& l, bool requires_grad) {
    ConvLayer<To> out;
    out.name = l.name;
    out.in_channels = l.in_channels;
    out.out_channels = l.out_channels;
    out.kernel = l.kernel;
    out.stride = l.stride;
    out.weight = cast<To>(l.weight);
    out.bias = cast<To>(l.bias);
    out.weight.set_requires_grad(requires_grad);
    out.bias.set_requires_grad(requires_grad);
    return out;
}

}  // namespace groupreg
