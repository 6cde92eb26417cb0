#include "groupreg/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "groupreg/error.hpp"
#include "groupreg/kernels.hpp"

namespace groupreg::ops {

namespace {

template <typename Real>
using NodeT = detail::Node<Real>;

template <typename Real>
void require_same_shape(const char* op, const BasicTensor<Real>& a, const BasicTensor<Real>& b) {
    if (a.shape() != b.shape())
        throw DimensionError(std::string(op) + ": shape mismatch " + to_string(a.shape()) +
                             " vs " + to_string(b.shape()));
}

template <typename Real>
void require_rank4(const char* op, const BasicTensor<Real>& x) {
    if (x.dim() != 4)
        throw DimensionError(std::string(op) + ": expected N,C,H,W tensor, got " +
                             to_string(x.shape()));
}

template <typename Real>
kernels::ImageGeometry geometry_of(const BasicTensor<Real>& x) {
    const auto& s = x.shape();
    return {s[0], s[1], s[2], s[3]};
}

// Elementwise op with a local derivative df(x, y) evaluated at backward time.
template <typename Real, typename F, typename DF>
BasicTensor<Real> unary(const BasicTensor<Real>& x, F f, DF df) {
    const auto in = x.data();
    std::vector<Real> out(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
    return detail::make_result<Real>(x.shape(), std::move(out), {&x}, [df](NodeT<Real>& self) {
        auto& p = *self.parents[0];
        auto& g = p.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i)
            g[i] += self.grad[i] * df(p.data[i], self.data[i]);
    });
}

}  // namespace

template <typename Real>
BasicTensor<Real> conv2d(const BasicTensor<Real>& input, const BasicTensor<Real>& kernel,
                         const BasicTensor<Real>& bias, std::size_t stride, std::size_t padding) {
    require_rank4("conv2d input", input);
    require_rank4("conv2d kernel", kernel);
    const auto& is = input.shape();
    const auto& ks = kernel.shape();
    if (is[1] != ks[1])
        throw DimensionError("conv2d: input channels (axis 1) = " + std::to_string(is[1]) +
                             " but kernel channels (axis 1) = " + std::to_string(ks[1]));
    if (ks[2] % 2 == 0 || ks[3] % 2 == 0)
        throw DimensionError("conv2d: kernel extents (axes 2,3) must be odd, got " +
                             to_string(ks));
    if (stride == 0) throw DimensionError("conv2d: stride must be positive");
    if (is[2] + 2 * padding < ks[2] || is[3] + 2 * padding < ks[3])
        throw DimensionError("conv2d: kernel " + to_string(ks) + " larger than padded input " +
                             to_string(is));
    const bool has_bias = bias.size() > 0;
    if (has_bias && (bias.dim() != 1 || bias.shape()[0] != ks[0]))
        throw DimensionError("conv2d: bias shape " + to_string(bias.shape()) +
                             " does not match kernel filters (axis 0) = " + std::to_string(ks[0]));

    kernels::ConvGeometry g{is[0], is[1], is[2], is[3], ks[0], ks[2], ks[3], stride, padding};
    std::vector<Real> out(g.output_size());
    kernels::conv2d_forward<Real>(g, input.data(), kernel.data(),
                                  has_bias ? bias.data() : std::span<const Real>{}, out);
    Shape out_shape{g.batch, g.out_channels, g.out_height(), g.out_width()};

    std::vector<BasicTensor<Real>> inputs{input, kernel};
    if (has_bias) inputs.push_back(bias);
    return detail::make_result<Real>(
        std::move(out_shape), std::move(out), inputs, [g, has_bias](NodeT<Real>& self) {
            auto& in = *self.parents[0];
            auto& k = *self.parents[1];
            std::span<Real> gin, gk, gb;
            if (in.requires_grad) gin = in.ensure_grad();
            if (k.requires_grad) gk = k.ensure_grad();
            if (has_bias && self.parents[2]->requires_grad) gb = self.parents[2]->ensure_grad();
            kernels::conv2d_backward<Real>(g, in.data, k.data, self.grad, gin, gk, gb);
        });
}

template <typename Real>
BasicTensor<Real> leaky_relu(const BasicTensor<Real>& x, Real slope) {
    if (!(slope >= Real(0) && slope < Real(1)))
        throw ConfigError("leaky_relu: slope must lie in [0,1)");
    return unary(
        x, [slope](Real v) { return v > Real(0) ? v : slope * v; },
        [slope](Real v, Real) { return v > Real(0) ? Real(1) : slope; });
}

template <typename Real>
BasicTensor<Real> sigmoid(const BasicTensor<Real>& x) {
    return unary(
        x,
        [](Real v) {
            // Split by sign so exp never overflows.
            if (v >= Real(0)) return Real(1) / (Real(1) + std::exp(-v));
            const Real e = std::exp(v);
            return e / (Real(1) + e);
        },
        [](Real, Real y) { return y * (Real(1) - y); });
}

template <typename Real>
BasicTensor<Real> upsample2x(const BasicTensor<Real>& x) {
    require_rank4("upsample2x", x);
    const auto g = geometry_of(x);
    std::vector<Real> out(4 * g.size());
    kernels::upsample2x_forward<Real>(g, x.data(), out);
    return detail::make_result<Real>(Shape{g.batch, g.channels, 2 * g.height, 2 * g.width},
                                     std::move(out), {&x}, [g](NodeT<Real>& self) {
                                         kernels::upsample2x_backward<Real>(
                                             g, self.grad, self.parents[0]->ensure_grad());
                                     });
}

template <typename Real>
BasicTensor<Real> add(const BasicTensor<Real>& a, const BasicTensor<Real>& b) {
    require_same_shape("add", a, b);
    std::vector<Real> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
    return detail::make_result<Real>(a.shape(), std::move(out), {&a, &b}, [](NodeT<Real>& self) {
        for (auto& p : self.parents) {
            if (!p->requires_grad) continue;
            auto& g = p->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
    });
}

template <typename Real>
BasicTensor<Real> sub(const BasicTensor<Real>& a, const BasicTensor<Real>& b) {
    require_same_shape("sub", a, b);
    std::vector<Real> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
    return detail::make_result<Real>(a.shape(), std::move(out), {&a, &b}, [](NodeT<Real>& self) {
        if (self.parents[0]->requires_grad) {
            auto& g = self.parents[0]->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
        if (self.parents[1]->requires_grad) {
            auto& g = self.parents[1]->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
        }
    });
}

template <typename Real>
BasicTensor<Real> mul(const BasicTensor<Real>& a, const BasicTensor<Real>& b) {
    require_same_shape("mul", a, b);
    std::vector<Real> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
    return detail::make_result<Real>(a.shape(), std::move(out), {&a, &b}, [](NodeT<Real>& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        if (pa.requires_grad) {
            auto& g = pa.ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb.data[i];
        }
        if (pb.requires_grad) {
            auto& g = pb.ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa.data[i];
        }
    });
}

template <typename Real>
BasicTensor<Real> div(const BasicTensor<Real>& a, const BasicTensor<Real>& b) {
    require_same_shape("div", a, b);
    std::vector<Real> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] / b.data()[i];
    return detail::make_result<Real>(a.shape(), std::move(out), {&a, &b}, [](NodeT<Real>& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        if (pa.requires_grad) {
            auto& g = pa.ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] / pb.data[i];
        }
        if (pb.requires_grad) {
            auto& g = pb.ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i)
                g[i] -= self.grad[i] * self.data[i] / pb.data[i];
        }
    });
}

template <typename Real>
BasicTensor<Real> scalar_mul(const BasicTensor<Real>& a, Real s) {
    return unary(
        a, [s](Real v) { return v * s; }, [s](Real, Real) { return s; });
}

template <typename Real>
BasicTensor<Real> add_scalar(const BasicTensor<Real>& a, Real s) {
    return unary(
        a, [s](Real v) { return v + s; }, [](Real, Real) { return Real(1); });
}

template <typename Real>
BasicTensor<Real> square(const BasicTensor<Real>& a) {
    return unary(
        a, [](Real v) { return v * v; }, [](Real v, Real) { return Real(2) * v; });
}

template <typename Real>
BasicTensor<Real> sqrt_eps(const BasicTensor<Real>& a, Real eps) {
    return unary(
        a, [eps](Real v) { return std::sqrt(v + eps); },
        [](Real, Real y) { return Real(0.5) / y; });
}

template <typename Real>
BasicTensor<Real> sum_all(const BasicTensor<Real>& a) {
    Real s = 0;
    for (Real v : a.data()) s += v;
    return detail::make_result<Real>(Shape{1}, {s}, {&a}, [](NodeT<Real>& self) {
        auto& g = self.parents[0]->ensure_grad();
        const Real go = self.grad[0];
        for (auto& v : g) v += go;
    });
}

template <typename Real>
BasicTensor<Real> mean_all(const BasicTensor<Real>& a) {
    if (a.size() == 0) throw DimensionError("mean_all of an empty tensor");
    Real s = 0;
    for (Real v : a.data()) s += v;
    const Real n = static_cast<Real>(a.size());
    return detail::make_result<Real>(Shape{1}, {s / n}, {&a}, [n](NodeT<Real>& self) {
        auto& g = self.parents[0]->ensure_grad();
        const Real go = self.grad[0] / n;
        for (auto& v : g) v += go;
    });
}

template <typename Real>
BasicTensor<Real> concat_channels(const std::vector<BasicTensor<Real>>& parts) {
    if (parts.empty()) throw DimensionError("concat_channels: no inputs");
    for (const auto& p : parts) require_rank4("concat_channels", p);
    const auto& s0 = parts[0].shape();
    std::size_t channels = 0;
    for (const auto& p : parts) {
        const auto& s = p.shape();
        if (s[0] != s0[0] || s[2] != s0[2] || s[3] != s0[3])
            throw DimensionError("concat_channels: shape " + to_string(s) + " incompatible with " +
                                 to_string(s0) + " on axes 0,2,3");
        channels += s[1];
    }
    const std::size_t n = s0[0], plane = s0[2] * s0[3];
    std::vector<Real> out(n * channels * plane);
    std::vector<std::size_t> offsets;
    std::size_t off = 0;
    for (const auto& p : parts) {
        offsets.push_back(off);
        const std::size_t c = p.shape()[1];
        for (std::size_t b = 0; b < n; ++b) {
            std::copy_n(p.data().begin() + static_cast<std::ptrdiff_t>(b * c * plane), c * plane,
                        out.begin() + static_cast<std::ptrdiff_t>((b * channels + off) * plane));
        }
        off += c;
    }
    return detail::make_result<Real>(
        Shape{n, channels, s0[2], s0[3]}, std::move(out), parts,
        [n, channels, plane, offsets](NodeT<Real>& self) {
            for (std::size_t k = 0; k < self.parents.size(); ++k) {
                auto& p = *self.parents[k];
                if (!p.requires_grad) continue;
                const std::size_t c = p.shape[1];
                auto& g = p.ensure_grad();
                for (std::size_t b = 0; b < n; ++b) {
                    const Real* src = self.grad.data() + (b * channels + offsets[k]) * plane;
                    Real* dst = g.data() + b * c * plane;
                    for (std::size_t i = 0; i < c * plane; ++i) dst[i] += src[i];
                }
            }
        });
}

template <typename Real>
BasicTensor<Real> concat_batch(const std::vector<BasicTensor<Real>>& parts) {
    if (parts.empty()) throw DimensionError("concat_batch: no inputs");
    const auto& s0 = parts[0].shape();
    if (s0.empty()) throw DimensionError("concat_batch: rank-0 input");
    std::size_t items = 0;
    for (const auto& p : parts) {
        const auto& s = p.shape();
        if (s.size() != s0.size() || !std::equal(s.begin() + 1, s.end(), s0.begin() + 1))
            throw DimensionError("concat_batch: shape " + to_string(s) + " incompatible with " +
                                 to_string(s0) + " beyond axis 0");
        items += s[0];
    }
    std::vector<Real> out;
    out.reserve(items * (numel(s0) / std::max<std::size_t>(1, s0[0])));
    for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
    Shape shape = s0;
    shape[0] = items;
    return detail::make_result<Real>(std::move(shape), std::move(out), parts,
                                     [](NodeT<Real>& self) {
                                         std::size_t off = 0;
                                         for (auto& p : self.parents) {
                                             const std::size_t len = p->data.size();
                                             if (p->requires_grad) {
                                                 auto& g = p->ensure_grad();
                                                 for (std::size_t i = 0; i < len; ++i)
                                                     g[i] += self.grad[off + i];
                                             }
                                             off += len;
                                         }
                                     });
}

template <typename Real>
BasicTensor<Real> slice_batch(const BasicTensor<Real>& x, std::size_t begin, std::size_t end) {
    const auto& s = x.shape();
    if (s.empty() || begin >= end || end > s[0])
        throw DimensionError("slice_batch: range [" + std::to_string(begin) + "," +
                             std::to_string(end) + ") invalid for axis 0 of " + to_string(s));
    const std::size_t item = x.size() / s[0];
    std::vector<Real> out(x.data().begin() + static_cast<std::ptrdiff_t>(begin * item),
                          x.data().begin() + static_cast<std::ptrdiff_t>(end * item));
    Shape shape = s;
    shape[0] = end - begin;
    return detail::make_result<Real>(std::move(shape), std::move(out), {&x},
                                     [begin, item](NodeT<Real>& self) {
                                         auto& g = self.parents[0]->ensure_grad();
                                         for (std::size_t i = 0; i < self.grad.size(); ++i)
                                             g[begin * item + i] += self.grad[i];
                                     });
}

template <typename Real>
BasicTensor<Real> slice_channels(const BasicTensor<Real>& x, std::size_t begin, std::size_t end) {
    require_rank4("slice_channels", x);
    const auto& s = x.shape();
    if (begin >= end || end > s[1])
        throw DimensionError("slice_channels: range [" + std::to_string(begin) + "," +
                             std::to_string(end) + ") invalid for axis 1 of " + to_string(s));
    const std::size_t n = s[0], c = s[1], plane = s[2] * s[3], k = end - begin;
    std::vector<Real> out(n * k * plane);
    for (std::size_t b = 0; b < n; ++b) {
        std::copy_n(x.data().begin() + static_cast<std::ptrdiff_t>((b * c + begin) * plane),
                    k * plane, out.begin() + static_cast<std::ptrdiff_t>(b * k * plane));
    }
    return detail::make_result<Real>(Shape{n, k, s[2], s[3]}, std::move(out), {&x},
                                     [n, c, k, begin, plane](NodeT<Real>& self) {
                                         auto& g = self.parents[0]->ensure_grad();
                                         for (std::size_t b = 0; b < n; ++b) {
                                             for (std::size_t i = 0; i < k * plane; ++i)
                                                 g[(b * c + begin) * plane + i] +=
                                                     self.grad[b * k * plane + i];
                                         }
                                     });
}

template <typename Real>
BasicTensor<Real> repeat_batch(const BasicTensor<Real>& x, std::size_t n) {
    const auto& s = x.shape();
    if (s.empty() || s[0] != 1)
        throw DimensionError("repeat_batch: axis 0 must be 1, got " + to_string(s));
    if (n == 0) throw DimensionError("repeat_batch: zero copies");
    std::vector<Real> out;
    out.reserve(n * x.size());
    for (std::size_t b = 0; b < n; ++b) out.insert(out.end(), x.data().begin(), x.data().end());
    Shape shape = s;
    shape[0] = n;
    return detail::make_result<Real>(std::move(shape), std::move(out), {&x},
                                     [n](NodeT<Real>& self) {
                                         auto& g = self.parents[0]->ensure_grad();
                                         const std::size_t len = g.size();
                                         for (std::size_t b = 0; b < n; ++b)
                                             for (std::size_t i = 0; i < len; ++i)
                                                 g[i] += self.grad[b * len + i];
                                     });
}

template <typename Real>
BasicTensor<Real> mean_batch(const BasicTensor<Real>& x) {
    const auto& s = x.shape();
    if (s.empty() || s[0] == 0) throw DimensionError("mean_batch: empty batch");
    const std::size_t n = s[0], len = x.size() / n;
    std::vector<Real> out(x.data().begin(), x.data().begin() + static_cast<std::ptrdiff_t>(len));
    for (std::size_t b = 1; b < n; ++b)
        for (std::size_t i = 0; i < len; ++i) out[i] += x.data()[b * len + i];
    const Real inv = Real(1) / static_cast<Real>(n);
    for (auto& v : out) v *= inv;
    Shape shape = s;
    shape[0] = 1;
    return detail::make_result<Real>(std::move(shape), std::move(out), {&x},
                                     [n, len, inv](NodeT<Real>& self) {
                                         auto& g = self.parents[0]->ensure_grad();
                                         for (std::size_t b = 0; b < n; ++b)
                                             for (std::size_t i = 0; i < len; ++i)
                                                 g[b * len + i] += self.grad[i] * inv;
                                     });
}

template <typename Real>
BasicTensor<Real> box_sum(const BasicTensor<Real>& x, std::size_t window) {
    require_rank4("box_sum", x);
    if (window % 2 == 0) throw DimensionError("box_sum: window must be odd");
    const auto g = geometry_of(x);
    std::vector<Real> out(g.size());
    kernels::box_sum<Real>(g, window, x.data(), out);
    return detail::make_result<Real>(x.shape(), std::move(out), {&x},
                                     [g, window](NodeT<Real>& self) {
                                         std::vector<Real> back(g.size());
                                         kernels::box_sum<Real>(g, window, self.grad, back);
                                         auto& gr = self.parents[0]->ensure_grad();
                                         for (std::size_t i = 0; i < back.size(); ++i)
                                             gr[i] += back[i];
                                     });
}

template <typename Real>
BasicTensor<Real> diff_rows(const BasicTensor<Real>& x) {
    require_rank4("diff_rows", x);
    const auto& s = x.shape();
    if (s[2] < 2) throw DimensionError("diff_rows: axis 2 needs at least 2 entries");
    const std::size_t planes = s[0] * s[1], h = s[2], w = s[3];
    std::vector<Real> out(planes * (h - 1) * w);
    for (std::size_t p = 0; p < planes; ++p)
        for (std::size_t i = 0; i + 1 < h; ++i)
            for (std::size_t j = 0; j < w; ++j)
                out[(p * (h - 1) + i) * w + j] =
                    x.data()[(p * h + i + 1) * w + j] - x.data()[(p * h + i) * w + j];
    return detail::make_result<Real>(Shape{s[0], s[1], h - 1, w}, std::move(out), {&x},
                                     [planes, h, w](NodeT<Real>& self) {
                                         auto& g = self.parents[0]->ensure_grad();
                                         for (std::size_t p = 0; p < planes; ++p)
                                             for (std::size_t i = 0; i + 1 < h; ++i)
                                                 for (std::size_t j = 0; j < w; ++j) {
                                                     const Real go =
                                                         self.grad[(p * (h - 1) + i) * w + j];
                                                     g[(p * h + i + 1) * w + j] += go;
                                                     g[(p * h + i) * w + j] -= go;
                                                 }
                                     });
}

template <typename Real>
BasicTensor<Real> diff_cols(const BasicTensor<Real>& x) {
    require_rank4("diff_cols", x);
    const auto& s = x.shape();
    if (s[3] < 2) throw DimensionError("diff_cols: axis 3 needs at least 2 entries");
    const std::size_t rows = s[0] * s[1] * s[2], w = s[3];
    std::vector<Real> out(rows * (w - 1));
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j + 1 < w; ++j)
            out[r * (w - 1) + j] = x.data()[r * w + j + 1] - x.data()[r * w + j];
    return detail::make_result<Real>(Shape{s[0], s[1], s[2], w - 1}, std::move(out), {&x},
                                     [rows, w](NodeT<Real>& self) {
                                         auto& g = self.parents[0]->ensure_grad();
                                         for (std::size_t r = 0; r < rows; ++r)
                                             for (std::size_t j = 0; j + 1 < w; ++j) {
                                                 const Real go = self.grad[r * (w - 1) + j];
                                                 g[r * w + j + 1] += go;
                                                 g[r * w + j] -= go;
                                             }
                                     });
}

template <typename Real>
BasicTensor<Real> reshape(const BasicTensor<Real>& x, Shape shape) {
    if (numel(shape) != x.size())
        throw DimensionError("reshape: " + to_string(x.shape()) + " to " + to_string(shape));
    std::vector<Real> out(x.data().begin(), x.data().end());
    return detail::make_result<Real>(std::move(shape), std::move(out), {&x},
                                     [](NodeT<Real>& self) {
                                         auto& g = self.parents[0]->ensure_grad();
                                         for (std::size_t i = 0; i < g.size(); ++i)
                                             g[i] += self.grad[i];
                                     });
}

#define GROUPREG_INSTANTIATE_OPS(Real)                                                          \
    template BasicTensor<Real> conv2d(const BasicTensor<Real>&, const BasicTensor<Real>&,       \
                                      const BasicTensor<Real>&, std::size_t, std::size_t);      \
    template BasicTensor<Real> leaky_relu(const BasicTensor<Real>&, Real);                      \
    template BasicTensor<Real> sigmoid(const BasicTensor<Real>&);                               \
    template BasicTensor<Real> upsample2x(const BasicTensor<Real>&);                            \
    template BasicTensor<Real> add(const BasicTensor<Real>&, const BasicTensor<Real>&);         \
    template BasicTensor<Real> sub(const BasicTensor<Real>&, const BasicTensor<Real>&);         \
    template BasicTensor<Real> mul(const BasicTensor<Real>&, const BasicTensor<Real>&);         \
    template BasicTensor<Real> div(const BasicTensor<Real>&, const BasicTensor<Real>&);         \
    template BasicTensor<Real> scalar_mul(const BasicTensor<Real>&, Real);                      \
    template BasicTensor<Real> add_scalar(const BasicTensor<Real>&, Real);                      \
    template BasicTensor<Real> square(const BasicTensor<Real>&);                                \
    template BasicTensor<Real> sqrt_eps(const BasicTensor<Real>&, Real);                        \
    template BasicTensor<Real> sum_all(const BasicTensor<Real>&);                               \
    template BasicTensor<Real> mean_all(const BasicTensor<Real>&);                              \
    template BasicTensor<Real> concat_channels(const std::vector<BasicTensor<Real>>&);          \
    template BasicTensor<Real> concat_batch(const std::vector<BasicTensor<Real>>&);             \
    template BasicTensor<Real> slice_batch(const BasicTensor<Real>&, std::size_t, std::size_t); \
    template BasicTensor<Real> slice_channels(const BasicTensor<Real>&, std::size_t,            \
                                              std::size_t);                                     \
    template BasicTensor<Real> repeat_batch(const BasicTensor<Real>&, std::size_t);             \
    template BasicTensor<Real> mean_batch(const BasicTensor<Real>&);                            \
    template BasicTensor<Real> box_sum(const BasicTensor<Real>&, std::size_t);                  \
    template BasicTensor<Real> diff_rows(const BasicTensor<Real>&);                             \
    template BasicTensor<Real> diff_cols(const BasicTensor<Real>&);                             \
    template BasicTensor<Real> reshape(const BasicTensor<Real>&, Shape);

GROUPREG_INSTANTIATE_OPS(float)
GROUPREG_INSTANTIATE_OPS(double)

}  // namespace groupreg::ops
