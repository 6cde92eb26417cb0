#pragma once

// SGD with momentum, Adam, the cosine-annealed learning rate and global
// gradient-norm clipping.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include "groupreg/error.hpp"
#include "groupreg/tensor.hpp"

namespace groupreg {

/// lr_min + (lr_max - lr_min)(1 + cos(pi e / (E - 1))) / 2; a single-epoch
/// schedule stays at lr_max.
inline double cosine_lr(std::size_t epoch, std::size_t epochs, double lr_max, double lr_min) {
    if (epochs == 0 || epoch >= epochs) throw ConfigError("cosine_lr: epoch out of range");
    if (epochs == 1) return lr_max;
    const double phase =
        std::numbers::pi * static_cast<double>(epoch) / static_cast<double>(epochs - 1);
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(phase));
}

/// Global L2 norm of all gradients; when it exceeds max_norm every gradient
/// is scaled by max_norm / norm. Returns the norm before scaling.
template <typename Real>
double clip_grad_norm(const std::vector<BasicTensor<Real>*>& params, double max_norm) {
    double sq = 0.0;
    for (auto* p : params) {
        if (!p->has_grad()) continue;
        for (Real g : p->grad()) sq += static_cast<double>(g) * static_cast<double>(g);
    }
    const double norm = std::sqrt(sq);
    if (norm > max_norm) {
        const Real s = static_cast<Real>(max_norm / norm);
        for (auto* p : params)
            if (p->has_grad())
                for (auto& g : p->mutable_grad()) g *= s;
    }
    return norm;
}

/// v <- mu v + g; p <- p - lr v. Parameters without a gradient are skipped.
template <typename Real>
class SgdMomentum {
public:
    SgdMomentum(std::vector<BasicTensor<Real>*> params, double momentum)
        : params_(std::move(params)), momentum_(momentum) {
        velocity_.reserve(params_.size());
        for (auto* p : params_) velocity_.emplace_back(p->size(), Real(0));
    }

    void step(double lr) {
        const Real mu = static_cast<Real>(momentum_);
        const Real rate = static_cast<Real>(lr);
        for (std::size_t k = 0; k < params_.size(); ++k) {
            auto* p = params_[k];
            if (!p->has_grad()) continue;
            auto g = p->grad();
            auto& v = velocity_[k];
            auto w = p->mutable_data();
            for (std::size_t i = 0; i < w.size(); ++i) {
                v[i] = mu * v[i] + g[i];
                w[i] -= rate * v[i];
            }
        }
    }

    void zero_grad() {
        for (auto* p : params_) p->zero_grad();
    }

private:
    std::vector<BasicTensor<Real>*> params_;
    std::vector<std::vector<Real>> velocity_;
    double momentum_;
};

/// Adam with bias correction; parameters without a gradient are skipped.
template <typename Real>
class Adam {
public:
    explicit Adam(std::vector<BasicTensor<Real>*> params, double beta1 = 0.9, double beta2 = 0.999,
                  double eps = 1e-8)
        : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
        for (auto* p : params_) {
            m_.emplace_back(p->size(), 0.0);
            v_.emplace_back(p->size(), 0.0);
        }
    }

    void step(double lr) {
        ++t_;
        const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (std::size_t k = 0; k < params_.size(); ++k) {
            auto* p = params_[k];
            if (!p->has_grad()) continue;
            auto g = p->grad();
            auto w = p->mutable_data();
            for (std::size_t i = 0; i < w.size(); ++i) {
                m_[k][i] = beta1_ * m_[k][i] + (1 - beta1_) * g[i];
                v_[k][i] = beta2_ * v_[k][i] + (1 - beta2_) * g[i] * g[i];
                w[i] -= static_cast<Real>(lr * (m_[k][i] / c1) / (std::sqrt(v_[k][i] / c2) + eps_));
            }
        }
    }

    void zero_grad() {
        for (auto* p : params_) p->zero_grad();
    }

private:
    std::vector<BasicTensor<Real>*> params_;
    std::vector<std::vector<double>> m_, v_;
    double beta1_, beta2_, eps_;
    std::size_t t_ = 0;
};

}  // namespace groupreg
