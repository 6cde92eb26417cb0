#pragma once

// Similarity terms and the smoothness regulariser of the registration
// objectives. All image arguments are [N,1,H,W], fields [N,2,H,W]; losses
// average over every batch item, so a batch of K pairs gives the mean of the
// K per-pair losses.

#include <cstddef>
#include <string>

#include "groupreg/edge.hpp"
#include "groupreg/tensor.hpp"

namespace groupreg {

enum class SimilarityMode { cc, edge };

SimilarityMode parse_similarity_mode(const std::string& s);
std::string to_string(SimilarityMode m);

struct LossConfig {
    std::size_t cc_window = 9;
    double epsilon = 1e-5;
    double lambda = 0.01;

    /// Defaults per mode: lambda 0.01 for cc, 0.1 for edge.
    static LossConfig defaults_for(SimilarityMode mode);
    /// Throws ConfigError on an even/small window or a negative/non-finite lambda.
    void validate() const;
};

/// 1 - mean squared local correlation over cc_window^2 zero-padded windows:
/// CC^2 = cross^2 / (var_t * var_w + eps), with
/// cross = S_tw - S_t S_w / n and var_x = S_xx - S_x^2 / n.
template <typename Real>
BasicTensor<Real> cc_loss(const BasicTensor<Real>& t, const BasicTensor<Real>& w,
                          const LossConfig& cfg);

/// Per-pixel CC^2 map (no reduction), exposed for testing.
template <typename Real>
BasicTensor<Real> cc_squared_map(const BasicTensor<Real>& t, const BasicTensor<Real>& w,
                                 const LossConfig& cfg);

template <typename Real>
BasicTensor<Real> mse_loss(const BasicTensor<Real>& a, const BasicTensor<Real>& b);

/// Average of the four (component x direction) mean squared forward
/// differences of u.
template <typename Real>
BasicTensor<Real> smoothness_loss(const BasicTensor<Real>& u);

/// L_s(t_ref, warped) + lambda * L_r(u). In edge mode L_s is the MSE between
/// edge maps, with E(t_ref) treated as a constant.
template <typename Real>
BasicTensor<Real> objective_pairwise(const BasicTensor<Real>& t_ref,
                                     const BasicTensor<Real>& warped, const BasicTensor<Real>& u,
                                     const LossConfig& cfg, SimilarityMode mode,
                                     const EdgeDetector<Real>* detector);

/// Similarity on the mean of the warped sources plus (lambda / K) sum_j L_r(u_j).
/// warped_mean is [1,1,H,W]; fields is [K,2,H,W].
template <typename Real>
BasicTensor<Real> objective_group(const BasicTensor<Real>& t_ref,
                                  const BasicTensor<Real>& warped_mean,
                                  const BasicTensor<Real>& fields, const LossConfig& cfg,
                                  SimilarityMode mode, const EdgeDetector<Real>* detector);

}  // namespace groupreg
