#include "groupreg/losses.hpp"

#include <cmath>

#include "groupreg/error.hpp"
#include "groupreg/ops.hpp"

namespace groupreg {

SimilarityMode parse_similarity_mode(const std::string& s) {
    if (s == "cc") return SimilarityMode::cc;
    if (s == "edge") return SimilarityMode::edge;
    throw ConfigError("unknown similarity mode '" + s + "' (expected cc or edge)");
}

std::string to_string(SimilarityMode m) { return m == SimilarityMode::cc ? "cc" : "edge"; }

LossConfig LossConfig::defaults_for(SimilarityMode mode) {
    LossConfig c;
    c.lambda = mode == SimilarityMode::cc ? 0.01 : 0.1;
    return c;
}

void LossConfig::validate() const {
    if (cc_window < 3 || cc_window % 2 == 0)
        throw ConfigError("cc_window must be odd and >= 3, got " + std::to_string(cc_window));
    if (!std::isfinite(lambda) || lambda < 0)
        throw ConfigError("lambda must be finite and >= 0");
    if (!(epsilon > 0)) throw ConfigError("epsilon must be positive");
}

namespace {

template <typename Real>
void require_images(const char* op, const BasicTensor<Real>& a, const BasicTensor<Real>& b) {
    if (a.shape() != b.shape())
        throw DimensionError(std::string(op) + ": shape mismatch " + to_string(a.shape()) +
                             " vs " + to_string(b.shape()));
}

template <typename Real>
BasicTensor<Real> edge_similarity(const BasicTensor<Real>& t_ref, const BasicTensor<Real>& x,
                                  const EdgeDetector<Real>* detector) {
    if (detector == nullptr || !detector->ready())
        throw ConfigError("edge similarity requires a trained edge detector");
    BasicTensor<Real> target_edges;
    {
        NoGradGuard no_grad;
        target_edges = detector->detect(t_ref.detach());
    }
    return mse_loss(target_edges, detector->detect(x));
}

template <typename Real>
BasicTensor<Real> similarity(const BasicTensor<Real>& t_ref, const BasicTensor<Real>& x,
                             const LossConfig& cfg, SimilarityMode mode,
                             const EdgeDetector<Real>* detector) {
    if (mode == SimilarityMode::cc) return cc_loss(t_ref, x, cfg);
    return edge_similarity(t_ref, x, detector);
}

}  // namespace

template <typename Real>
BasicTensor<Real> cc_squared_map(const BasicTensor<Real>& t, const BasicTensor<Real>& w,
                                 const LossConfig& cfg) {
    require_images("cc_loss", t, w);
    if (t.dim() != 4) throw DimensionError("cc_loss: expected [N,1,H,W] images");
    if (cfg.cc_window % 2 == 0 || cfg.cc_window < 3)
        throw ConfigError("cc_loss: window must be odd and >= 3");
    if (t.extent(2) < cfg.cc_window || t.extent(3) < cfg.cc_window)
        throw DimensionError("cc_loss: window " + std::to_string(cfg.cc_window) +
                             " larger than image " + to_string(t.shape()));
    const std::size_t win = cfg.cc_window;
    const Real inv_n = Real(1) / static_cast<Real>(win * win);

    const auto st = ops::box_sum(t, win);
    const auto sw = ops::box_sum(w, win);
    const auto stt = ops::box_sum(ops::square(t), win);
    const auto sww = ops::box_sum(ops::square(w), win);
    const auto stw = ops::box_sum(ops::mul(t, w), win);

    const auto cross = ops::sub(stw, ops::scalar_mul(ops::mul(st, sw), inv_n));
    // Clamped at zero: in float, cancellation on flat windows can leave a
    // small negative variance that would push the denominator through zero.
    const auto var_t =
        ops::leaky_relu(ops::sub(stt, ops::scalar_mul(ops::square(st), inv_n)), Real(0));
    const auto var_w =
        ops::leaky_relu(ops::sub(sww, ops::scalar_mul(ops::square(sw), inv_n)), Real(0));
    const auto denom = ops::add_scalar(ops::mul(var_t, var_w), static_cast<Real>(cfg.epsilon));
    return ops::div(ops::square(cross), denom);
}

template <typename Real>
BasicTensor<Real> cc_loss(const BasicTensor<Real>& t, const BasicTensor<Real>& w,
                          const LossConfig& cfg) {
    const auto cc2 = cc_squared_map(t, w, cfg);
    return ops::add_scalar(ops::scalar_mul(ops::mean_all(cc2), Real(-1)), Real(1));
}

template <typename Real>
BasicTensor<Real> mse_loss(const BasicTensor<Real>& a, const BasicTensor<Real>& b) {
    require_images("mse_loss", a, b);
    return ops::mean_all(ops::square(ops::sub(a, b)));
}

template <typename Real>
BasicTensor<Real> smoothness_loss(const BasicTensor<Real>& u) {
    if (u.dim() != 4 || u.extent(1) != 2)
        throw DimensionError("smoothness_loss: expected [N,2,H,W] field, got " +
                             to_string(u.shape()));
    // Both components share a direction's entry count, so the joint mean per
    // direction is already the average of the two component slots.
    const auto rows = ops::mean_all(ops::square(ops::diff_rows(u)));
    const auto cols = ops::mean_all(ops::square(ops::diff_cols(u)));
    return ops::scalar_mul(ops::add(rows, cols), Real(0.5));
}

template <typename Real>
BasicTensor<Real> objective_pairwise(const BasicTensor<Real>& t_ref,
                                     const BasicTensor<Real>& warped, const BasicTensor<Real>& u,
                                     const LossConfig& cfg, SimilarityMode mode,
                                     const EdgeDetector<Real>* detector) {
    const auto ls = similarity(t_ref, warped, cfg, mode, detector);
    return ops::add(ls, ops::scalar_mul(smoothness_loss(u), static_cast<Real>(cfg.lambda)));
}

template <typename Real>
BasicTensor<Real> objective_group(const BasicTensor<Real>& t_ref,
                                  const BasicTensor<Real>& warped_mean,
                                  const BasicTensor<Real>& fields, const LossConfig& cfg,
                                  SimilarityMode mode, const EdgeDetector<Real>* detector) {
    if (fields.dim() != 4 || fields.extent(0) == 0)
        throw DimensionError("objective_group: empty field list");
    // smoothness_loss averages over the K fields, i.e. (1/K) sum_j L_r(u_j).
    return objective_pairwise(t_ref, warped_mean, fields, cfg, mode, detector);
}

#define GROUPREG_INSTANTIATE_LOSSES(Real)                                                        \
    template BasicTensor<Real> cc_squared_map(const BasicTensor<Real>&, const BasicTensor<Real>&, \
                                              const LossConfig&);                                \
    template BasicTensor<Real> cc_loss(const BasicTensor<Real>&, const BasicTensor<Real>&,       \
                                       const LossConfig&);                                       \
    template BasicTensor<Real> mse_loss(const BasicTensor<Real>&, const BasicTensor<Real>&);     \
    template BasicTensor<Real> smoothness_loss(const BasicTensor<Real>&);                        \
    template BasicTensor<Real> objective_pairwise(                                               \
        const BasicTensor<Real>&, const BasicTensor<Real>&, const BasicTensor<Real>&,            \
        const LossConfig&, SimilarityMode, const EdgeDetector<Real>*);                           \
    template BasicTensor<Real> objective_group(const BasicTensor<Real>&, const BasicTensor<Real>&, \
                                               const BasicTensor<Real>&, const LossConfig&,      \
                                               SimilarityMode, const EdgeDetector<Real>*);

GROUPREG_INSTANTIATE_LOSSES(float)
GROUPREG_INSTANTIATE_LOSSES(double)

}  // namespace groupreg
