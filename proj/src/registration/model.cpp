#include "groupreg/model.hpp"

#include "groupreg/error.hpp"
#include "groupreg/ops.hpp"
#include "groupreg/warp.hpp"

namespace groupreg {

Variant parse_variant(const std::string& s) {
    if (s == "vxm-cc") return Variant::vxm_cc;
    if (s == "vxm-ed") return Variant::vxm_ed;
    if (s == "aim-cc") return Variant::aim_cc;
    if (s == "aim-ed") return Variant::aim_ed;
    throw ConfigError("unknown variant '" + s + "' (expected vxm-cc, vxm-ed, aim-cc or aim-ed)");
}

std::string to_string(Variant v) {
    switch (v) {
        case Variant::vxm_cc: return "vxm-cc";
        case Variant::vxm_ed: return "vxm-ed";
        case Variant::aim_cc: return "aim-cc";
        case Variant::aim_ed: return "aim-ed";
    }
    return "?";
}

namespace {

enum Layer { enc0, enc1, enc2, enc3, dec0, dec1, dec2, dec3, ext0, ext1, flow, layer_count };

}  // namespace

template <typename Real>
std::vector<ConvLayer<Real>> RegistrationNet<Real>::architecture() {
    return {
        make_conv_layer<Real>("enc0", 2, 16, 3, 2),  make_conv_layer<Real>("enc1", 16, 32, 3, 2),
        make_conv_layer<Real>("enc2", 32, 32, 3, 2), make_conv_layer<Real>("enc3", 32, 32, 3, 2),
        make_conv_layer<Real>("dec0", 32, 32),       make_conv_layer<Real>("dec1", 64, 32),
        make_conv_layer<Real>("dec2", 64, 32),       make_conv_layer<Real>("dec3", 48, 32),
        make_conv_layer<Real>("ext0", 34, 16),       make_conv_layer<Real>("ext1", 16, 16),
        make_conv_layer<Real>("flow", 16, 2),
    };
}

template <typename Real>
RegistrationNet<Real> RegistrationNet<Real>::initialise(std::uint64_t seed) {
    RegistrationNet net;
    net.layers_ = architecture();
    Rng rng(seed);
    for (std::size_t k = 0; k + 1 < net.layers_.size(); ++k) he_init(net.layers_[k], rng, kSlope);
    // flow stays zero: the untrained network predicts the identity transform.
    return net;
}

template <typename Real>
BasicTensor<Real> RegistrationNet<Real>::predict(const BasicTensor<Real>& target,
                                                 const BasicTensor<Real>& source) const {
    if (layers_.size() != layer_count) throw ConfigError("registration network is not initialised");
    if (target.shape() != source.shape() || target.dim() != 4 || target.extent(1) != 1)
        throw DimensionError("predict: target " + to_string(target.shape()) + " and source " +
                             to_string(source.shape()) + " must both be [N,1,H,W]");
    const std::size_t m = std::size_t{1} << kDownsamplings;
    if (target.extent(2) % m != 0 || target.extent(3) % m != 0)
        throw DimensionError("predict: H and W (axes 2,3) must be multiples of " +
                             std::to_string(m) + ", got " + to_string(target.shape()));

    const Real slope = static_cast<Real>(kSlope);
    auto act = [&](Layer l, const BasicTensor<Real>& x) {
        return ops::leaky_relu(layers_[l].forward(x), slope);
    };
    const auto x = ops::concat_channels<Real>({target, source});
    const auto e0 = act(enc0, x);
    const auto e1 = act(enc1, e0);
    const auto e2 = act(enc2, e1);
    const auto e3 = act(enc3, e2);
    auto d = ops::concat_channels<Real>({ops::upsample2x(act(dec0, e3)), e2});
    d = ops::concat_channels<Real>({ops::upsample2x(act(dec1, d)), e1});
    d = ops::concat_channels<Real>({ops::upsample2x(act(dec2, d)), e0});
    d = ops::concat_channels<Real>({ops::upsample2x(act(dec3, d)), x});
    d = act(ext1, act(ext0, d));
    return layers_[flow].forward(d);
}

template <typename Real>
std::vector<BasicTensor<Real>*> RegistrationNet<Real>::parameters() {
    std::vector<BasicTensor<Real>*> out;
    for (auto& l : layers_) {
        out.push_back(&l.weight);
        out.push_back(&l.bias);
    }
    return out;
}

template <typename Real>
std::size_t RegistrationNet<Real>::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.parameter_count();
    return n;
}

template <typename Real>
void RegistrationNet<Real>::set_trainable(bool on) {
    for (auto& l : layers_) {
        l.weight.set_requires_grad(on);
        l.bias.set_requires_grad(on);
    }
}

template <typename Real>
GroupOutput<Real> forward_group(const RegistrationNet<Real>& net, const GroupInput<Real>& gin) {
    if (gin.sources.dim() != 4 || gin.sources.extent(0) == 0)
        throw DimensionError("forward_group: need K >= 1 sources as [K,1,H,W]");
    if (gin.target_noisy.dim() != 4 || gin.target_noisy.extent(0) != 1)
        throw DimensionError("forward_group: target must be [1,1,H,W]");
    const std::size_t k = gin.k();
    GroupOutput<Real> out;
    out.fields = net.predict(ops::repeat_batch(gin.target_noisy, k), gin.sources);
    out.warped = warp_bilinear(gin.sources, out.fields);
    out.registered = ops::mean_batch(out.warped);
    return out;
}

template <typename Real>
BasicTensor<Real> loss_from_output(const GroupOutput<Real>& out, const GroupInput<Real>& gin,
                                   const LossConfig& cfg, Variant variant,
                                   const std::type_identity_t<EdgeDetector<Real>>* detector) {
    if (!gin.has_reference())
        throw ConfigError("training_loss: the clean reference is required for training");
    const auto mode = similarity_of(variant);
    if (mode == SimilarityMode::edge && (detector == nullptr || !detector->ready()))
        throw ConfigError("training_loss: variant " + to_string(variant) +
                          " requires an edge detector");
    if (is_groupwise(variant))
        return objective_group(gin.clean_reference, out.registered, out.fields, cfg, mode,
                               detector);
    // Batched pairwise terms: every loss averages over the K items.
    return objective_pairwise(ops::repeat_batch(gin.clean_reference, gin.k()), out.warped,
                              out.fields, cfg, mode, detector);
}

template <typename Real>
BasicTensor<Real> training_loss(const RegistrationNet<Real>& net, const GroupInput<Real>& gin,
                                const LossConfig& cfg, Variant variant,
                                const std::type_identity_t<EdgeDetector<Real>>* detector) {
    return loss_from_output(forward_group(net, gin), gin, cfg, variant, detector);
}

template class RegistrationNet<float>;
template class RegistrationNet<double>;

#define GROUPREG_INSTANTIATE_MODEL(Real)                                                         \
    template GroupOutput<Real> forward_group(const RegistrationNet<Real>&,                      \
                                             const GroupInput<Real>&);                          \
    template BasicTensor<Real> loss_from_output(const GroupOutput<Real>&,                       \
                                                const GroupInput<Real>&, const LossConfig&,     \
                                                Variant, const std::type_identity_t<EdgeDetector<Real>>*);            \
    template BasicTensor<Real> training_loss(const RegistrationNet<Real>&,                      \
                                             const GroupInput<Real>&, const LossConfig&,        \
                                             Variant, const std::type_identity_t<EdgeDetector<Real>>*);

GROUPREG_INSTANTIATE_MODEL(float)
GROUPREG_INSTANTIATE_MODEL(double)

}  // namespace groupreg
