#pragma once

// Displacement-prediction U-Net and the four registration variants:
// pairwise (vxm-*) and groupwise with a mean layer (aim-*), each with a
// correlation (cc) or edge-map (ed) similarity.

#include <cstddef>
#include <cstdint>
#include <string>
#include <type_traits>
#include <vector>

#include "groupreg/edge.hpp"
#include "groupreg/layers.hpp"
#include "groupreg/losses.hpp"
#include "groupreg/tensor.hpp"

namespace groupreg {

enum class Variant { vxm_cc, vxm_ed, aim_cc, aim_ed };

Variant parse_variant(const std::string& s);
std::string to_string(Variant v);
inline bool is_groupwise(Variant v) { return v == Variant::aim_cc || v == Variant::aim_ed; }
inline SimilarityMode similarity_of(Variant v) {
    return (v == Variant::vxm_ed || v == Variant::aim_ed) ? SimilarityMode::edge
                                                          : SimilarityMode::cc;
}

/// Encoder 16-32-32-32 (stride 2), decoder 32-32-32-32 with nearest 2x
/// upsampling and skip concatenation, two 16-channel convs and a 3x3 flow
/// conv to 2 channels. All 3x3, leaky relu 0.2, no normalisation layers.
/// Input is [N,2,H,W] (target, source); H and W must be multiples of 16.
template <typename Real>
class RegistrationNet {
public:
    static constexpr double kSlope = 0.2;
    static constexpr std::size_t kDownsamplings = 4;

    RegistrationNet() = default;

    /// He-initialised hidden layers, zero flow layer.
    static RegistrationNet initialise(std::uint64_t seed);

    /// Layer list (name, in, out, stride) of the architecture.
    static std::vector<ConvLayer<Real>> architecture();

    /// Displacement [N,2,H,W] for each (target, source) pair of [N,1,H,W] batches.
    BasicTensor<Real> predict(const BasicTensor<Real>& target,
                              const BasicTensor<Real>& source) const;

    std::vector<ConvLayer<Real>>& layers() { return layers_; }
    const std::vector<ConvLayer<Real>>& layers() const { return layers_; }
    std::vector<BasicTensor<Real>*> parameters();
    std::size_t parameter_count() const;
    void set_trainable(bool on);

    template <typename To>
    RegistrationNet<To> cast_to(bool requires_grad = false) const {
        RegistrationNet<To> out;
        for (const auto& l : layers_) out.layers().push_back(cast_layer<To>(l, requires_grad));
        return out;
    }

private:
    std::vector<ConvLayer<Real>> layers_;
};

template <typename Real>
BasicTensor<Real> predict_displacement(const RegistrationNet<Real>& net,
                                       const BasicTensor<Real>& target,
                                       const BasicTensor<Real>& source) {
    return net.predict(target, source);
}

/// One registration problem: noisy target [1,1,H,W], K sources [K,1,H,W] and,
/// for training, the clean reference [1,1,H,W].
template <typename Real>
struct GroupInput {
    BasicTensor<Real> target_noisy;
    BasicTensor<Real> sources;
    BasicTensor<Real> clean_reference;  // shape {0} when absent

    std::size_t k() const { return sources.extent(0); }
    bool has_reference() const { return clean_reference.size() > 0; }
};

template <typename Real>
struct GroupOutput {
    BasicTensor<Real> registered;  // [1,1,H,W], mean of the warped sources
    BasicTensor<Real> fields;      // [K,2,H,W]
    BasicTensor<Real> warped;      // [K,1,H,W]
};

/// All K branches run the same network against the noisy target; the clean
/// reference is never read.
template <typename Real>
GroupOutput<Real> forward_group(const RegistrationNet<Real>& net, const GroupInput<Real>& gin);

/// vxm-*: mean over j of objective_pairwise(t, warp(s_j, u_j), u_j).
/// aim-*: objective_group(t, mean_j warp(s_j, u_j), {u_j}).
/// Edge variants need a detector; similarity is always against the clean reference.
template <typename Real>
BasicTensor<Real> training_loss(const RegistrationNet<Real>& net, const GroupInput<Real>& gin,
                                const LossConfig& cfg, Variant variant,
                                const std::type_identity_t<EdgeDetector<Real>>* detector = nullptr);

/// Same as training_loss but reusing an existing forward pass.
template <typename Real>
BasicTensor<Real> loss_from_output(const GroupOutput<Real>& out, const GroupInput<Real>& gin,
                                   const LossConfig& cfg, Variant variant,
                                   const std::type_identity_t<EdgeDetector<Real>>* detector = nullptr);

}  // namespace groupreg
