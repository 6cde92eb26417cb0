#pragma once

// Dense row-major tensor with define-by-run reverse-mode differentiation.
//
// A BasicTensor is a cheap handle onto a shared graph node. Operations that
// consume tensors with requires_grad() record a backward closure on their
// result; backward() on a scalar result replays those closures once each, in
// reverse topological order, accumulating into every tracked leaf.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace groupreg {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

template <typename Real>
class BasicTensor;

namespace detail {

template <typename Real>
struct Node {
    Shape shape;
    std::vector<Real> data;
    std::vector<Real> grad;  // empty until something is accumulated
    bool requires_grad = false;
    bool is_leaf = true;
    bool released = false;  // graph consumed by a non-retaining backward()
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;

    std::vector<Real>& ensure_grad();
};

}  // namespace detail

/// Disables graph recording on the current thread while alive.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool grad_mode_enabled();

template <typename Real>
class BasicTensor {
public:
    using value_type = Real;
    using NodeType = detail::Node<Real>;

    BasicTensor();
    BasicTensor(Shape shape, std::vector<Real> values, bool requires_grad = false);

    static BasicTensor zeros(Shape shape, bool requires_grad = false);
    static BasicTensor full(Shape shape, Real value, bool requires_grad = false);
    static BasicTensor scalar(Real value, bool requires_grad = false);

    const Shape& shape() const { return node_->shape; }
    std::size_t dim() const { return node_->shape.size(); }
    std::size_t extent(std::size_t axis) const;
    std::size_t size() const { return node_->data.size(); }

    std::span<const Real> data() const { return node_->data; }
    /// Direct write access; only legal on leaves (parameters, inputs).
    std::span<Real> mutable_data();
    Real item() const;

    bool requires_grad() const { return node_->requires_grad; }
    BasicTensor& set_requires_grad(bool on);
    bool is_leaf() const { return node_->is_leaf; }

    bool has_grad() const { return !node_->grad.empty(); }
    std::span<const Real> grad() const { return node_->grad; }
    std::span<Real> mutable_grad() { return node_->ensure_grad(); }
    void zero_grad();

    /// Reverse pass from a single-element tensor. Without retain_graph the
    /// recorded closures are dropped and a second call throws.
    void backward(bool retain_graph = false);

    /// Same values, no history.
    BasicTensor detach() const;
    BasicTensor clone() const;

    bool same_node(const BasicTensor& other) const { return node_ == other.node_; }

    // Used by op implementations to wire the graph.
    const std::shared_ptr<NodeType>& node() const { return node_; }
    explicit BasicTensor(std::shared_ptr<NodeType> node) : node_(std::move(node)) {}

private:
    std::shared_ptr<NodeType> node_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

/// Copy between precisions; the result is a fresh leaf.
template <typename To, typename From>
BasicTensor<To> cast(const BasicTensor<From>& t) {
    std::vector<To> values(t.data().begin(), t.data().end());
    return BasicTensor<To>(t.shape(), std::move(values));
}

namespace detail {

/// Builds an op result. The backward closure is recorded only when grad mode
/// is on and at least one input is tracked.
template <typename Real>
BasicTensor<Real> make_result(Shape shape, std::vector<Real> values,
                              std::initializer_list<const BasicTensor<Real>*> inputs,
                              std::function<void(Node<Real>&)> backward_fn);

template <typename Real>
BasicTensor<Real> make_result(Shape shape, std::vector<Real> values,
                              const std::vector<BasicTensor<Real>>& inputs,
                              std::function<void(Node<Real>&)> backward_fn);

}  // namespace detail

}  // namespace groupreg
