#include "groupreg/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "groupreg/error.hpp"

namespace groupreg {

std::size_t numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) n *= e;
    return n;
}

std::string to_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

namespace {
thread_local bool g_grad_enabled = true;
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_mode_enabled() { return g_grad_enabled; }

namespace detail {

template <typename Real>
std::vector<Real>& Node<Real>::ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), Real(0));
    return grad;
}

template <typename Real>
BasicTensor<Real> make_result(Shape shape, std::vector<Real> values,
                              std::initializer_list<const BasicTensor<Real>*> inputs,
                              std::function<void(Node<Real>&)> backward_fn) {
    auto node = std::make_shared<Node<Real>>();
    node->shape = std::move(shape);
    node->data = std::move(values);
    if (node->data.size() != numel(node->shape))
        throw DimensionError("op produced " + std::to_string(node->data.size()) +
                             " values for shape " + to_string(node->shape));
    bool track = false;
    if (g_grad_enabled) {
        for (const auto* in : inputs) track = track || in->requires_grad();
    }
    if (track) {
        node->requires_grad = true;
        node->is_leaf = false;
        for (const auto* in : inputs) node->parents.push_back(in->node());
        node->backward_fn = std::move(backward_fn);
    }
    return BasicTensor<Real>(std::move(node));
}

template <typename Real>
BasicTensor<Real> make_result(Shape shape, std::vector<Real> values,
                              const std::vector<BasicTensor<Real>>& inputs,
                              std::function<void(Node<Real>&)> backward_fn) {
    auto node = std::make_shared<Node<Real>>();
    node->shape = std::move(shape);
    node->data = std::move(values);
    if (node->data.size() != numel(node->shape))
        throw DimensionError("op produced " + std::to_string(node->data.size()) +
                             " values for shape " + to_string(node->shape));
    bool track = false;
    if (g_grad_enabled) {
        for (const auto& in : inputs) track = track || in.requires_grad();
    }
    if (track) {
        node->requires_grad = true;
        node->is_leaf = false;
        for (const auto& in : inputs) node->parents.push_back(in.node());
        node->backward_fn = std::move(backward_fn);
    }
    return BasicTensor<Real>(std::move(node));
}

}  // namespace detail

template <typename Real>
BasicTensor<Real>::BasicTensor() : node_(std::make_shared<NodeType>()) { node_->shape = Shape{0}; }

template <typename Real>
BasicTensor<Real>::BasicTensor(Shape shape, std::vector<Real> values, bool requires_grad)
    : node_(std::make_shared<NodeType>()) {
    if (values.size() != numel(shape))
        throw DimensionError("tensor data length " + std::to_string(values.size()) +
                             " does not match shape " + to_string(shape));
    node_->shape = std::move(shape);
    node_->data = std::move(values);
    node_->requires_grad = requires_grad;
}

template <typename Real>
BasicTensor<Real> BasicTensor<Real>::zeros(Shape shape, bool requires_grad) {
    return full(std::move(shape), Real(0), requires_grad);
}

template <typename Real>
BasicTensor<Real> BasicTensor<Real>::full(Shape shape, Real value, bool requires_grad) {
    const std::size_t n = numel(shape);
    return BasicTensor(std::move(shape), std::vector<Real>(n, value), requires_grad);
}

template <typename Real>
BasicTensor<Real> BasicTensor<Real>::scalar(Real value, bool requires_grad) {
    return BasicTensor(Shape{1}, std::vector<Real>{value}, requires_grad);
}

template <typename Real>
std::size_t BasicTensor<Real>::extent(std::size_t axis) const {
    if (axis >= node_->shape.size())
        throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " +
                             to_string(node_->shape));
    return node_->shape[axis];
}

template <typename Real>
std::span<Real> BasicTensor<Real>::mutable_data() {
    if (!node_->is_leaf) throw std::logic_error("mutable_data() on a non-leaf tensor");
    return node_->data;
}

template <typename Real>
Real BasicTensor<Real>::item() const {
    if (node_->data.size() != 1)
        throw DimensionError("item() on tensor of shape " + to_string(node_->shape));
    return node_->data[0];
}

template <typename Real>
BasicTensor<Real>& BasicTensor<Real>::set_requires_grad(bool on) {
    if (!node_->is_leaf) throw std::logic_error("requires_grad can only be set on leaves");
    node_->requires_grad = on;
    return *this;
}

template <typename Real>
void BasicTensor<Real>::zero_grad() {
    node_->grad.clear();
}

template <typename Real>
void BasicTensor<Real>::backward(bool retain_graph) {
    if (node_->released)
        throw std::logic_error("backward() called twice on a released graph");
    if (!node_->requires_grad)
        throw std::logic_error("backward() on a tensor that does not require grad");
    if (node_->data.size() != 1)
        throw DimensionError("backward() needs a single-element tensor, got shape " +
                             to_string(node_->shape));

    // Iterative post-order DFS gives a topological order (parents first).
    std::vector<NodeType*> order;
    std::unordered_set<NodeType*> visited;
    std::vector<std::pair<NodeType*, std::size_t>> stack;
    stack.emplace_back(node_.get(), 0);
    visited.insert(node_.get());
    while (!stack.empty()) {
        auto& [n, next] = stack.back();
        if (next < n->parents.size()) {
            NodeType* p = n->parents[next++].get();
            if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }

    // Intermediate gradients are per-pass; only leaves accumulate.
    for (NodeType* n : order)
        if (!n->is_leaf) std::fill(n->grad.begin(), n->grad.end(), Real(0));
    if (node_->is_leaf)
        node_->ensure_grad()[0] += Real(1);
    else
        node_->ensure_grad()[0] = Real(1);

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        NodeType* n = *it;
        if (n->is_leaf) {
            n->ensure_grad();
            continue;
        }
        if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
    }
    if (retain_graph) return;
    // Released parents-first: dropping a node's parent links can only free
    // nodes that come earlier in `order`, which are already done.
    for (auto it = order.begin(); it != order.end(); ++it) {
        NodeType* n = *it;
        if (n->is_leaf) continue;
        n->backward_fn = nullptr;
        n->parents.clear();
        if (n != node_.get()) {
            n->grad.clear();
            n->grad.shrink_to_fit();
        }
        n->released = true;
    }
}

template <typename Real>
BasicTensor<Real> BasicTensor<Real>::detach() const {
    return BasicTensor(node_->shape, node_->data);
}

template <typename Real>
BasicTensor<Real> BasicTensor<Real>::clone() const {
    BasicTensor out(node_->shape, node_->data, node_->requires_grad && node_->is_leaf);
    return out;
}

template class BasicTensor<float>;
template class BasicTensor<double>;
template struct detail::Node<float>;
template struct detail::Node<double>;
template BasicTensor<float> detail::make_result(Shape, std::vector<float>,
                                                std::initializer_list<const BasicTensor<float>*>,
                                                std::function<void(detail::Node<float>&)>);
template BasicTensor<double> detail::make_result(Shape, std::vector<double>,
                                                 std::initializer_list<const BasicTensor<double>*>,
                                                 std::function<void(detail::Node<double>&)>);
template BasicTensor<float> detail::make_result(Shape, std::vector<float>,
                                                const std::vector<BasicTensor<float>>&,
                                                std::function<void(detail::Node<float>&)>);
template BasicTensor<double> detail::make_result(Shape, std::vector<double>,
                                                 const std::vector<BasicTensor<double>>&,
                                                 std::function<void(detail::Node<double>&)>);

}  // namespace groupreg
