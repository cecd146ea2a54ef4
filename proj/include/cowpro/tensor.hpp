#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "cowpro/common.hpp"

namespace cowpro {

namespace detail {

// One node of the recorded graph. `parents` holds the inputs that were used
// to produce this node; `backward_fn` reads this node's grad (already fully
// accumulated when it runs) and adds contributions to the parents' grads.
// Edges point child -> parent only, so shared_ptr ownership is acyclic and
// the whole tape is released when the step's tensors go out of scope.
template <typename T>
struct Node {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;  // lazily allocated, same length as data
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;

    std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }

    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), T(0));
    }
};

}  // namespace detail

// Value-semantics handle to a graph node. Copies share the node. Data is
// immutable after construction except through backward() and the explicitly
// named mutable accessors used by the optimizer and weight initialization.
template <typename T>
class Tensor {
public:
    using Node = detail::Node<T>;

    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        return from_data(std::move(shape), {}, requires_grad, true);
    }

    static Tensor full(Shape shape, T value, bool requires_grad = false) {
        std::vector<T> d(static_cast<std::size_t>(numel_of(shape)), value);
        return from_data(std::move(shape), std::move(d), requires_grad);
    }

    static Tensor from_data(Shape shape, std::vector<T> data, bool requires_grad = false,
                            bool zero_fill = false) {
        auto n = std::make_shared<Node>();
        n->shape = std::move(shape);
        for (int d : n->shape)
            require(d > 0, "tensor extents must be positive, got " + shape_str(n->shape));
        std::int64_t count = numel_of(n->shape);
        if (zero_fill) {
            n->data.assign(static_cast<std::size_t>(count), T(0));
        } else {
            require(static_cast<std::int64_t>(data.size()) == count,
                    "data length " + std::to_string(data.size()) + " does not match shape " +
                        shape_str(n->shape));
            n->data = std::move(data);
        }
        n->requires_grad = requires_grad;
        Tensor t;
        t.node_ = std::move(n);
        return t;
    }

    static Tensor scalar(T value, bool requires_grad = false) {
        return from_data({1}, {value}, requires_grad);
    }

    bool valid() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    int rank() const { return static_cast<int>(node_->shape.size()); }
    int dim(int i) const { return node_->shape[static_cast<std::size_t>(i)]; }
    std::int64_t numel() const { return node_->numel(); }
    bool requires_grad() const { return node_->requires_grad; }

    const std::vector<T>& data() const { return node_->data; }
    const std::vector<T>& grad() const {
        node_->ensure_grad();
        return node_->grad;
    }

    // Optimizer/init entry points; see the concurrency notes in the README.
    std::vector<T>& mutable_data() { return node_->data; }
    void set_requires_grad(bool rg) {
        require(node_->parents.empty(), "set_requires_grad: only leaves may be toggled");
        node_->requires_grad = rg;
    }
    void zero_grad() {
        if (!node_->grad.empty()) node_->grad.assign(node_->data.size(), T(0));
    }

    T item() const {
        require(numel() == 1, "item() requires a single-element tensor");
        return node_->data[0];
    }

    // Drops graph history; the result is a leaf holding the same values.
    Tensor detach() const {
        return from_data(node_->shape, node_->data, false);
    }

    Node* node() const { return node_.get(); }
    const std::shared_ptr<Node>& node_ptr() const { return node_; }

    // Internal: construct an op result wired into the tape. `parents` may
    // include non-grad tensors; backward_fn must skip them.
    static Tensor make_op(Shape shape, std::vector<T> data, std::vector<Tensor> parents,
                          std::function<void(Node&)> backward_fn) {
        bool rg = false;
        for (const auto& p : parents) rg = rg || p.requires_grad();
        Tensor out = from_data(std::move(shape), std::move(data));
        if (rg) {
            out.node_->requires_grad = true;
            out.node_->parents.reserve(parents.size());
            for (auto& p : parents) out.node_->parents.push_back(p.node_ptr());
            out.node_->backward_fn = std::move(backward_fn);
        }
        return out;
    }

private:
    std::shared_ptr<Node> node_;
};

using Tensor32 = Tensor<float>;
using Tensor64 = Tensor<double>;

// Reverse pass. Seeds the scalar loss with grad 1 and walks the recorded
// graph once in reverse topological order. Grads accumulate across calls
// until zero_grad() is used.
template <typename T>
void backward(const Tensor<T>& loss) {
    require(loss.valid(), "backward on an empty tensor");
    require(loss.numel() == 1, "backward requires a scalar loss, got shape " +
                                   shape_str(loss.shape()));
    require(loss.requires_grad(), "backward requires a loss with gradient history");

    using Node = detail::Node<T>;

    // Iterative post-order DFS; reversed post-order is a topological order
    // with every consumer ahead of its producers.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(loss.node(), 0);
    visited.insert(loss.node());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* parent = node->parents[next].get();
            ++next;
            if (parent->requires_grad && !visited.count(parent)) {
                visited.insert(parent);
                stack.emplace_back(parent, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    loss.node()->ensure_grad();
    loss.node()->grad[0] += T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* node = *it;
        if (node->backward_fn) {
            for (auto& p : node->parents)
                if (p->requires_grad) p->ensure_grad();
            node->backward_fn(*node);
        }
    }
}

}  // namespace cowpro
