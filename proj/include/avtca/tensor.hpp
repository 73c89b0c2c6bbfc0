#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "avtca/errors.hpp"

namespace avtca {

// Extents of one tensor, outermost first. Row-major storage throughout.
using Shape = std::vector<int>;

inline int64_t numel(const Shape& s) {
    int64_t n = 1;
    for (int d : s) n *= d;
    return n;
}

std::string shape_str(const Shape& s);

namespace detail {

// One node of the reverse-mode tape. `backward` reads this node's grad and
// accumulates into the parents' grads; parents keep upstream nodes alive.
template <typename S>
struct Node {
    Shape shape;
    std::vector<S> value;
    std::vector<S> grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;

    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), S(0));
    }
};

}  // namespace detail

// Value-semantic handle to a tape node. Copies share the node. A
// default-constructed Tensor is null (defined() == false); ops reject it.
template <typename S>
class Tensor {
  public:
    using Scalar = S;

    Tensor() = default;

    static Tensor zeros(Shape shape) { return full(std::move(shape), S(0)); }

    static Tensor full(Shape shape, S v) {
        auto node = std::make_shared<detail::Node<S>>();
        node->value.assign(static_cast<size_t>(numel(shape)), v);
        node->shape = std::move(shape);
        return Tensor(std::move(node));
    }

    static Tensor from(Shape shape, std::vector<S> data) {
        if (static_cast<int64_t>(data.size()) != numel(shape))
            throw ShapeError("tensor data length " + std::to_string(data.size()) +
                             " does not match shape " + shape_str(shape));
        auto node = std::make_shared<detail::Node<S>>();
        node->shape = std::move(shape);
        node->value = std::move(data);
        return Tensor(std::move(node));
    }

    static Tensor scalar(S v) { return from({1}, {v}); }

    bool defined() const { return node_ != nullptr; }

    const Shape& shape() const { return node_->shape; }
    int rank() const { return static_cast<int>(node_->shape.size()); }
    int dim(int axis) const { return node_->shape[static_cast<size_t>(axis)]; }
    int64_t size() const { return static_cast<int64_t>(node_->value.size()); }

    const std::vector<S>& data() const { return node_->value; }

    // Direct writes are only meaningful on leaves (parameters, inputs).
    std::vector<S>& mutable_data() { return node_->value; }

    S item() const {
        if (size() != 1) throw ShapeError("item() on non-scalar tensor " + shape_str(shape()));
        return node_->value[0];
    }

    bool requires_grad() const { return node_->requires_grad; }

    Tensor& set_requires_grad(bool flag) {
        node_->requires_grad = flag;
        return *this;
    }

    const std::vector<S>& grad() const { return node_->grad; }

    void zero_grad() { node_->grad.assign(node_->value.size(), S(0)); }

    std::shared_ptr<detail::Node<S>> node() const { return node_; }

    explicit Tensor(std::shared_ptr<detail::Node<S>> node) : node_(std::move(node)) {}

  private:
    std::shared_ptr<detail::Node<S>> node_;
};

// Reverse pass from a scalar root: seeds d(root)/d(root) = 1 and runs the
// tape in reverse topological order. Grads accumulate; callers zero
// parameter grads between steps.
template <typename S>
void backward(const Tensor<S>& root);

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace avtca
