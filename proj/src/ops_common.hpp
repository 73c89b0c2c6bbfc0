#pragma once

// Internal helpers shared by the op translation units. Not installed.

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "avtca/errors.hpp"
#include "avtca/tensor.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace avtca {
namespace ops {
namespace detail_ops {

using avtca::detail::Node;

// Honors AVTCA_THREADS once per process.
int worker_count();

// Row-major strides; innermost axis stride 1.
inline std::vector<int64_t> row_strides(const Shape& s) {
    std::vector<int64_t> st(s.size(), 1);
    for (int i = static_cast<int>(s.size()) - 2; i >= 0; --i)
        st[i] = st[i + 1] * s[i + 1];
    return st;
}

template <typename S>
void check_defined(const Tensor<S>& t, const char* what) {
    if (!t.defined()) throw Error(std::string("null tensor passed as ") + what);
}

template <typename S>
bool any_requires_grad(const std::vector<Tensor<S>>& parents) {
    for (const auto& p : parents)
        if (p.requires_grad()) return true;
    return false;
}

#ifndef NDEBUG
template <typename S>
void assert_finite(const std::vector<S>& v, const char* op) {
    for (S x : v)
        if (!std::isfinite(static_cast<double>(x)))
            throw Error(std::string("non-finite value produced by ") + op);
}
#endif

// Builds the result node. When no parent needs gradients the tape edge is
// dropped entirely so eval-mode forwards stay graph-free.
template <typename S>
Tensor<S> make_result(Shape shape, std::vector<S> value, std::vector<Tensor<S>> parents,
                      std::function<void(Node<S>&)> back, const char* op) {
#ifndef NDEBUG
    assert_finite(value, op);
#else
    (void)op;
#endif
    auto node = std::make_shared<Node<S>>();
    node->shape = std::move(shape);
    node->value = std::move(value);
    if (any_requires_grad(parents)) {
        node->requires_grad = true;
        node->parents.reserve(parents.size());
        for (auto& p : parents) node->parents.push_back(p.node());
        node->backward = std::move(back);
    }
    return Tensor<S>(std::move(node));
}

// ---- broadcasting ----------------------------------------------------------

struct BroadcastPlan {
    Shape out;
    // Per-out-axis strides into each operand; 0 where the operand broadcasts.
    std::vector<int64_t> stride_a;
    std::vector<int64_t> stride_b;
};

BroadcastPlan plan_broadcast(const Shape& a, const Shape& b);

// Offset of `flat` out-index into an operand given its broadcast strides.
inline int64_t bcast_offset(int64_t flat, const Shape& out,
                            const std::vector<int64_t>& stride) {
    int64_t off = 0;
    for (int ax = static_cast<int>(out.size()) - 1; ax >= 0; --ax) {
        int64_t coord = flat % out[ax];
        flat /= out[ax];
        off += coord * stride[ax];
    }
    return off;
}

// ---- reduction mapping -----------------------------------------------------

// For sum/mean: per-input-axis stride into the reduced output (0 on reduced axes).
std::vector<int64_t> reduce_strides(const Shape& in, const std::vector<int>& axes,
                                    Shape* out_keep, Shape* out_drop, int64_t* count);

}  // namespace detail_ops
}  // namespace ops
}  // namespace avtca
