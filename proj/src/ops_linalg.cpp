#include <algorithm>
#include <cmath>

#include "avtca/ops.hpp"
#include "ops_common.hpp"

namespace avtca {
namespace ops {

using namespace detail_ops;

namespace {

// Batch-broadcast bookkeeping for matmul: flat batch index -> operand offsets.
struct MatmulPlan {
    Shape batch;          // broadcast batch extents
    Shape out;            // batch + {m, n}
    int64_t batches = 1;
    int m = 0, k = 0, n = 0;
    std::vector<int64_t> astride, bstride;  // per batch axis, elements

    int64_t a_base(int64_t flat) const { return offset(flat, astride); }
    int64_t b_base(int64_t flat) const { return offset(flat, bstride); }

  private:
    int64_t offset(int64_t flat, const std::vector<int64_t>& st) const {
        int64_t off = 0;
        for (int ax = static_cast<int>(batch.size()) - 1; ax >= 0; --ax) {
            int64_t coord = flat % batch[ax];
            flat /= batch[ax];
            off += coord * st[ax];
        }
        return off;
    }
};

MatmulPlan plan_matmul(const Shape& a, const Shape& b) {
    if (a.size() < 2 || b.size() < 2)
        throw ShapeError("matmul needs rank >= 2 operands, got " + shape_str(a) + " and " +
                         shape_str(b));
    MatmulPlan p;
    p.m = a[a.size() - 2];
    p.k = a[a.size() - 1];
    const int kb = b[b.size() - 2];
    p.n = b[b.size() - 1];
    if (p.k != kb)
        throw ShapeError("matmul inner extents differ: " + shape_str(a) + " vs " + shape_str(b));

    Shape abatch(a.begin(), a.end() - 2), bbatch(b.begin(), b.end() - 2);
    const int r = static_cast<int>(std::max(abatch.size(), bbatch.size()));
    Shape ea(r, 1), eb(r, 1);
    std::copy(abatch.begin(), abatch.end(), ea.begin() + (r - abatch.size()));
    std::copy(bbatch.begin(), bbatch.end(), eb.begin() + (r - bbatch.size()));
    p.batch.resize(r);
    for (int i = 0; i < r; ++i) {
        if (ea[i] != eb[i] && ea[i] != 1 && eb[i] != 1)
            throw ShapeError("matmul batch extents incompatible: " + shape_str(a) + " vs " +
                             shape_str(b));
        p.batch[i] = std::max(ea[i], eb[i]);
    }
    p.batches = numel(p.batch);
    auto sa = row_strides(ea), sb = row_strides(eb);
    p.astride.resize(r);
    p.bstride.resize(r);
    const int64_t amat = static_cast<int64_t>(p.m) * p.k;
    const int64_t bmat = static_cast<int64_t>(p.k) * p.n;
    for (int i = 0; i < r; ++i) {
        p.astride[i] = ea[i] == 1 ? 0 : sa[i] * amat;
        p.bstride[i] = eb[i] == 1 ? 0 : sb[i] * bmat;
    }
    p.out = p.batch;
    p.out.push_back(p.m);
    p.out.push_back(p.n);
    return p;
}

}  // namespace

template <typename S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b) {
    check_defined(a, "matmul lhs");
    check_defined(b, "matmul rhs");
    MatmulPlan p = plan_matmul(a.shape(), b.shape());
    const int m = p.m, k = p.k, n = p.n;
    const int64_t out_mat = static_cast<int64_t>(m) * n;
    std::vector<S> out(static_cast<size_t>(p.batches * out_mat), S(0));
    const S* av = a.data().data();
    const S* bv = b.data().data();

#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(worker_count()) \
    if (p.batches * out_mat * k > 262144)
#endif
    for (int64_t bi = 0; bi < p.batches; ++bi) {
        const S* A = av + p.a_base(bi);
        const S* B = bv + p.b_base(bi);
        S* C = out.data() + bi * out_mat;
        for (int i = 0; i < m; ++i)
            for (int q = 0; q < k; ++q) {
                const S aval = A[static_cast<int64_t>(i) * k + q];
                const S* Brow = B + static_cast<int64_t>(q) * n;
                S* Crow = C + static_cast<int64_t>(i) * n;
                for (int j = 0; j < n; ++j) Crow[j] += aval * Brow[j];
            }
    }

    auto an = a.node();
    auto bn = b.node();
    return make_result<S>(
        p.out, std::move(out), {a, b},
        [an, bn, p](avtca::detail::Node<S>& self) {
            const int m = p.m, k = p.k, n = p.n;
            const int64_t out_mat = static_cast<int64_t>(m) * n;
            if (an->requires_grad) an->ensure_grad();
            if (bn->requires_grad) bn->ensure_grad();
            // Sequential over batches: broadcast operands receive summed
            // gradients at a fixed accumulation order.
            for (int64_t bi = 0; bi < p.batches; ++bi) {
                const S* G = self.grad.data() + bi * out_mat;
                const S* A = an->value.data() + p.a_base(bi);
                const S* B = bn->value.data() + p.b_base(bi);
                if (an->requires_grad) {
                    S* dA = an->grad.data() + p.a_base(bi);
                    for (int i = 0; i < m; ++i)
                        for (int q = 0; q < k; ++q) {
                            const S* Grow = G + static_cast<int64_t>(i) * n;
                            const S* Brow = B + static_cast<int64_t>(q) * n;
                            S s = S(0);
                            for (int j = 0; j < n; ++j) s += Grow[j] * Brow[j];
                            dA[static_cast<int64_t>(i) * k + q] += s;
                        }
                }
                if (bn->requires_grad) {
                    S* dB = bn->grad.data() + p.b_base(bi);
                    for (int i = 0; i < m; ++i)
                        for (int q = 0; q < k; ++q) {
                            const S aval = A[static_cast<int64_t>(i) * k + q];
                            const S* Grow = G + static_cast<int64_t>(i) * n;
                            S* dBrow = dB + static_cast<int64_t>(q) * n;
                            for (int j = 0; j < n; ++j) dBrow[j] += aval * Grow[j];
                        }
                }
            }
        },
        "matmul");
}

template <typename S>
Tensor<S> fully_connected(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& b) {
    check_defined(x, "fully_connected input");
    check_defined(w, "fully_connected weight");
    if (w.rank() != 2)
        throw ShapeError("fully_connected weight must be rank 2, got " + shape_str(w.shape()));
    if (x.rank() < 1 || x.shape().back() != w.dim(0))
        throw ShapeError("fully_connected extents differ: input " + shape_str(x.shape()) +
                         " vs weight " + shape_str(w.shape()));
    Tensor<S> x2 = x;
    bool was_vector = false;
    if (x.rank() == 1) {  // promote to a single-row matrix for matmul
        x2 = reshape(x, {1, x.dim(0)});
        was_vector = true;
    }
    Tensor<S> y = matmul(x2, w);
    if (b.defined()) {
        if (b.rank() != 1 || b.dim(0) != w.dim(1))
            throw ShapeError("fully_connected bias " + shape_str(b.shape()) +
                             " does not match weight " + shape_str(w.shape()));
        y = add(y, b);
    }
    if (was_vector) y = reshape(y, {w.dim(1)});
    return y;
}

template <typename S>
Tensor<S> softmax(const Tensor<S>& x, int axis) {
    check_defined(x, "softmax input");
    const int r = x.rank();
    if (axis < 0) axis += r;
    if (axis < 0 || axis >= r)
        throw ShapeError("softmax axis out of range for " + shape_str(x.shape()));
    const auto& shp = x.shape();
    const int len = shp[axis];
    int64_t inner = 1, outer = 1;
    for (int i = axis + 1; i < r; ++i) inner *= shp[i];
    for (int i = 0; i < axis; ++i) outer *= shp[i];

    const S* xv = x.data().data();
    std::vector<S> out(static_cast<size_t>(x.size()));
    for (int64_t o = 0; o < outer; ++o)
        for (int64_t in = 0; in < inner; ++in) {
            const int64_t base = o * len * inner + in;
            S mx = xv[base];
            for (int i = 1; i < len; ++i) mx = std::max(mx, xv[base + i * inner]);
            S total = S(0);
            for (int i = 0; i < len; ++i) {
                S e = std::exp(xv[base + i * inner] - mx);
                out[base + i * inner] = e;
                total += e;
            }
            for (int i = 0; i < len; ++i) out[base + i * inner] /= total;
        }

    auto xn = x.node();
    return make_result<S>(
        x.shape(), std::move(out), {x},
        [xn, len, inner, outer](avtca::detail::Node<S>& self) {
            if (!xn->requires_grad) return;
            xn->ensure_grad();
            const S* y = self.value.data();
            const S* g = self.grad.data();
            for (int64_t o = 0; o < outer; ++o)
                for (int64_t in = 0; in < inner; ++in) {
                    const int64_t base = o * len * inner + in;
                    S dot = S(0);
                    for (int i = 0; i < len; ++i)
                        dot += g[base + i * inner] * y[base + i * inner];
                    for (int i = 0; i < len; ++i)
                        xn->grad[base + i * inner] +=
                            y[base + i * inner] * (g[base + i * inner] - dot);
                }
        },
        "softmax");
}

template <typename S>
Tensor<S> sum(const Tensor<S>& x, std::vector<int> axes, bool keepdims) {
    check_defined(x, "sum input");
    Shape keep, drop;
    int64_t count = 0;
    auto st = reduce_strides(x.shape(), axes, &keep, &drop, &count);
    std::vector<S> out(static_cast<size_t>(numel(keep)), S(0));
    const auto& xv = x.data();
    const Shape in_shape = x.shape();
    const int64_t n = x.size();
    // Input-order accumulation: fixed, thread-free reduction order.
    auto in_st = row_strides(in_shape);
    for (int64_t i = 0; i < n; ++i) {
        int64_t off = 0, rem = i;
        for (size_t ax = 0; ax < in_shape.size(); ++ax) {
            int64_t coord = rem / in_st[ax];
            rem %= in_st[ax];
            off += coord * st[ax];
        }
        out[off] += xv[i];
    }
    Shape out_shape = keepdims ? keep : drop;
    auto xn = x.node();
    return make_result<S>(
        out_shape, std::move(out), {x},
        [xn, st, in_shape](avtca::detail::Node<S>& self) {
            if (!xn->requires_grad) return;
            xn->ensure_grad();
            auto in_st = row_strides(in_shape);
            const int64_t n = static_cast<int64_t>(xn->value.size());
            for (int64_t i = 0; i < n; ++i) {
                int64_t off = 0, rem = i;
                for (size_t ax = 0; ax < in_shape.size(); ++ax) {
                    int64_t coord = rem / in_st[ax];
                    rem %= in_st[ax];
                    off += coord * st[ax];
                }
                xn->grad[i] += self.grad[off];
            }
        },
        "sum");
}

template <typename S>
Tensor<S> mean(const Tensor<S>& x, std::vector<int> axes, bool keepdims) {
    Shape keep, drop;
    int64_t count = 0;
    reduce_strides(x.shape(), axes, &keep, &drop, &count);
    return scale(sum(x, std::move(axes), keepdims), 1.0 / static_cast<double>(count));
}

template <typename S>
Tensor<S> sum_all(const Tensor<S>& x) {
    std::vector<int> axes(x.rank());
    for (int i = 0; i < x.rank(); ++i) axes[i] = i;
    return sum(x, std::move(axes), false);
}

template <typename S>
Tensor<S> mean_all(const Tensor<S>& x) {
    return scale(sum_all(x), 1.0 / static_cast<double>(x.size()));
}

template <typename S>
Tensor<S> max_reduce(const Tensor<S>& x, int axis, bool keepdims) {
    check_defined(x, "max_reduce input");
    const int r = x.rank();
    if (axis < 0) axis += r;
    if (axis < 0 || axis >= r)
        throw ShapeError("max_reduce axis out of range for " + shape_str(x.shape()));
    const auto& shp = x.shape();
    const int len = shp[axis];
    int64_t inner = 1, outer = 1;
    for (int i = axis + 1; i < r; ++i) inner *= shp[i];
    for (int i = 0; i < axis; ++i) outer *= shp[i];

    const S* xv = x.data().data();
    std::vector<S> out(static_cast<size_t>(outer * inner));
    auto argmax = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(outer * inner));
    for (int64_t o = 0; o < outer; ++o)
        for (int64_t in = 0; in < inner; ++in) {
            const int64_t base = o * len * inner + in;
            S best = xv[base];
            int64_t bi = base;
            for (int i = 1; i < len; ++i) {
                S v = xv[base + i * inner];
                if (v > best) {  // strict: ties keep the lowest index
                    best = v;
                    bi = base + i * inner;
                }
            }
            out[o * inner + in] = best;
            (*argmax)[static_cast<size_t>(o * inner + in)] = bi;
        }

    Shape out_shape;
    for (int i = 0; i < r; ++i) {
        if (i == axis) {
            if (keepdims) out_shape.push_back(1);
        } else {
            out_shape.push_back(shp[i]);
        }
    }
    if (out_shape.empty()) out_shape.push_back(1);

    auto xn = x.node();
    return make_result<S>(
        out_shape, std::move(out), {x},
        [xn, argmax](avtca::detail::Node<S>& self) {
            if (!xn->requires_grad) return;
            xn->ensure_grad();
            for (size_t i = 0; i < argmax->size(); ++i)
                xn->grad[static_cast<size_t>((*argmax)[i])] += self.grad[i];
        },
        "max_reduce");
}

#define AVTCA_INSTANTIATE(T)                                                               \
    template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                        \
    template Tensor<T> fully_connected(const Tensor<T>&, const Tensor<T>&,                \
                                       const Tensor<T>&);                                 \
    template Tensor<T> softmax(const Tensor<T>&, int);                                     \
    template Tensor<T> sum(const Tensor<T>&, std::vector<int>, bool);                      \
    template Tensor<T> mean(const Tensor<T>&, std::vector<int>, bool);                     \
    template Tensor<T> sum_all(const Tensor<T>&);                                          \
    template Tensor<T> mean_all(const Tensor<T>&);                                         \
    template Tensor<T> max_reduce(const Tensor<T>&, int, bool)

AVTCA_INSTANTIATE(float);
AVTCA_INSTANTIATE(double);

#undef AVTCA_INSTANTIATE

}  // namespace ops
}  // namespace avtca
