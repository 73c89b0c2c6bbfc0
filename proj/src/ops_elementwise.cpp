#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "avtca/ops.hpp"
#include "ops_common.hpp"

namespace avtca {
namespace ops {

using namespace detail_ops;

namespace detail_ops {

int worker_count() {
    static int n = [] {
        int hw = 1;
#ifdef _OPENMP
        hw = omp_get_max_threads();
#endif
        if (const char* env = std::getenv("AVTCA_THREADS")) {
            int cap = std::atoi(env);
            if (cap >= 1 && cap < hw) hw = cap;
        }
        return hw;
    }();
    return n;
}

BroadcastPlan plan_broadcast(const Shape& a, const Shape& b) {
    const int ra = static_cast<int>(a.size());
    const int rb = static_cast<int>(b.size());
    const int r = std::max(ra, rb);
    BroadcastPlan plan;
    plan.out.resize(r);
    Shape ea(r, 1), eb(r, 1);
    std::copy(a.begin(), a.end(), ea.begin() + (r - ra));
    std::copy(b.begin(), b.end(), eb.begin() + (r - rb));
    for (int i = 0; i < r; ++i) {
        if (ea[i] != eb[i] && ea[i] != 1 && eb[i] != 1)
            throw ShapeError("cannot broadcast " + shape_str(a) + " with " + shape_str(b) +
                             " at axis " + std::to_string(i));
        plan.out[i] = std::max(ea[i], eb[i]);
    }
    auto sa = row_strides(ea), sb = row_strides(eb);
    plan.stride_a.resize(r);
    plan.stride_b.resize(r);
    for (int i = 0; i < r; ++i) {
        plan.stride_a[i] = ea[i] == 1 ? 0 : sa[i];
        plan.stride_b[i] = eb[i] == 1 ? 0 : sb[i];
    }
    return plan;
}

std::vector<int64_t> reduce_strides(const Shape& in, const std::vector<int>& axes,
                                    Shape* out_keep, Shape* out_drop, int64_t* count) {
    const int r = static_cast<int>(in.size());
    std::vector<bool> reduced(r, false);
    for (int ax : axes) {
        if (ax < 0 || ax >= r)
            throw ShapeError("reduce axis " + std::to_string(ax) + " out of range for " +
                             shape_str(in));
        reduced[ax] = true;
    }
    Shape keep(r);
    Shape drop;
    int64_t cnt = 1;
    for (int i = 0; i < r; ++i) {
        keep[i] = reduced[i] ? 1 : in[i];
        if (reduced[i])
            cnt *= in[i];
        else
            drop.push_back(in[i]);
    }
    if (drop.empty()) drop.push_back(1);
    auto ks = row_strides(keep);
    std::vector<int64_t> st(r);
    for (int i = 0; i < r; ++i) st[i] = reduced[i] ? 0 : ks[i];
    *out_keep = keep;
    *out_drop = drop;
    *count = cnt;
    return st;
}

}  // namespace detail_ops

// ---- generic binary op with broadcasting ------------------------------------

namespace {

// fwd(a,b) -> out; bwd returns (d/da, d/db) as functions of (a, b, g).
template <typename S, typename Fwd, typename Da, typename Db>
Tensor<S> binary_op(const Tensor<S>& a, const Tensor<S>& b, Fwd fwd, Da da, Db db,
                    const char* name) {
    check_defined(a, name);
    check_defined(b, name);
    const auto& av = a.data();
    const auto& bv = b.data();

    if (a.shape() == b.shape()) {  // fast path, no index mapping
        const int64_t n = a.size();
        std::vector<S> out(static_cast<size_t>(n));
        for (int64_t i = 0; i < n; ++i) out[i] = fwd(av[i], bv[i]);
        auto an = a.node();
        auto bn = b.node();
        return make_result<S>(
            a.shape(), std::move(out), {a, b},
            [an, bn, da, db](detail::Node<S>& self) {
                const int64_t n = static_cast<int64_t>(self.value.size());
                if (an->requires_grad) {
                    an->ensure_grad();
                    for (int64_t i = 0; i < n; ++i)
                        an->grad[i] += da(an->value[i], bn->value[i], self.grad[i]);
                }
                if (bn->requires_grad) {
                    bn->ensure_grad();
                    for (int64_t i = 0; i < n; ++i)
                        bn->grad[i] += db(an->value[i], bn->value[i], self.grad[i]);
                }
            },
            name);
    }

    BroadcastPlan plan = plan_broadcast(a.shape(), b.shape());
    const int64_t n = numel(plan.out);
    std::vector<S> out(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
        int64_t ia = bcast_offset(i, plan.out, plan.stride_a);
        int64_t ib = bcast_offset(i, plan.out, plan.stride_b);
        out[i] = fwd(av[ia], bv[ib]);
    }
    auto an = a.node();
    auto bn = b.node();
    return make_result<S>(
        plan.out, std::move(out), {a, b},
        [an, bn, plan, da, db](detail::Node<S>& self) {
            const int64_t n = static_cast<int64_t>(self.value.size());
            if (an->requires_grad) an->ensure_grad();
            if (bn->requires_grad) bn->ensure_grad();
            for (int64_t i = 0; i < n; ++i) {
                int64_t ia = bcast_offset(i, plan.out, plan.stride_a);
                int64_t ib = bcast_offset(i, plan.out, plan.stride_b);
                if (an->requires_grad)
                    an->grad[ia] += da(an->value[ia], bn->value[ib], self.grad[i]);
                if (bn->requires_grad)
                    bn->grad[ib] += db(an->value[ia], bn->value[ib], self.grad[i]);
            }
        },
        name);
}

template <typename S, typename Fwd, typename Dx>
Tensor<S> unary_op(const Tensor<S>& x, Fwd fwd, Dx dx, const char* name) {
    check_defined(x, name);
    const auto& xv = x.data();
    const int64_t n = x.size();
    std::vector<S> out(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) out[i] = fwd(xv[i]);
    auto xn = x.node();
    return make_result<S>(
        x.shape(), std::move(out), {x},
        [xn, dx](detail::Node<S>& self) {
            if (!xn->requires_grad) return;
            xn->ensure_grad();
            const int64_t n = static_cast<int64_t>(self.value.size());
            for (int64_t i = 0; i < n; ++i)
                xn->grad[i] += dx(xn->value[i], self.value[i], self.grad[i]);
        },
        name);
}

}  // namespace

template <typename S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
    return binary_op<S>(
        a, b, [](S x, S y) { return x + y; }, [](S, S, S g) { return g; },
        [](S, S, S g) { return g; }, "add");
}

template <typename S>
Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b) {
    return binary_op<S>(
        a, b, [](S x, S y) { return x - y; }, [](S, S, S g) { return g; },
        [](S, S, S g) { return -g; }, "sub");
}

template <typename S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
    return binary_op<S>(
        a, b, [](S x, S y) { return x * y; }, [](S, S y, S g) { return g * y; },
        [](S x, S, S g) { return g * x; }, "mul");
}

template <typename S>
Tensor<S> div(const Tensor<S>& a, const Tensor<S>& b) {
    return binary_op<S>(
        a, b, [](S x, S y) { return x / y; }, [](S, S y, S g) { return g / y; },
        [](S x, S y, S g) { return -g * x / (y * y); }, "div");
}

template <typename S>
Tensor<S> scale(const Tensor<S>& x, double c) {
    const S cs = static_cast<S>(c);
    return unary_op<S>(
        x, [cs](S v) { return v * cs; }, [cs](S, S, S g) { return g * cs; }, "scale");
}

template <typename S>
Tensor<S> add_scalar(const Tensor<S>& x, double c) {
    const S cs = static_cast<S>(c);
    return unary_op<S>(
        x, [cs](S v) { return v + cs; }, [](S, S, S g) { return g; }, "add_scalar");
}

template <typename S>
Tensor<S> neg(const Tensor<S>& x) {
    return unary_op<S>(
        x, [](S v) { return -v; }, [](S, S, S g) { return -g; }, "neg");
}

template <typename S>
Tensor<S> square(const Tensor<S>& x) {
    return unary_op<S>(
        x, [](S v) { return v * v; }, [](S v, S, S g) { return S(2) * v * g; }, "square");
}

template <typename S>
Tensor<S> sqrt(const Tensor<S>& x) {
    return unary_op<S>(
        x, [](S v) { return std::sqrt(v); },
        [](S, S y, S g) { return g / (S(2) * y); }, "sqrt");
}

template <typename S>
Tensor<S> exp(const Tensor<S>& x) {
    return unary_op<S>(
        x, [](S v) { return std::exp(v); }, [](S, S y, S g) { return g * y; }, "exp");
}

template <typename S>
Tensor<S> log(const Tensor<S>& x) {
    return unary_op<S>(
        x, [](S v) { return std::log(v); }, [](S v, S, S g) { return g / v; }, "log");
}

template <typename S>
Tensor<S> relu(const Tensor<S>& x) {
    return unary_op<S>(
        x, [](S v) { return v > S(0) ? v : S(0); },
        [](S v, S, S g) { return v > S(0) ? g : S(0); }, "relu");
}

template <typename S>
Tensor<S> gelu(const Tensor<S>& x) {
    // 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3)))
    constexpr double kC = 0.7978845608028654;
    constexpr double kA = 0.044715;
    return unary_op<S>(
        x,
        [](S v) {
            double xd = static_cast<double>(v);
            double t = std::tanh(kC * (xd + kA * xd * xd * xd));
            return static_cast<S>(0.5 * xd * (1.0 + t));
        },
        [](S v, S, S g) {
            double xd = static_cast<double>(v);
            double u = kC * (xd + kA * xd * xd * xd);
            double t = std::tanh(u);
            double du = kC * (1.0 + 3.0 * kA * xd * xd);
            double d = 0.5 * (1.0 + t) + 0.5 * xd * (1.0 - t * t) * du;
            return static_cast<S>(static_cast<double>(g) * d);
        },
        "gelu");
}

template <typename S>
Tensor<S> sigmoid(const Tensor<S>& x) {
    return unary_op<S>(
        x,
        [](S v) {
            // Branch keeps exp() in the underflow-safe direction.
            if (v >= S(0)) return S(1) / (S(1) + std::exp(-v));
            S e = std::exp(v);
            return e / (S(1) + e);
        },
        [](S, S y, S g) { return g * y * (S(1) - y); }, "sigmoid");
}

template <typename S>
Tensor<S> clamp(const Tensor<S>& x, double lo, double hi) {
    const S l = static_cast<S>(lo), h = static_cast<S>(hi);
    return unary_op<S>(
        x, [l, h](S v) { return std::min(std::max(v, l), h); },
        [l, h](S v, S, S g) { return (v > l && v < h) ? g : S(0); }, "clamp");
}

#define AVTCA_INSTANTIATE_UNARY(fn)                       \
    template Tensor<float> fn(const Tensor<float>&);      \
    template Tensor<double> fn(const Tensor<double>&)

template Tensor<float> add(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> add(const Tensor<double>&, const Tensor<double>&);
template Tensor<float> sub(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> sub(const Tensor<double>&, const Tensor<double>&);
template Tensor<float> mul(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> mul(const Tensor<double>&, const Tensor<double>&);
template Tensor<float> div(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> div(const Tensor<double>&, const Tensor<double>&);
template Tensor<float> scale(const Tensor<float>&, double);
template Tensor<double> scale(const Tensor<double>&, double);
template Tensor<float> add_scalar(const Tensor<float>&, double);
template Tensor<double> add_scalar(const Tensor<double>&, double);
template Tensor<float> clamp(const Tensor<float>&, double, double);
template Tensor<double> clamp(const Tensor<double>&, double, double);
AVTCA_INSTANTIATE_UNARY(neg);
AVTCA_INSTANTIATE_UNARY(square);
AVTCA_INSTANTIATE_UNARY(sqrt);
AVTCA_INSTANTIATE_UNARY(exp);
AVTCA_INSTANTIATE_UNARY(log);
AVTCA_INSTANTIATE_UNARY(relu);
AVTCA_INSTANTIATE_UNARY(gelu);
AVTCA_INSTANTIATE_UNARY(sigmoid);

#undef AVTCA_INSTANTIATE_UNARY

}  // namespace ops
}  // namespace avtca
