#include <algorithm>
#include <cmath>

#include "avtca/ops.hpp"
#include "ops_common.hpp"

namespace avtca {
namespace ops {

using namespace detail_ops;

template <typename S>
Tensor<S> permute(const Tensor<S>& x, std::vector<int> perm) {
    check_defined(x, "permute input");
    const int r = x.rank();
    if (static_cast<int>(perm.size()) != r)
        throw ShapeError("permute of " + shape_str(x.shape()) + " needs " + std::to_string(r) +
                         " axes");
    std::vector<bool> seen(r, false);
    for (int p : perm) {
        if (p < 0 || p >= r || seen[p])
            throw ShapeError("permute axes must be a bijection on 0.." + std::to_string(r - 1));
        seen[p] = true;
    }
    Shape out_shape(r);
    for (int i = 0; i < r; ++i) out_shape[i] = x.dim(perm[i]);

    auto in_st = row_strides(x.shape());
    std::vector<int64_t> gather(r);  // stride into input per output axis
    for (int i = 0; i < r; ++i) gather[i] = in_st[perm[i]];

    const S* xv = x.data().data();
    const int64_t n = x.size();
    std::vector<S> out(static_cast<size_t>(n));
    auto src = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
        int64_t rem = i, off = 0;
        for (int ax = r - 1; ax >= 0; --ax) {
            off += (rem % out_shape[ax]) * gather[ax];
            rem /= out_shape[ax];
        }
        out[i] = xv[off];
        (*src)[static_cast<size_t>(i)] = off;
    }

    auto xn = x.node();
    return make_result<S>(
        out_shape, std::move(out), {x},
        [xn, src](avtca::detail::Node<S>& self) {
            if (!xn->requires_grad) return;
            xn->ensure_grad();
            for (size_t i = 0; i < src->size(); ++i)
                xn->grad[static_cast<size_t>((*src)[i])] += self.grad[i];
        },
        "permute");
}

template <typename S>
Tensor<S> reshape(const Tensor<S>& x, Shape shape) {
    check_defined(x, "reshape input");
    if (numel(shape) != x.size())
        throw ShapeError("reshape " + shape_str(x.shape()) + " -> " + shape_str(shape) +
                         " changes element count");
    std::vector<S> out = x.data();
    auto xn = x.node();
    return make_result<S>(
        std::move(shape), std::move(out), {x},
        [xn](avtca::detail::Node<S>& self) {
            if (!xn->requires_grad) return;
            xn->ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i) xn->grad[i] += self.grad[i];
        },
        "reshape");
}

template <typename S>
Tensor<S> concat(const std::vector<Tensor<S>>& parts, int axis) {
    if (parts.empty()) throw ShapeError("concat of zero tensors");
    for (const auto& p : parts) check_defined(p, "concat input");
    const int r = parts[0].rank();
    if (axis < 0) axis += r;
    if (axis < 0 || axis >= r)
        throw ShapeError("concat axis " + std::to_string(axis) + " out of range for " +
                         shape_str(parts[0].shape()));
    Shape out_shape = parts[0].shape();
    int total_axis = 0;
    for (const auto& p : parts) {
        if (p.rank() != r)
            throw ShapeError("concat rank mismatch: " + shape_str(parts[0].shape()) + " vs " +
                             shape_str(p.shape()));
        for (int i = 0; i < r; ++i)
            if (i != axis && p.dim(i) != out_shape[i])
                throw ShapeError("concat extents differ at axis " + std::to_string(i) + ": " +
                                 shape_str(parts[0].shape()) + " vs " + shape_str(p.shape()));
        total_axis += p.dim(axis);
    }
    out_shape[axis] = total_axis;

    int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= out_shape[i];
    for (int i = axis + 1; i < r; ++i) inner *= out_shape[i];

    std::vector<S> out(static_cast<size_t>(numel(out_shape)));
    int64_t axis_off = 0;
    for (const auto& p : parts) {
        const int64_t pa = p.dim(axis);
        const S* pv = p.data().data();
        for (int64_t o = 0; o < outer; ++o)
            std::copy(pv + o * pa * inner, pv + (o + 1) * pa * inner,
                      out.data() + (o * total_axis + axis_off) * inner);
        axis_off += pa;
    }

    std::vector<std::shared_ptr<avtca::detail::Node<S>>> nodes;
    for (const auto& p : parts) nodes.push_back(p.node());
    return make_result<S>(
        out_shape, std::move(out), parts,
        [nodes, outer, inner, total_axis, axis](avtca::detail::Node<S>& self) {
            int64_t axis_off = 0;
            for (auto& pn : nodes) {
                const int64_t pa = pn->shape[static_cast<size_t>(axis)];
                if (pn->requires_grad) {
                    pn->ensure_grad();
                    for (int64_t o = 0; o < outer; ++o) {
                        const S* gsrc = self.grad.data() + (o * total_axis + axis_off) * inner;
                        S* gdst = pn->grad.data() + o * pa * inner;
                        for (int64_t i = 0; i < pa * inner; ++i) gdst[i] += gsrc[i];
                    }
                }
                axis_off += pa;
            }
        },
        "concat");
}

template <typename S>
Tensor<S> slice(const Tensor<S>& x, const std::vector<std::pair<int, int>>& ranges) {
    check_defined(x, "slice input");
    const int r = x.rank();
    if (static_cast<int>(ranges.size()) != r)
        throw ShapeError("slice of " + shape_str(x.shape()) + " needs " + std::to_string(r) +
                         " ranges");
    Shape out_shape(r);
    for (int i = 0; i < r; ++i) {
        auto [lo, hi] = ranges[i];
        if (lo < 0 || hi > x.dim(i) || lo >= hi)
            throw ShapeError("slice range [" + std::to_string(lo) + "," + std::to_string(hi) +
                             ") invalid at axis " + std::to_string(i) + " of " +
                             shape_str(x.shape()));
        out_shape[i] = hi - lo;
    }

    auto in_st = row_strides(x.shape());
    const S* xv = x.data().data();
    const int64_t n = numel(out_shape);
    std::vector<S> out(static_cast<size_t>(n));
    auto src = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
        int64_t rem = i, off = 0;
        for (int ax = r - 1; ax >= 0; --ax) {
            int64_t coord = rem % out_shape[ax] + ranges[ax].first;
            rem /= out_shape[ax];
            off += coord * in_st[ax];
        }
        out[i] = xv[off];
        (*src)[static_cast<size_t>(i)] = off;
    }

    auto xn = x.node();
    return make_result<S>(
        out_shape, std::move(out), {x},
        [xn, src](avtca::detail::Node<S>& self) {
            if (!xn->requires_grad) return;
            xn->ensure_grad();
            for (size_t i = 0; i < src->size(); ++i)
                xn->grad[static_cast<size_t>((*src)[i])] += self.grad[i];
        },
        "slice");
}

template <typename S>
Tensor<S> dropout(const Tensor<S>& x, double rate, RngState& rng, Mode mode) {
    check_defined(x, "dropout input");
    if (rate < 0.0 || rate >= 1.0)
        throw ConfigError("dropout rate must lie in [0,1), got " + std::to_string(rate));
    if (mode == Mode::kEval || rate == 0.0) return x;

    const int64_t n = x.size();
    const S keep_scale = static_cast<S>(1.0 / (1.0 - rate));
    auto mask = std::make_shared<std::vector<S>>(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i)
        (*mask)[static_cast<size_t>(i)] = rng.uniform() < rate ? S(0) : keep_scale;

    const auto& xv = x.data();
    std::vector<S> out(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) out[i] = xv[i] * (*mask)[static_cast<size_t>(i)];

    auto xn = x.node();
    return make_result<S>(
        x.shape(), std::move(out), {x},
        [xn, mask](avtca::detail::Node<S>& self) {
            if (!xn->requires_grad) return;
            xn->ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i)
                xn->grad[i] += self.grad[i] * (*mask)[i];
        },
        "dropout");
}

template <typename S>
Tensor<S> batch_norm(const Tensor<S>& x, const Tensor<S>& gamma, const Tensor<S>& beta,
                     std::vector<S>& running_mean, std::vector<S>& running_var,
                     int channel_axis, Mode mode, double eps, double momentum) {
    check_defined(x, "batch_norm input");
    check_defined(gamma, "batch_norm gamma");
    check_defined(beta, "batch_norm beta");
    const int r = x.rank();
    if (channel_axis < 0) channel_axis += r;
    if (channel_axis < 0 || channel_axis >= r)
        throw ShapeError("batch_norm channel axis out of range for " + shape_str(x.shape()));
    const int C = x.dim(channel_axis);
    if (gamma.size() != C || beta.size() != C)
        throw ShapeError("batch_norm affine parameters must have " + std::to_string(C) +
                         " entries for input " + shape_str(x.shape()));
    if (running_mean.size() != static_cast<size_t>(C) ||
        running_var.size() != static_cast<size_t>(C))
        throw ShapeError("batch_norm running statistics must have " + std::to_string(C) +
                         " entries");

    std::vector<int> reduce_axes;
    Shape bshape(r, 1);
    bshape[channel_axis] = C;
    for (int i = 0; i < r; ++i)
        if (i != channel_axis) reduce_axes.push_back(i);

    Tensor<S> xhat;
    if (mode == Mode::kTrain) {
        Tensor<S> mu = mean(x, reduce_axes, true);
        Tensor<S> centered = sub(x, mu);
        Tensor<S> var = mean(square(centered), reduce_axes, true);
        Tensor<S> denom = sqrt(add_scalar(var, eps));
        xhat = div(centered, denom);
        // Running statistics live outside the tape.
        const auto& mv = mu.data();
        const auto& vv = var.data();
        for (int c = 0; c < C; ++c) {
            running_mean[c] = static_cast<S>((1.0 - momentum) * running_mean[c] + momentum * mv[c]);
            running_var[c] = static_cast<S>((1.0 - momentum) * running_var[c] + momentum * vv[c]);
        }
    } else {
        Tensor<S> rm = Tensor<S>::from(bshape, std::vector<S>(running_mean));
        std::vector<S> inv(running_var.size());
        for (size_t c = 0; c < inv.size(); ++c)
            inv[c] = static_cast<S>(1.0 / std::sqrt(static_cast<double>(running_var[c]) + eps));
        Tensor<S> rinv = Tensor<S>::from(bshape, std::move(inv));
        xhat = mul(sub(x, rm), rinv);
    }

    Tensor<S> g = reshape(gamma, bshape);
    Tensor<S> b = reshape(beta, bshape);
    return add(mul(g, xhat), b);
}

#define AVTCA_INSTANTIATE(T)                                                                 \
    template Tensor<T> permute(const Tensor<T>&, std::vector<int>);                         \
    template Tensor<T> reshape(const Tensor<T>&, Shape);                                     \
    template Tensor<T> concat(const std::vector<Tensor<T>>&, int);                          \
    template Tensor<T> slice(const Tensor<T>&, const std::vector<std::pair<int, int>>&);    \
    template Tensor<T> dropout(const Tensor<T>&, double, RngState&, Mode);                  \
    template Tensor<T> batch_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,     \
                                  std::vector<T>&, std::vector<T>&, int, Mode, double,      \
                                  double)

AVTCA_INSTANTIATE(float);
AVTCA_INSTANTIATE(double);

#undef AVTCA_INSTANTIATE

}  // namespace ops
}  // namespace avtca
