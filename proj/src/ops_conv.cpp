#include <algorithm>
#include <cmath>

#include "avtca/ops.hpp"
#include "ops_common.hpp"

namespace avtca {
namespace ops {

using namespace detail_ops;

namespace {

int out_extent(int in, int kernel, int stride, int padding, int dilation,
               const char* what) {
    const int eff = dilation * (kernel - 1) + 1;
    const int padded = in + 2 * padding;
    if (eff > padded)
        throw ShapeError(std::string(what) + ": kernel extent " + std::to_string(eff) +
                         " exceeds padded input " + std::to_string(padded));
    if (stride < 1) throw ShapeError(std::string(what) + ": stride must be >= 1");
    return (padded - eff) / stride + 1;
}

}  // namespace

template <typename S>
Tensor<S> conv1d(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& bias,
                 int stride, int padding) {
    check_defined(x, "conv1d input");
    check_defined(w, "conv1d weight");
    if (x.rank() != 3 || w.rank() != 3)
        throw ShapeError("conv1d expects x(B,C,L) and w(F,C,K), got " + shape_str(x.shape()) +
                         " and " + shape_str(w.shape()));
    const int B = x.dim(0), C = x.dim(1), L = x.dim(2);
    const int F = w.dim(0), WC = w.dim(1), K = w.dim(2);
    if (WC != C)
        throw ShapeError("conv1d channel mismatch: x " + shape_str(x.shape()) + " vs w " +
                         shape_str(w.shape()));
    if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != F))
        throw ShapeError("conv1d bias must be (" + std::to_string(F) + ")");
    const int Lo = out_extent(L, K, stride, padding, 1, "conv1d");

    const S* xv = x.data().data();
    const S* wv = w.data().data();
    const S* bv = bias.defined() ? bias.data().data() : nullptr;
    std::vector<S> out(static_cast<size_t>(B) * F * Lo);

#ifdef _OPENMP
#pragma omp parallel for collapse(2) schedule(static) num_threads(worker_count()) \
    if (static_cast<int64_t>(B) * F * Lo * C * K > 65536)
#endif
    for (int b = 0; b < B; ++b)
        for (int f = 0; f < F; ++f) {
            S* orow = out.data() + (static_cast<int64_t>(b) * F + f) * Lo;
            for (int ol = 0; ol < Lo; ++ol) {
                S acc = bv ? bv[f] : S(0);
                const int start = ol * stride - padding;
                for (int c = 0; c < C; ++c) {
                    const S* xrow = xv + (static_cast<int64_t>(b) * C + c) * L;
                    const S* wrow = wv + (static_cast<int64_t>(f) * C + c) * K;
                    for (int k = 0; k < K; ++k) {
                        const int il = start + k;
                        if (il >= 0 && il < L) acc += xrow[il] * wrow[k];
                    }
                }
                orow[ol] = acc;
            }
        }

    auto xn = x.node();
    auto wn = w.node();
    auto bn = bias.defined() ? bias.node() : nullptr;
    std::vector<Tensor<S>> parents = {x, w};
    if (bias.defined()) parents.push_back(bias);

    return make_result<S>(
        {B, F, Lo}, std::move(out), std::move(parents),
        [xn, wn, bn, B, C, L, F, K, Lo, stride, padding](avtca::detail::Node<S>& self) {
            const S* g = self.grad.data();
            if (xn->requires_grad) {
                xn->ensure_grad();
                for (int b = 0; b < B; ++b)
                    for (int f = 0; f < F; ++f) {
                        const S* grow = g + (static_cast<int64_t>(b) * F + f) * Lo;
                        for (int ol = 0; ol < Lo; ++ol) {
                            const int start = ol * stride - padding;
                            for (int c = 0; c < C; ++c) {
                                S* dxrow = xn->grad.data() + (static_cast<int64_t>(b) * C + c) * L;
                                const S* wrow =
                                    wn->value.data() + (static_cast<int64_t>(f) * C + c) * K;
                                for (int k = 0; k < K; ++k) {
                                    const int il = start + k;
                                    if (il >= 0 && il < L) dxrow[il] += grow[ol] * wrow[k];
                                }
                            }
                        }
                    }
            }
            if (wn->requires_grad) {
                wn->ensure_grad();
                for (int b = 0; b < B; ++b)
                    for (int f = 0; f < F; ++f) {
                        const S* grow = g + (static_cast<int64_t>(b) * F + f) * Lo;
                        for (int ol = 0; ol < Lo; ++ol) {
                            const int start = ol * stride - padding;
                            for (int c = 0; c < C; ++c) {
                                const S* xrow =
                                    xn->value.data() + (static_cast<int64_t>(b) * C + c) * L;
                                S* dwrow = wn->grad.data() + (static_cast<int64_t>(f) * C + c) * K;
                                for (int k = 0; k < K; ++k) {
                                    const int il = start + k;
                                    if (il >= 0 && il < L) dwrow[k] += grow[ol] * xrow[il];
                                }
                            }
                        }
                    }
            }
            if (bn && bn->requires_grad) {
                bn->ensure_grad();
                for (int b = 0; b < B; ++b)
                    for (int f = 0; f < F; ++f) {
                        const S* grow = g + (static_cast<int64_t>(b) * F + f) * Lo;
                        for (int ol = 0; ol < Lo; ++ol) bn->grad[f] += grow[ol];
                    }
            }
        },
        "conv1d");
}

template <typename S>
Tensor<S> conv2d(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& bias,
                 int stride, int padding, int dilation, bool depthwise) {
    check_defined(x, "conv2d input");
    check_defined(w, "conv2d weight");
    if (x.rank() != 4 || w.rank() != 4)
        throw ShapeError("conv2d expects x(B,C,H,W) and w(F,C,Kh,Kw), got " +
                         shape_str(x.shape()) + " and " + shape_str(w.shape()));
    const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int F = w.dim(0), WC = w.dim(1), Kh = w.dim(2), Kw = w.dim(3);
    if (depthwise) {
        if (F != C || WC != 1)
            throw ConfigError("depthwise conv2d requires C_out == C_in and w(C,1,Kh,Kw); got w " +
                              shape_str(w.shape()) + " for input " + shape_str(x.shape()));
    } else if (WC != C) {
        throw ShapeError("conv2d channel mismatch: x " + shape_str(x.shape()) + " vs w " +
                         shape_str(w.shape()));
    }
    if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != F))
        throw ShapeError("conv2d bias must be (" + std::to_string(F) + ")");
    const int Ho = out_extent(H, Kh, stride, padding, dilation, "conv2d");
    const int Wo = out_extent(W, Kw, stride, padding, dilation, "conv2d");

    const S* xv = x.data().data();
    const S* wv = w.data().data();
    const S* bv = bias.defined() ? bias.data().data() : nullptr;
    std::vector<S> out(static_cast<size_t>(B) * F * Ho * Wo);
    const int cin_per_f = depthwise ? 1 : C;

#ifdef _OPENMP
#pragma omp parallel for collapse(2) schedule(static) num_threads(worker_count()) \
    if (static_cast<int64_t>(B) * F * Ho * Wo * cin_per_f * Kh * Kw > 65536)
#endif
    for (int b = 0; b < B; ++b)
        for (int f = 0; f < F; ++f) {
            S* oplane = out.data() + (static_cast<int64_t>(b) * F + f) * Ho * Wo;
            for (int oh = 0; oh < Ho; ++oh)
                for (int ow = 0; ow < Wo; ++ow) {
                    S acc = bv ? bv[f] : S(0);
                    const int h0 = oh * stride - padding;
                    const int w0 = ow * stride - padding;
                    for (int ci = 0; ci < cin_per_f; ++ci) {
                        const int c = depthwise ? f : ci;
                        const S* xplane = xv + (static_cast<int64_t>(b) * C + c) * H * W;
                        const S* wplane =
                            wv + (static_cast<int64_t>(f) * cin_per_f + ci) * Kh * Kw;
                        for (int kh = 0; kh < Kh; ++kh) {
                            const int ih = h0 + kh * dilation;
                            if (ih < 0 || ih >= H) continue;
                            for (int kw = 0; kw < Kw; ++kw) {
                                const int iw = w0 + kw * dilation;
                                if (iw < 0 || iw >= W) continue;
                                acc += xplane[ih * W + iw] * wplane[kh * Kw + kw];
                            }
                        }
                    }
                    oplane[oh * Wo + ow] = acc;
                }
        }

    auto xn = x.node();
    auto wn = w.node();
    auto bnn = bias.defined() ? bias.node() : nullptr;
    std::vector<Tensor<S>> parents = {x, w};
    if (bias.defined()) parents.push_back(bias);

    return make_result<S>(
        {B, F, Ho, Wo}, std::move(out), std::move(parents),
        [xn, wn, bnn, B, C, H, W, F, Kh, Kw, Ho, Wo, stride, padding, dilation,
         depthwise](avtca::detail::Node<S>& self) {
            const S* g = self.grad.data();
            const int cin_per_f = depthwise ? 1 : C;
            if (xn->requires_grad) {
                xn->ensure_grad();
                for (int b = 0; b < B; ++b)
                    for (int f = 0; f < F; ++f) {
                        const S* gplane = g + (static_cast<int64_t>(b) * F + f) * Ho * Wo;
                        for (int oh = 0; oh < Ho; ++oh)
                            for (int ow = 0; ow < Wo; ++ow) {
                                const S gv = gplane[oh * Wo + ow];
                                if (gv == S(0)) continue;
                                const int h0 = oh * stride - padding;
                                const int w0 = ow * stride - padding;
                                for (int ci = 0; ci < cin_per_f; ++ci) {
                                    const int c = depthwise ? f : ci;
                                    S* dxplane =
                                        xn->grad.data() + (static_cast<int64_t>(b) * C + c) * H * W;
                                    const S* wplane =
                                        wn->value.data() +
                                        (static_cast<int64_t>(f) * cin_per_f + ci) * Kh * Kw;
                                    for (int kh = 0; kh < Kh; ++kh) {
                                        const int ih = h0 + kh * dilation;
                                        if (ih < 0 || ih >= H) continue;
                                        for (int kw = 0; kw < Kw; ++kw) {
                                            const int iw = w0 + kw * dilation;
                                            if (iw < 0 || iw >= W) continue;
                                            dxplane[ih * W + iw] += gv * wplane[kh * Kw + kw];
                                        }
                                    }
                                }
                            }
                    }
            }
            if (wn->requires_grad) {
                wn->ensure_grad();
                for (int b = 0; b < B; ++b)
                    for (int f = 0; f < F; ++f) {
                        const S* gplane = g + (static_cast<int64_t>(b) * F + f) * Ho * Wo;
                        for (int oh = 0; oh < Ho; ++oh)
                            for (int ow = 0; ow < Wo; ++ow) {
                                const S gv = gplane[oh * Wo + ow];
                                if (gv == S(0)) continue;
                                const int h0 = oh * stride - padding;
                                const int w0 = ow * stride - padding;
                                for (int ci = 0; ci < cin_per_f; ++ci) {
                                    const int c = depthwise ? f : ci;
                                    const S* xplane =
                                        xn->value.data() +
                                        (static_cast<int64_t>(b) * C + c) * H * W;
                                    S* dwplane =
                                        wn->grad.data() +
                                        (static_cast<int64_t>(f) * cin_per_f + ci) * Kh * Kw;
                                    for (int kh = 0; kh < Kh; ++kh) {
                                        const int ih = h0 + kh * dilation;
                                        if (ih < 0 || ih >= H) continue;
                                        for (int kw = 0; kw < Kw; ++kw) {
                                            const int iw = w0 + kw * dilation;
                                            if (iw < 0 || iw >= W) continue;
                                            dwplane[kh * Kw + kw] += gv * xplane[ih * W + iw];
                                        }
                                    }
                                }
                            }
                    }
            }
            if (bnn && bnn->requires_grad) {
                bnn->ensure_grad();
                for (int b = 0; b < B; ++b)
                    for (int f = 0; f < F; ++f) {
                        const S* gplane = g + (static_cast<int64_t>(b) * F + f) * Ho * Wo;
                        for (int i = 0; i < Ho * Wo; ++i) bnn->grad[f] += gplane[i];
                    }
            }
        },
        "conv2d");
}

namespace {

// Shared max-pool core over the trailing spatial axes. `spatial` lists the
// extents being pooled; ties take the first element in scan order.
template <typename S>
Tensor<S> maxpool_impl(const Tensor<S>& x, int window, int stride, int spatial_rank,
                       const char* name) {
    check_defined(x, name);
    if (x.rank() < spatial_rank + 1)
        throw ShapeError(std::string(name) + " rank too small: " + shape_str(x.shape()));
    if (window < 1 || stride < 1) throw ShapeError(std::string(name) + ": window and stride must be >= 1");
    const int r = x.rank();
    Shape out_shape = x.shape();
    int64_t lead = 1;
    for (int i = 0; i < r - spatial_rank; ++i) lead *= x.dim(i);
    std::vector<int> in_sp(spatial_rank), out_sp(spatial_rank);
    for (int i = 0; i < spatial_rank; ++i) {
        in_sp[i] = x.dim(r - spatial_rank + i);
        if (window > in_sp[i])
            throw ShapeError(std::string(name) + ": window " + std::to_string(window) +
                             " exceeds extent " + std::to_string(in_sp[i]) + " of " +
                             shape_str(x.shape()));
        out_sp[i] = (in_sp[i] - window) / stride + 1;
        out_shape[r - spatial_rank + i] = out_sp[i];
    }

    const S* xv = x.data().data();
    const int64_t in_plane = spatial_rank == 1 ? in_sp[0] : int64_t(in_sp[0]) * in_sp[1];
    const int64_t out_plane = spatial_rank == 1 ? out_sp[0] : int64_t(out_sp[0]) * out_sp[1];
    std::vector<S> out(static_cast<size_t>(lead * out_plane));
    auto argmax = std::make_shared<std::vector<int64_t>>(out.size());

    for (int64_t l = 0; l < lead; ++l) {
        const S* xp = xv + l * in_plane;
        if (spatial_rank == 1) {
            for (int o = 0; o < out_sp[0]; ++o) {
                int base = o * stride;
                S best = xp[base];
                int bi = base;
                for (int k = 1; k < window; ++k)
                    if (xp[base + k] > best) { best = xp[base + k]; bi = base + k; }
                out[l * out_plane + o] = best;
                (*argmax)[static_cast<size_t>(l * out_plane + o)] = l * in_plane + bi;
            }
        } else {
            const int Wi = in_sp[1];
            for (int oh = 0; oh < out_sp[0]; ++oh)
                for (int ow = 0; ow < out_sp[1]; ++ow) {
                    int h0 = oh * stride, w0 = ow * stride;
                    S best = xp[h0 * Wi + w0];
                    int64_t bi = h0 * Wi + w0;
                    for (int kh = 0; kh < window; ++kh)
                        for (int kw = 0; kw < window; ++kw) {
                            int64_t idx = (h0 + kh) * Wi + (w0 + kw);
                            if (xp[idx] > best) { best = xp[idx]; bi = idx; }
                        }
                    out[l * out_plane + oh * out_sp[1] + ow] = best;
                    (*argmax)[static_cast<size_t>(l * out_plane + oh * out_sp[1] + ow)] =
                        l * in_plane + bi;
                }
        }
    }

    auto xn = x.node();
    return make_result<S>(
        out_shape, std::move(out), {x},
        [xn, argmax](avtca::detail::Node<S>& self) {
            if (!xn->requires_grad) return;
            xn->ensure_grad();
            for (size_t i = 0; i < argmax->size(); ++i)
                xn->grad[static_cast<size_t>((*argmax)[i])] += self.grad[i];
        },
        name);
}

}  // namespace

template <typename S>
Tensor<S> maxpool1d(const Tensor<S>& x, int window, int stride) {
    return maxpool_impl(x, window, stride, 1, "maxpool1d");
}

template <typename S>
Tensor<S> maxpool2d(const Tensor<S>& x, int window, int stride) {
    return maxpool_impl(x, window, stride, 2, "maxpool2d");
}

template <typename S>
Tensor<S> avgpool2d(const Tensor<S>& x, int window, int stride) {
    check_defined(x, "avgpool2d");
    if (x.rank() < 3) throw ShapeError("avgpool2d rank too small: " + shape_str(x.shape()));
    const int r = x.rank();
    const int H = x.dim(r - 2), W = x.dim(r - 1);
    if (window > H || window > W)
        throw ShapeError("avgpool2d: window " + std::to_string(window) + " exceeds " +
                         shape_str(x.shape()));
    const int Ho = (H - window) / stride + 1;
    const int Wo = (W - window) / stride + 1;
    int64_t lead = 1;
    for (int i = 0; i < r - 2; ++i) lead *= x.dim(i);
    Shape out_shape = x.shape();
    out_shape[r - 2] = Ho;
    out_shape[r - 1] = Wo;

    const S* xv = x.data().data();
    std::vector<S> out(static_cast<size_t>(lead * Ho * Wo));
    const S inv = S(1) / static_cast<S>(window * window);
    for (int64_t l = 0; l < lead; ++l) {
        const S* xp = xv + l * H * W;
        for (int oh = 0; oh < Ho; ++oh)
            for (int ow = 0; ow < Wo; ++ow) {
                S acc = S(0);
                for (int kh = 0; kh < window; ++kh)
                    for (int kw = 0; kw < window; ++kw)
                        acc += xp[(oh * stride + kh) * W + (ow * stride + kw)];
                out[l * Ho * Wo + oh * Wo + ow] = acc * inv;
            }
    }

    auto xn = x.node();
    return make_result<S>(
        out_shape, std::move(out), {x},
        [xn, H, W, Ho, Wo, window, stride, lead, inv](avtca::detail::Node<S>& self) {
            if (!xn->requires_grad) return;
            xn->ensure_grad();
            for (int64_t l = 0; l < lead; ++l) {
                S* dxp = xn->grad.data() + l * H * W;
                const S* gp = self.grad.data() + l * Ho * Wo;
                for (int oh = 0; oh < Ho; ++oh)
                    for (int ow = 0; ow < Wo; ++ow) {
                        const S gv = gp[oh * Wo + ow] * inv;
                        for (int kh = 0; kh < window; ++kh)
                            for (int kw = 0; kw < window; ++kw)
                                dxp[(oh * stride + kh) * W + (ow * stride + kw)] += gv;
                    }
            }
        },
        "avgpool2d");
}

template <typename S>
Tensor<S> global_avg_pool(const Tensor<S>& x) {
    check_defined(x, "global_avg_pool");
    if (x.rank() < 3)
        throw ShapeError("global_avg_pool expects rank >= 3, got " + shape_str(x.shape()));
    std::vector<int> axes;
    for (int i = 2; i < x.rank(); ++i) axes.push_back(i);
    return mean(x, std::move(axes), true);
}

#define AVTCA_INSTANTIATE(T)                                                                \
    template Tensor<T> conv1d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int,   \
                              int);                                                         \
    template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int,   \
                              int, int, bool);                                              \
    template Tensor<T> maxpool1d(const Tensor<T>&, int, int);                              \
    template Tensor<T> maxpool2d(const Tensor<T>&, int, int);                              \
    template Tensor<T> avgpool2d(const Tensor<T>&, int, int);                              \
    template Tensor<T> global_avg_pool(const Tensor<T>&)

AVTCA_INSTANTIATE(float);
AVTCA_INSTANTIATE(double);

#undef AVTCA_INSTANTIATE

}  // namespace ops
}  // namespace avtca
