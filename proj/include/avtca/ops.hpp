#pragma once

#include <utility>
#include <vector>

#include "avtca/rng.hpp"
#include "avtca/tensor.hpp"

namespace avtca {

enum class Mode { kTrain, kEval };

namespace ops {

// ---- elementwise / broadcast arithmetic -----------------------------------
// Binary ops broadcast size-1 axes (numpy rules, trailing alignment).
template <typename S> Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b);
template <typename S> Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b);
template <typename S> Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b);
template <typename S> Tensor<S> div(const Tensor<S>& a, const Tensor<S>& b);

template <typename S> Tensor<S> scale(const Tensor<S>& x, double c);
template <typename S> Tensor<S> add_scalar(const Tensor<S>& x, double c);
template <typename S> Tensor<S> neg(const Tensor<S>& x);
template <typename S> Tensor<S> square(const Tensor<S>& x);
template <typename S> Tensor<S> sqrt(const Tensor<S>& x);
template <typename S> Tensor<S> exp(const Tensor<S>& x);
template <typename S> Tensor<S> log(const Tensor<S>& x);
template <typename S> Tensor<S> relu(const Tensor<S>& x);
template <typename S> Tensor<S> gelu(const Tensor<S>& x);  // tanh approximation
template <typename S> Tensor<S> sigmoid(const Tensor<S>& x);
// Gradient passes through strictly inside [lo, hi], zero outside.
template <typename S> Tensor<S> clamp(const Tensor<S>& x, double lo, double hi);

// ---- reductions ------------------------------------------------------------
template <typename S> Tensor<S> sum(const Tensor<S>& x, std::vector<int> axes, bool keepdims);
template <typename S> Tensor<S> mean(const Tensor<S>& x, std::vector<int> axes, bool keepdims);
template <typename S> Tensor<S> sum_all(const Tensor<S>& x);
template <typename S> Tensor<S> mean_all(const Tensor<S>& x);
// Max over one axis; ties take the lowest index. Gradient flows to the argmax.
template <typename S> Tensor<S> max_reduce(const Tensor<S>& x, int axis, bool keepdims);

// ---- linear algebra --------------------------------------------------------
// (..,m,k) @ (..,k,n) -> (..,m,n); leading batch extents broadcast.
template <typename S> Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b);
// Affine map on the last axis: x(..,din) @ w(din,dout) + b(dout). b may be null.
template <typename S>
Tensor<S> fully_connected(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& b);

// ---- softmax ---------------------------------------------------------------
// Max-subtracted; rows along `axis` are nonnegative and sum to 1.
template <typename S> Tensor<S> softmax(const Tensor<S>& x, int axis);

// ---- convolutions ----------------------------------------------------------
// x(B,Cin,L), w(Cout,Cin,K); cross-correlation, L' = (L + 2p - K)/stride + 1.
template <typename S>
Tensor<S> conv1d(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& bias,
                 int stride, int padding);
// x(B,Cin,H,W), w(Cout,Cin,Kh,Kw) or (C,1,Kh,Kw) when depthwise.
template <typename S>
Tensor<S> conv2d(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& bias,
                 int stride, int padding, int dilation = 1, bool depthwise = false);

// ---- pooling ---------------------------------------------------------------
template <typename S> Tensor<S> maxpool1d(const Tensor<S>& x, int window, int stride);
template <typename S> Tensor<S> maxpool2d(const Tensor<S>& x, int window, int stride);
template <typename S> Tensor<S> avgpool2d(const Tensor<S>& x, int window, int stride);
// Collapse all spatial/temporal extents to 1 (keepdims).
template <typename S> Tensor<S> global_avg_pool(const Tensor<S>& x);

// ---- dropout ---------------------------------------------------------------
// Inverted dropout: train zeroes with probability `rate` and scales
// survivors by 1/(1-rate); eval is the identity. rate in [0,1).
template <typename S>
Tensor<S> dropout(const Tensor<S>& x, double rate, RngState& rng, Mode mode);

// ---- shape ops -------------------------------------------------------------
template <typename S> Tensor<S> permute(const Tensor<S>& x, std::vector<int> perm);
template <typename S> Tensor<S> reshape(const Tensor<S>& x, Shape shape);
template <typename S> Tensor<S> concat(const std::vector<Tensor<S>>& parts, int axis);
// Half-open ranges per axis, as in input[:, :, 0:28, 0:28].
template <typename S>
Tensor<S> slice(const Tensor<S>& x, const std::vector<std::pair<int, int>>& ranges);

// ---- batch norm ------------------------------------------------------------
// Normalizes over every axis except `channel_axis`. Train mode uses batch
// statistics and updates the running buffers in place (outside the tape);
// eval mode normalizes with the running statistics.
template <typename S>
Tensor<S> batch_norm(const Tensor<S>& x, const Tensor<S>& gamma, const Tensor<S>& beta,
                     std::vector<S>& running_mean, std::vector<S>& running_var,
                     int channel_axis, Mode mode, double eps, double momentum);

}  // namespace ops

// Symmetric padding that preserves extent for odd kernels at stride 1.
inline int same_padding(int kernel, int dilation = 1) { return dilation * (kernel - 1) / 2; }

}  // namespace avtca
