#pragma once

#include <memory>
#include <string>
#include <vector>

#include "avtca/ops.hpp"
#include "avtca/params.hpp"
#include "avtca/rng.hpp"
#include "avtca/tensor.hpp"

namespace avtca {

enum class Modality { kAudio, kVideo };

struct NormSettings {
    double eps = 1e-5;
    double momentum = 0.1;
};

// Per-channel batch normalization with running statistics. Train mode
// normalizes with batch statistics and nudges the running buffers; eval
// mode normalizes with the buffers.
template <typename S>
struct BatchNormLayer {
    Tensor<S> gamma, beta;
    std::shared_ptr<std::vector<S>> running_mean, running_var;
    int channel_axis = 1;
    NormSettings settings;

    BatchNormLayer() = default;
    BatchNormLayer(ParameterRegistry<S>& reg, const std::string& prefix, int channels,
                   int channel_axis, NormSettings settings);

    Tensor<S> forward(const Tensor<S>& x, Mode mode) const;
};

// Filters/kernel/stride of one convolution block plus the pooling knobs.
// The audio (1D) variant runs conv -> bn -> ReLU -> maxpool; the video
// (2D) variant runs conv -> maxpool. Pool window 1 leaves the extent
// untouched. Padding is always "same" for the configured kernel.
struct ConvBlockSpec {
    int filters = 8;
    int kernel = 3;
    int stride = 1;
    Modality modality = Modality::kAudio;
    int pool_window = 2;
    int pool_stride = 2;
};

template <typename S>
class ConvBlock {
  public:
    ConvBlock() = default;
    ConvBlock(ParameterRegistry<S>& reg, const std::string& prefix, int in_channels,
              ConvBlockSpec spec, NormSettings norm, RngState& rng);

    Tensor<S> forward(const Tensor<S>& x, Mode mode) const;

    int out_channels() const { return spec_.filters; }
    const ConvBlockSpec& spec() const { return spec_; }

  private:
    ConvBlockSpec spec_;
    int in_channels_ = 0;
    Tensor<S> weight_, bias_;
    BatchNormLayer<S> bn_;  // audio variant only
};

// Channel gate (squeeze-excite style): global average pool, a stack of
// 1x1 conv -> bn -> ReLU stages sized [g, (g/r)*n, g], sigmoid, then
// input * gate broadcast over the spatial axes.
struct ChannelGateSpec {
    int gate_channels = 8;  // g; must equal the input channel count
    int reduction = 2;      // r; must divide g
    int numlayers = 1;      // n
};

template <typename S>
class ChannelAttention {
  public:
    ChannelAttention() = default;
    ChannelAttention(ParameterRegistry<S>& reg, const std::string& prefix, ChannelGateSpec spec,
                     NormSettings norm, RngState& rng);

    Tensor<S> forward(const Tensor<S>& x, Mode mode) const;

    const ChannelGateSpec& spec() const { return spec_; }

  private:
    ChannelGateSpec spec_;
    std::vector<Tensor<S>> weights_, biases_;
    std::vector<BatchNormLayer<S>> norms_;
};

// Spatial gate: d chained dilated conv -> bn -> ReLU stages (dilation
// 2^(i-1)), a final conv to a single-channel map, sigmoid, then
// input * map broadcast over channels. Shape preserving.
struct SpatialGateSpec {
    int stages = 1;   // d >= 1
    int filters = 4;  // width of the reducing convs
    int kernel = 3;
    int stride = 1;  // must stay 1: the gate map must match the input extent
};

template <typename S>
class SpatialAttention {
  public:
    SpatialAttention() = default;
    SpatialAttention(ParameterRegistry<S>& reg, const std::string& prefix, int in_channels,
                     SpatialGateSpec spec, NormSettings norm, RngState& rng);

    Tensor<S> forward(const Tensor<S>& x, Mode mode) const;

  private:
    SpatialGateSpec spec_;
    std::vector<Tensor<S>> weights_, biases_;
    std::vector<BatchNormLayer<S>> norms_;
    Tensor<S> final_weight_, final_bias_;
};

// Four independent conv blocks over the fixed 28x28 quadrants of a 56x56
// map, concatenated on the channel axis (TL, TR, BL, BR order).
template <typename S>
class LocalFeatureExtractor {
  public:
    static constexpr int kInputExtent = 56;
    static constexpr int kPatchExtent = 28;

    LocalFeatureExtractor() = default;
    LocalFeatureExtractor(ParameterRegistry<S>& reg, const std::string& prefix, int in_channels,
                          ConvBlockSpec patch_spec, NormSettings norm, RngState& rng);

    Tensor<S> forward(const Tensor<S>& x, Mode mode) const;

    int out_channels() const { return 4 * patches_[0].out_channels(); }

  private:
    std::vector<ConvBlock<S>> patches_;  // TL, TR, BL, BR
};

// Two-branch block, branches concatenated on the channel axis:
//   x1: depthwise conv -> bn -> 1x1 conv -> bn -> ReLU
//   x2: convBlock -> depthwise conv -> convBlock
// Output channels = 2 * filters. Strides/pools are kept extent-preserving
// so the branch extents agree.
template <typename S>
class InvertedResidualBlock {
  public:
    InvertedResidualBlock() = default;
    InvertedResidualBlock(ParameterRegistry<S>& reg, const std::string& prefix, int in_channels,
                          ConvBlockSpec spec, NormSettings norm, RngState& rng);

    Tensor<S> forward(const Tensor<S>& x, Mode mode) const;

    int out_channels() const { return 2 * spec_.filters; }

  private:
    ConvBlockSpec spec_;
    Tensor<S> dw1_weight_, dw1_bias_;
    BatchNormLayer<S> bn1a_, bn1b_;
    Tensor<S> pw1_weight_, pw1_bias_;
    ConvBlock<S> cb2a_, cb2c_;
    Tensor<S> dw2_weight_, dw2_bias_;
};

// The video enhancement stage between the first video conv block and the
// sequence projection: (channel gate * spatial gate) pooled onto the local
// feature grid, added to the local features, two inverted residual blocks,
// then two video conv blocks.
struct VideoStageSpec {
    ChannelGateSpec channel_gate;
    SpatialGateSpec spatial_gate;
    ConvBlockSpec patch_block;           // per-quadrant extractor
    std::vector<ConvBlockSpec> ir_blocks;    // two entries
    std::vector<ConvBlockSpec> tail_blocks;  // two entries
};

template <typename S>
class VideoFeatureStage {
  public:
    VideoFeatureStage() = default;
    VideoFeatureStage(ParameterRegistry<S>& reg, const std::string& prefix, int in_channels,
                      VideoStageSpec spec, NormSettings norm, RngState& rng);

    Tensor<S> forward(const Tensor<S>& x, Mode mode) const;

    int out_channels() const;

  private:
    ChannelAttention<S> channel_attention_;
    SpatialAttention<S> spatial_attention_;
    LocalFeatureExtractor<S> local_features_;
    std::vector<InvertedResidualBlock<S>> residual_blocks_;
    std::vector<ConvBlock<S>> tail_;
};

}  // namespace avtca
