#pragma once

// Residual classifier. The stem is a 3x3 stride-1 convolution over the
// enhanced C-channel input and the usual post-stem max pool is an identity,
// so the first stage sees the full input resolution. Stages after the first
// downsample by 2.

#include <memory>
#include <vector>

#include "neurolip/kernels.hpp"

namespace neurolip {

struct BackboneConfig {
  std::size_t in_channels = 16;
  std::size_t num_classes = 10;
  std::vector<std::size_t> depth{1, 1, 1, 1};  // blocks per stage; {3, 4, 6, 3} is ResNet34
  std::size_t base_width = 16;

  void validate() const;
};

template <typename T>
class Conv2dLayer {
 public:
  Conv2dLayer(const std::string& name, std::size_t in_channels, std::size_t out_channels, kernels::ConvGeometry g);

  void init(Rng& rng);
  Tensor<T> forward(const Tensor<T>& in);
  Tensor<T> backward(const Tensor<T>& gout);

  Parameter<T> weight;
  kernels::ConvGeometry geometry;

 private:
  Tensor<T> in_;
};

template <typename T>
class BasicBlock {
 public:
  BasicBlock(const std::string& name, std::size_t in_channels, std::size_t out_channels, std::size_t stride);

  void init(Rng& rng);
  void collect(StateRefs<T>& refs);
  Tensor<T> forward(const Tensor<T>& in, kernels::Mode mode);
  Tensor<T> backward(const Tensor<T>& gout);

 private:
  Conv2dLayer<T> conv1_;
  kernels::BatchNorm2d<T> bn1_;
  Conv2dLayer<T> conv2_;
  kernels::BatchNorm2d<T> bn2_;
  std::unique_ptr<Conv2dLayer<T>> down_conv_;
  std::unique_ptr<kernels::BatchNorm2d<T>> down_bn_;
  Tensor<T> mid_;  // post-ReLU after bn1
  Tensor<T> out_;  // post-ReLU block output
};

template <typename T>
class Backbone {
 public:
  explicit Backbone(BackboneConfig cfg);

  void init(Rng& rng);
  void collect(StateRefs<T>& refs);

  /// N x C x H x W -> N x K logits.
  Tensor<T> forward(const Tensor<T>& in, kernels::Mode mode);
  Tensor<T> backward(const Tensor<T>& glogits);

  /// Feature map right after the stem (and identity pooling).
  const Tensor<T>& stem_output() const noexcept { return stem_out_; }
  const BackboneConfig& config() const noexcept { return cfg_; }

  Parameter<T> fc_weight;
  Parameter<T> fc_bias;

 private:
  BackboneConfig cfg_;
  Conv2dLayer<T> stem_conv_;
  kernels::BatchNorm2d<T> stem_bn_;
  std::vector<std::unique_ptr<BasicBlock<T>>> blocks_;
  Tensor<T> stem_out_;
  Tensor<T> features_;   // last block output
  Tensor<T> pooled_;
};

}  // namespace neurolip
