#pragma once

// Structure-aware spatial enhancer: 1x1 channel compression, horizontal-only
// depthwise smoothing with BatchNorm + ReLU, then channel attention.

#include "neurolip/encoder.hpp"
#include "neurolip/kernels.hpp"

namespace neurolip {

enum class EnhancerMode {
  Learned,
  Average,  // fixed channel-averaging projection 2B -> C, nothing learned
};

struct EnhancerConfig {
  std::size_t channels = 16;
  std::size_t att_kernel = 1;
  EnhancerMode mode = EnhancerMode::Learned;

  void validate() const;
};

/// Fixed projection that averages consecutive groups of input channels:
/// input channel i feeds output floor(i * C / Cin).
template <typename T>
Tensor<T> averaging_projection(std::size_t in_channels, std::size_t out_channels);

template <typename T>
class Enhancer {
 public:
  Enhancer(std::size_t in_channels, EnhancerConfig cfg);

  void init(Rng& rng);
  void collect(StateRefs<T>& refs);

  Tensor<T> compress(const Tensor<T>& v_att);
  Tensor<T> smooth(const Tensor<T>& v_comp, kernels::Mode mode);
  Tensor<T> attend(const Tensor<T>& v_smooth);

  Tensor<T> compress_backward(const Tensor<T>& gcomp);
  Tensor<T> smooth_backward(const Tensor<T>& gsmooth);
  Tensor<T> attend_backward(const Tensor<T>& genh);

  /// compress -> smooth -> attend (or the fixed projection in Average mode).
  Tensor<T> forward(const Tensor<T>& v_att, kernels::Mode mode);
  Tensor<T> backward(const Tensor<T>& genh);

  const EnhancerConfig& config() const noexcept { return cfg_; }
  std::size_t in_channels() const noexcept { return in_channels_; }

  Parameter<T> ccl_weight;  // C x 2B
  Parameter<T> ccl_bias;    // C
  Parameter<T> dss_kernels; // C x 3
  kernels::BatchNorm2d<T> dss_bn;
  Parameter<T> att_kernel;
  Parameter<T> att_bias;

 private:
  std::size_t in_channels_;
  EnhancerConfig cfg_;
  Tensor<T> projection_;  // Average mode only

  Tensor<T> in_;
  Tensor<T> comp_;
  Tensor<T> smooth_out_;
  ChannelGate<T> gate_;
};

}  // namespace neurolip
