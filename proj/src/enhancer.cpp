#include "neurolip/enhancer.hpp"

namespace neurolip {

void EnhancerConfig::validate() const {
  if (channels < 1) throw ConfigError("enhancer.channels must be >= 1");
  if (att_kernel % 2 == 0) throw ConfigError("enhancer.att_kernel must be odd");
}

template <typename T>
Tensor<T> averaging_projection(std::size_t in_channels, std::size_t out_channels) {
  Tensor<T> w({out_channels, in_channels});
  std::vector<std::size_t> count(out_channels, 0);
  for (std::size_t i = 0; i < in_channels; ++i) ++count[i * out_channels / in_channels];
  for (std::size_t i = 0; i < in_channels; ++i) {
    const std::size_t o = i * out_channels / in_channels;
    w[o * in_channels + i] = T(1) / static_cast<T>(count[o]);
  }
  return w;
}

template <typename T>
Enhancer<T>::Enhancer(std::size_t in_channels, EnhancerConfig cfg)
    : ccl_weight("enhancer.ccl.weight", {cfg.channels, in_channels}),
      ccl_bias("enhancer.ccl.bias", {cfg.channels}),
      dss_kernels("enhancer.dss.kernels", {cfg.channels, 3}),
      dss_bn("enhancer.dss.bn", cfg.channels),
      att_kernel("enhancer.att.kernel", {cfg.att_kernel}),
      att_bias("enhancer.att.bias", {1}),
      in_channels_(in_channels),
      cfg_(cfg) {
  cfg_.validate();
  for (std::size_t c = 0; c < cfg.channels; ++c) dss_kernels.value[3 * c + 1] = T(1);
  if (cfg_.mode == EnhancerMode::Average) projection_ = averaging_projection<T>(in_channels, cfg.channels);
}

template <typename T>
void Enhancer<T>::init(Rng& rng) {
  init_uniform_fan_in(ccl_weight.value, in_channels_, rng);
  ccl_bias.value.zero();
  // near-identity smoothing: [0, 1, 0] plus a little noise
  for (std::size_t c = 0; c < cfg_.channels; ++c)
    for (std::size_t j = 0; j < 3; ++j)
      dss_kernels.value[3 * c + j] = static_cast<T>((j == 1 ? 1.0 : 0.0) + 0.05 * (2.0 * uniform01(rng) - 1.0));
  init_uniform_fan_in(att_kernel.value, att_kernel.value.size(), rng);
  att_bias.value.zero();
}

template <typename T>
void Enhancer<T>::collect(StateRefs<T>& refs) {
  if (cfg_.mode == EnhancerMode::Average) return;
  refs.params.push_back(&ccl_weight);
  refs.params.push_back(&ccl_bias);
  refs.params.push_back(&dss_kernels);
  dss_bn.collect(refs);
  refs.params.push_back(&att_kernel);
  refs.params.push_back(&att_bias);
}

template <typename T>
Tensor<T> Enhancer<T>::compress(const Tensor<T>& v_att) {
  in_ = v_att;
  return kernels::pointwise_conv2d(v_att, ccl_weight.value, &ccl_bias.value);
}

template <typename T>
Tensor<T> Enhancer<T>::compress_backward(const Tensor<T>& gcomp) {
  return kernels::pointwise_conv2d_backward(in_, ccl_weight.value, gcomp, ccl_weight.grad, &ccl_bias.grad);
}

template <typename T>
Tensor<T> Enhancer<T>::smooth(const Tensor<T>& v_comp, kernels::Mode mode) {
  comp_ = v_comp;
  smooth_out_ = kernels::relu(dss_bn.forward(kernels::depthwise_hconv1d(v_comp, dss_kernels.value), mode));
  return smooth_out_;
}

template <typename T>
Tensor<T> Enhancer<T>::smooth_backward(const Tensor<T>& gsmooth) {
  const Tensor<T> gbn = dss_bn.backward(kernels::relu_backward(smooth_out_, gsmooth));
  return kernels::depthwise_hconv1d_backward(comp_, dss_kernels.value, gbn, dss_kernels.grad);
}

template <typename T>
Tensor<T> Enhancer<T>::attend(const Tensor<T>& v_smooth) {
  gate_ = channel_gate_forward(v_smooth, att_kernel, att_bias);
  return gate_.output;
}

template <typename T>
Tensor<T> Enhancer<T>::attend_backward(const Tensor<T>& genh) {
  return channel_gate_backward(gate_, att_kernel, att_bias, genh);
}

template <typename T>
Tensor<T> Enhancer<T>::forward(const Tensor<T>& v_att, kernels::Mode mode) {
  if (v_att.dim(1) != in_channels_) throw Error("enhancer: expected " + std::to_string(in_channels_) + " channels");
  if (cfg_.mode == EnhancerMode::Average) {
    in_ = v_att;
    return kernels::pointwise_conv2d<T>(v_att, projection_, nullptr);
  }
  return attend(smooth(compress(v_att), mode));
}

template <typename T>
Tensor<T> Enhancer<T>::backward(const Tensor<T>& genh) {
  if (cfg_.mode == EnhancerMode::Average) {
    Tensor<T> unused(projection_.shape());
    return kernels::pointwise_conv2d_backward<T>(in_, projection_, genh, unused, nullptr);
  }
  return compress_backward(smooth_backward(attend_backward(genh)));
}

template Tensor<float> averaging_projection<float>(std::size_t, std::size_t);
template Tensor<double> averaging_projection<double>(std::size_t, std::size_t);
template class Enhancer<float>;
template class Enhancer<double>;

}  // namespace neurolip
