#include "neurolip/encoder.hpp"

#include <algorithm>
#include <cmath>

#include "neurolip/preprocess.hpp"

namespace neurolip {

void TveConfig::validate() const {
  if (bins < 1) throw ConfigError("tve.bins must be >= 1");
  if (downscale < 1) throw ConfigError("tve.downscale must be >= 1");
  if (tcr_kernel % 2 == 0) throw ConfigError("tve.tcr_kernel must be odd");
  if (mlp_hidden < 1) throw ConfigError("tve.mlp_hidden must be >= 1");
  if (sensor.width < 1 || sensor.height < 1) throw ConfigError("sensor geometry must be at least 1x1");
}

template <typename T>
TveParams<T>::TveParams(const TveConfig& cfg)
    : scale("encoder.lta.s", {1}),
      mlp("encoder.lta.mlp", cfg.mlp_hidden),
      tcr_kernel("encoder.tcr.kernel", {cfg.tcr_kernel}),
      tcr_bias("encoder.tcr.bias", {1}) {
  scale.value[0] = T(1);
}

template <typename T>
void TveParams<T>::init(Rng& rng) {
  scale.value[0] = T(1);
  mlp.init(rng);
  init_uniform_fan_in(tcr_kernel.value, tcr_kernel.value.size(), rng);
  tcr_bias.value.zero();
}

template <typename T>
void TveParams<T>::collect(StateRefs<T>& refs) {
  refs.params.push_back(&scale);
  mlp.collect(refs);
  refs.params.push_back(&tcr_kernel);
  refs.params.push_back(&tcr_bias);
}

double bin_feature(std::size_t b, std::size_t bins) {
  return bins > 1 ? static_cast<double>(b) / static_cast<double>(bins - 1) : 0.0;
}

template <typename T>
Tensor<T> temporal_offsets(std::span<const double> t_norm, std::size_t bins) {
  Tensor<T> out({t_norm.size(), bins});
  for (std::size_t i = 0; i < t_norm.size(); ++i)
    for (std::size_t b = 0; b < bins; ++b)
      out[i * bins + b] = static_cast<T>(t_norm[i] - static_cast<double>(b) / static_cast<double>(bins));
  return out;
}

namespace {

template <typename T>
std::vector<T> mlp_inputs(const Tensor<T>& offsets, T s) {
  const std::size_t N = offsets.dim(0), B = offsets.dim(1);
  std::vector<T> in(2 * N * B);
  std::vector<T> feat(B);
  for (std::size_t b = 0; b < B; ++b) feat[b] = static_cast<T>(bin_feature(b, B));
  for (std::size_t i = 0; i < N * B; ++i) {
    in[2 * i] = s * offsets[i];
    in[2 * i + 1] = feat[i % B];
  }
  return in;
}

}  // namespace

template <typename T>
Tensor<T> lta_weights(const Tensor<T>& offsets, const TveParams<T>& params) {
  Tensor<T> out(offsets.shape());
  const auto in = mlp_inputs(offsets, params.scale.value[0]);
  kernels::dense2_forward<T>(params.mlp, in, out.span());
  return out;
}

template <typename T>
void lta_weights_backward(const Tensor<T>& offsets, TveParams<T>& params, const Tensor<T>& gweights) {
  const auto in = mlp_inputs(offsets, params.scale.value[0]);
  std::vector<T> gin(in.size(), T(0));
  kernels::dense2_backward<T>(params.mlp, in, gweights.span(), gin);
  // d(s * dt)/ds = dt
  T gs = 0;
  for (std::size_t i = 0; i < offsets.size(); ++i) gs += gin[2 * i] * offsets[i];
  params.scale.grad[0] += gs;
}

template <typename T>
Tensor<T> oracle_weights(std::span<const double> t_norm, std::size_t bins) {
  Tensor<T> out({t_norm.size(), bins});
  for (std::size_t i = 0; i < t_norm.size(); ++i) {
    auto b = static_cast<std::size_t>(std::floor(t_norm[i] * static_cast<double>(bins)));
    b = std::min(b, bins - 1);
    out[i * bins + b] = T(1);
  }
  return out;
}

template <typename T>
Tensor<T> accumulate(std::span<const Event> events, const Tensor<T>& weights, std::size_t bins, std::size_t height,
                     std::size_t width) {
  Tensor<T> v({1, 2 * bins, height, width});
  const std::size_t plane = height * width;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const Event& e = events[i];
    const std::size_t base = (e.p > 0 ? bins : 0) * plane + std::size_t{e.y} * width + e.x;
    const T* w = weights.data() + i * bins;
    for (std::size_t b = 0; b < bins; ++b) v[base + b * plane] += w[b];
  }
  return v;
}

template <typename T>
Tensor<T> accumulate_backward(std::span<const Event> events, const Tensor<T>& gvoxel, std::size_t bins) {
  const std::size_t height = gvoxel.dim(2), width = gvoxel.dim(3), plane = height * width;
  Tensor<T> gw({events.size(), bins});
  for (std::size_t i = 0; i < events.size(); ++i) {
    const Event& e = events[i];
    const std::size_t base = (e.p > 0 ? bins : 0) * plane + std::size_t{e.y} * width + e.x;
    for (std::size_t b = 0; b < bins; ++b) gw[i * bins + b] = gvoxel[base + b * plane];
  }
  return gw;
}

template <typename T>
Tensor<T> lsa(const Tensor<T>& in) {
  const std::size_t N = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
  Tensor<T> out(in.shape());
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t c = 0; c < C; ++c) {
      const T* s = in.plane(n, c);
      T* d = out.plane(n, c);
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) {
          T v = s[y * W + x];
          if (y + 1 < H) v += s[(y + 1) * W + x];
          if (x + 1 < W) v += s[y * W + x + 1];
          d[y * W + x] = v;
        }
    }
  return out;
}

template <typename T>
Tensor<T> lsa_backward(const Tensor<T>& gout) {
  const std::size_t N = gout.dim(0), C = gout.dim(1), H = gout.dim(2), W = gout.dim(3);
  Tensor<T> gin(gout.shape());
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t c = 0; c < C; ++c) {
      const T* g = gout.plane(n, c);
      T* d = gin.plane(n, c);
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) {
          T v = g[y * W + x];
          if (y > 0) v += g[(y - 1) * W + x];
          if (x > 0) v += g[y * W + x - 1];
          d[y * W + x] = v;
        }
    }
  return gin;
}

template <typename T>
ChannelGate<T> channel_gate_forward(const Tensor<T>& in, const Parameter<T>& kernel, const Parameter<T>& bias) {
  ChannelGate<T> c;
  c.input = in;
  c.pooled = kernels::gap2d(in);
  c.gate = kernels::sigmoid(kernels::conv1d_channels(c.pooled, kernel.value, bias.value));
  c.output = kernels::channel_scale(in, c.gate);
  return c;
}

template <typename T>
Tensor<T> channel_gate_backward(const ChannelGate<T>& cache, Parameter<T>& kernel, Parameter<T>& bias,
                                const Tensor<T>& gout) {
  Tensor<T> gin, ggate;
  kernels::channel_scale_backward(cache.input, cache.gate, gout, gin, ggate);
  const Tensor<T> gpre = kernels::sigmoid_backward(cache.gate, ggate);
  const Tensor<T> gpooled = kernels::conv1d_channels_backward(cache.pooled, kernel.value, gpre, kernel.grad, bias.grad);
  kernels::add_inplace(gin, kernels::gap2d_backward(cache.input.shape(), gpooled));
  return gin;
}

template <typename T>
EncodeTrace<T> Encoder<T>::forward(const EventStream& stream) const {
  if (!(stream.geometry() == cfg_.sensor))
    throw ConfigError("stream geometry " + std::to_string(stream.geometry().width) + "x" +
                      std::to_string(stream.geometry().height) + " does not match encoder sensor geometry");
  const std::size_t B = cfg_.bins, H = cfg_.voxel_height(), W = cfg_.voxel_width();
  EncodeTrace<T> tr;
  const EventStream small = downscale(stream, cfg_.downscale);
  tr.events = small.events();
  if (tr.events.empty()) {
    tr.offsets = Tensor<T>({0, B});
    tr.weights = Tensor<T>({0, B});
    tr.voxel = Tensor<T>({1, 2 * B, H, W});
  } else {
    tr.t_norm = normalize_time(small);
    tr.offsets = temporal_offsets<T>(tr.t_norm, B);
    tr.weights = cfg_.lta == LtaMode::Learned ? lta_weights(tr.offsets, params_) : oracle_weights<T>(tr.t_norm, B);
    tr.voxel = accumulate<T>(tr.events, tr.weights, B, H, W);
  }
  tr.tcr = channel_gate_forward(lsa(tr.voxel), params_.tcr_kernel, params_.tcr_bias);
  return tr;
}

template <typename T>
void Encoder<T>::backward(const EncodeTrace<T>& trace, const Tensor<T>& gv_att) {
  const Tensor<T> glsa = channel_gate_backward(trace.tcr, params_.tcr_kernel, params_.tcr_bias, gv_att);
  if (cfg_.lta != LtaMode::Learned || trace.events.empty()) return;
  const Tensor<T> gvoxel = lsa_backward(glsa);
  const Tensor<T> gw = accumulate_backward<T>(trace.events, gvoxel, cfg_.bins);
  lta_weights_backward(trace.offsets, params_, gw);
}

#define NEUROLIP_INSTANTIATE(T)                                                                               \
  template struct TveParams<T>;                                                                               \
  template Tensor<T> temporal_offsets<T>(std::span<const double>, std::size_t);                               \
  template Tensor<T> lta_weights<T>(const Tensor<T>&, const TveParams<T>&);                                   \
  template void lta_weights_backward<T>(const Tensor<T>&, TveParams<T>&, const Tensor<T>&);                   \
  template Tensor<T> oracle_weights<T>(std::span<const double>, std::size_t);                                 \
  template Tensor<T> accumulate<T>(std::span<const Event>, const Tensor<T>&, std::size_t, std::size_t,        \
                                   std::size_t);                                                              \
  template Tensor<T> accumulate_backward<T>(std::span<const Event>, const Tensor<T>&, std::size_t);           \
  template Tensor<T> lsa<T>(const Tensor<T>&);                                                                \
  template Tensor<T> lsa_backward<T>(const Tensor<T>&);                                                       \
  template ChannelGate<T> channel_gate_forward<T>(const Tensor<T>&, const Parameter<T>&, const Parameter<T>&); \
  template Tensor<T> channel_gate_backward<T>(const ChannelGate<T>&, Parameter<T>&, Parameter<T>&,            \
                                              const Tensor<T>&);                                              \
  template class Encoder<T>;

NEUROLIP_INSTANTIATE(float)
NEUROLIP_INSTANTIATE(double)

#undef NEUROLIP_INSTANTIATE

}  // namespace neurolip
