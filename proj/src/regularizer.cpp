#include "neurolip/regularizer.hpp"

#include <cmath>

namespace neurolip {

void PcrConfig::validate() const {
  if (!(lambda >= 0.0)) throw ConfigError("pcr.lambda must be >= 0");
}

template <typename T>
PcrHead<T>::PcrHead(std::size_t in_channels, const PcrConfig& cfg)
    : conv_a_weight("pcr.conv_a.weight", {cfg.mid_channels ? cfg.mid_channels : 2 * in_channels, in_channels}),
      conv_a_bias("pcr.conv_a.bias", {cfg.mid_channels ? cfg.mid_channels : 2 * in_channels}),
      conv_b_weight("pcr.conv_b.weight", {2, cfg.mid_channels ? cfg.mid_channels : 2 * in_channels}),
      conv_b_bias("pcr.conv_b.bias", {2}) {}

template <typename T>
void PcrHead<T>::init(Rng& rng) {
  init_uniform_fan_in(conv_a_weight.value, conv_a_weight.value.dim(1), rng);
  conv_a_bias.value.zero();
  init_uniform_fan_in(conv_b_weight.value, conv_b_weight.value.dim(1), rng);
  conv_b_bias.value.zero();
}

template <typename T>
void PcrHead<T>::collect(StateRefs<T>& refs) {
  refs.params.insert(refs.params.end(), {&conv_a_weight, &conv_a_bias, &conv_b_weight, &conv_b_bias});
}

template <typename T>
Tensor<T> PcrHead<T>::forward(const Tensor<T>& v_enh) {
  in_ = v_enh;
  hidden_ = kernels::relu(kernels::pointwise_conv2d(v_enh, conv_a_weight.value, &conv_a_bias.value));
  return kernels::pointwise_conv2d(hidden_, conv_b_weight.value, &conv_b_bias.value);
}

template <typename T>
Tensor<T> PcrHead<T>::backward(const Tensor<T>& grecon) {
  const Tensor<T> ghidden =
      kernels::pointwise_conv2d_backward(hidden_, conv_b_weight.value, grecon, conv_b_weight.grad, &conv_b_bias.grad);
  return kernels::pointwise_conv2d_backward(in_, conv_a_weight.value, kernels::relu_backward(hidden_, ghidden),
                                            conv_a_weight.grad, &conv_a_bias.grad);
}

template <typename T>
Tensor<T> reference_map(const Tensor<T>& v_att, std::size_t bins) {
  const std::size_t N = v_att.dim(0), H = v_att.dim(2), W = v_att.dim(3), P = H * W;
  if (v_att.dim(1) != 2 * bins) throw Error("reference_map: expected 2B channels");
  Tensor<T> out({N, 2, H, W});
  const T inv = T(1) / static_cast<T>(bins);
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t a = 0; a < 2; ++a) {
      T* d = out.plane(n, a);
      for (std::size_t b = 0; b < bins; ++b) {
        const T* s = v_att.plane(n, a * bins + b);
        for (std::size_t p = 0; p < P; ++p) d[p] += s[p];
      }
      for (std::size_t p = 0; p < P; ++p) d[p] *= inv;
    }
  return out;
}

template <typename T>
Tensor<T> reference_map_backward(const Tensor<T>& gref, std::size_t bins) {
  const std::size_t N = gref.dim(0), H = gref.dim(2), W = gref.dim(3), P = H * W;
  Tensor<T> gin({N, 2 * bins, H, W});
  const T inv = T(1) / static_cast<T>(bins);
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t a = 0; a < 2; ++a)
      for (std::size_t b = 0; b < bins; ++b) {
        const T* g = gref.plane(n, a);
        T* d = gin.plane(n, a * bins + b);
        for (std::size_t p = 0; p < P; ++p) d[p] = g[p] * inv;
      }
  return gin;
}

namespace {

template <typename T>
T positive_mass(const T* x, std::size_t P) {
  T s = 0;
  for (std::size_t p = 0; p < P; ++p) s += x[p] > T(0) ? x[p] : T(0);
  return s;
}

}  // namespace

template <typename T>
Tensor<T> normalize_polarity(const Tensor<T>& map) {
  const std::size_t N = map.dim(0), C = map.dim(1), P = map.dim(2) * map.dim(3);
  Tensor<T> out(map.shape());
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t c = 0; c < C; ++c) {
      const T* x = map.plane(n, c);
      T* d = out.plane(n, c);
      const T s = positive_mass(x, P);
      if (static_cast<double>(s) < kPcrMassEpsilon) {
        std::fill_n(d, P, T(1) / static_cast<T>(P));
        continue;
      }
      for (std::size_t p = 0; p < P; ++p) d[p] = (x[p] > T(0) ? x[p] : T(0)) / s;
    }
  return out;
}

template <typename T>
PcrLoss<T> pcr_loss(const Tensor<T>& recon, const Tensor<T>& reference) {
  if (recon.shape() != reference.shape() || recon.rank() != 4 || recon.dim(1) != 2)
    throw Error("pcr_loss: expects matching N x 2 x H x W maps");
  const std::size_t N = recon.dim(0), P = recon.dim(2) * recon.dim(3);
  const Tensor<T> rn = normalize_polarity(recon);
  const Tensor<T> qn = normalize_polarity(reference);
  PcrLoss<T> out;
  out.per_sample.assign(N, T(0));
  out.grad_recon = Tensor<T>(recon.shape());
  out.grad_reference = Tensor<T>(recon.shape());
  const T scale = T(1) / (T(2) * static_cast<T>(P));
  const T batch = T(1) / static_cast<T>(N);
  std::vector<T> g(P);

  // d/dx of x+_k / S where S = sum x+: (delta_jk - n_j) / S on the positive support.
  auto backprop = [&](const T* x, const T* nrm, T* dst, T sign) {
    const T s = positive_mass(x, P);
    if (static_cast<double>(s) < kPcrMassEpsilon) return;
    T gn = 0;
    for (std::size_t p = 0; p < P; ++p) gn += sign * g[p] * nrm[p];
    for (std::size_t p = 0; p < P; ++p) dst[p] = x[p] > T(0) ? (sign * g[p] - gn) / s : T(0);
  };

  T total = 0;
  for (std::size_t n = 0; n < N; ++n) {
    T l = 0;
    for (std::size_t a = 0; a < 2; ++a) {
      const T* r = rn.plane(n, a);
      const T* q = qn.plane(n, a);
      for (std::size_t p = 0; p < P; ++p) {
        const T d = r[p] - q[p];
        l += std::abs(d);
        g[p] = (d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0))) * scale * batch;
      }
      backprop(recon.plane(n, a), r, out.grad_recon.plane(n, a), T(1));
      backprop(reference.plane(n, a), q, out.grad_reference.plane(n, a), T(-1));
    }
    out.per_sample[n] = l * scale;
    total += out.per_sample[n];
  }
  out.loss = total * batch;
  return out;
}

#define NEUROLIP_INSTANTIATE(T)                                                 \
  template class PcrHead<T>;                                                    \
  template Tensor<T> reference_map<T>(const Tensor<T>&, std::size_t);           \
  template Tensor<T> reference_map_backward<T>(const Tensor<T>&, std::size_t);  \
  template Tensor<T> normalize_polarity<T>(const Tensor<T>&);                   \
  template PcrLoss<T> pcr_loss<T>(const Tensor<T>&, const Tensor<T>&);

NEUROLIP_INSTANTIATE(float)
NEUROLIP_INSTANTIATE(double)

#undef NEUROLIP_INSTANTIATE

}  // namespace neurolip
