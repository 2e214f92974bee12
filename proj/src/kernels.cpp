#include "neurolip/kernels.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>

namespace neurolip::kernels {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw Error(what);
}

}  // namespace

template <typename T>
T dot(const T* a, const T* b, std::size_t n) {
  T acc[8] = {};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    for (std::size_t j = 0; j < 8; ++j) acc[j] += a[i + j] * b[i + j];
  T tail = 0;
  for (; i < n; ++i) tail += a[i] * b[i];
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail;
}

template <typename T>
T sum(const T* a, std::size_t n) {
  T acc[8] = {};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    for (std::size_t j = 0; j < 8; ++j) acc[j] += a[i + j];
  T tail = 0;
  for (; i < n; ++i) tail += a[i];
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail;
}

namespace {

void blas_gemm(CBLAS_TRANSPOSE ta, CBLAS_TRANSPOSE tb, std::size_t m, std::size_t n, std::size_t k, const float* a,
               std::size_t lda, const float* b, std::size_t ldb, float* c, std::size_t ldc) {
  cblas_sgemm(CblasRowMajor, ta, tb, static_cast<int>(m), static_cast<int>(n), static_cast<int>(k), 1.0f, a,
              static_cast<int>(lda), b, static_cast<int>(ldb), 1.0f, c, static_cast<int>(ldc));
}

void blas_gemm(CBLAS_TRANSPOSE ta, CBLAS_TRANSPOSE tb, std::size_t m, std::size_t n, std::size_t k, const double* a,
               std::size_t lda, const double* b, std::size_t ldb, double* c, std::size_t ldc) {
  cblas_dgemm(CblasRowMajor, ta, tb, static_cast<int>(m), static_cast<int>(n), static_cast<int>(k), 1.0, a,
              static_cast<int>(lda), b, static_cast<int>(ldb), 1.0, c, static_cast<int>(ldc));
}

}  // namespace

template <typename T>
void gemm_nn(std::size_t M, std::size_t K, std::size_t P, const T* A, const T* B, T* C) {
  if (M == 0 || K == 0 || P == 0) return;
  blas_gemm(CblasNoTrans, CblasNoTrans, M, P, K, A, K, B, P, C, P);
}

template <typename T>
void gemm_tn(std::size_t M, std::size_t K, std::size_t P, const T* A, const T* G, T* C) {
  if (M == 0 || K == 0 || P == 0) return;
  blas_gemm(CblasTrans, CblasNoTrans, K, P, M, A, K, G, P, C, P);
}

template <typename T>
void gemm_nt(std::size_t M, std::size_t K, std::size_t P, const T* G, const T* B, T* C) {
  if (M == 0 || K == 0 || P == 0) return;
  blas_gemm(CblasNoTrans, CblasTrans, M, K, P, G, P, B, P, C, K);
}

// ---------------------------------------------------------------------------

template <typename T>
void Dense2<T>::init(Rng& rng) {
  init_uniform_fan_in(w1.value, 2, rng);
  init_uniform_fan_in(w2.value, hidden(), rng);
  b1.value.zero();
  b2.value.zero();
}

template <typename T>
void dense2_forward(const Dense2<T>& p, std::span<const T> in, std::span<T> out) {
  const std::size_t H = p.hidden();
  const std::size_t M = out.size();
  require(in.size() == 2 * M, "dense2: input must be M x 2");
  const T* w1 = p.w1.value.data();
  const T* b1 = p.b1.value.data();
  const T* w2 = p.w2.value.data();
  const T b2 = p.b2.value[0];
  std::vector<T> h(H);
  for (std::size_t i = 0; i < M; ++i) {
    const T x0 = in[2 * i], x1 = in[2 * i + 1];
    for (std::size_t k = 0; k < H; ++k) {
      const T v = w1[2 * k] * x0 + w1[2 * k + 1] * x1 + b1[k];
      h[k] = v > T(0) ? v : T(0);
    }
    out[i] = dot(w2, h.data(), H) + b2;
  }
}

template <typename T>
void dense2_backward(Dense2<T>& p, std::span<const T> in, std::span<const T> gout, std::span<T> gin) {
  const std::size_t H = p.hidden();
  const std::size_t M = gout.size();
  require(in.size() == 2 * M, "dense2: input must be M x 2");
  require(gin.empty() || gin.size() == 2 * M, "dense2: input gradient size mismatch");
  const T* w1 = p.w1.value.data();
  const T* b1 = p.b1.value.data();
  const T* w2 = p.w2.value.data();
  T* gw1 = p.w1.grad.data();
  T* gb1 = p.b1.grad.data();
  T* gw2 = p.w2.grad.data();
  T gb2 = 0;
  std::vector<T> gh(H);
  for (std::size_t i = 0; i < M; ++i) {
    const T g = gout[i];
    if (g == T(0)) continue;
    const T x0 = in[2 * i], x1 = in[2 * i + 1];
    gb2 += g;
    T gx0 = 0, gx1 = 0;
    for (std::size_t k = 0; k < H; ++k) {
      const T v = w1[2 * k] * x0 + w1[2 * k + 1] * x1 + b1[k];
      const bool active = v > T(0);
      gw2[k] += active ? g * v : T(0);
      gh[k] = active ? g * w2[k] : T(0);
      gw1[2 * k] += gh[k] * x0;
      gw1[2 * k + 1] += gh[k] * x1;
      gb1[k] += gh[k];
    }
    if (!gin.empty()) {
      for (std::size_t k = 0; k < H; ++k) {
        gx0 += gh[k] * w1[2 * k];
        gx1 += gh[k] * w1[2 * k + 1];
      }
      gin[2 * i] += gx0;
      gin[2 * i + 1] += gx1;
    }
  }
  p.b2.grad[0] += gb2;
}

// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> pointwise_conv2d(const Tensor<T>& in, const Tensor<T>& weight, const Tensor<T>* bias) {
  require(in.rank() == 4 && weight.rank() == 2 && weight.dim(1) == in.dim(1), "pointwise_conv2d: shape mismatch");
  const std::size_t N = in.dim(0), Cin = in.dim(1), P = in.dim(2) * in.dim(3), Cout = weight.dim(0);
  Tensor<T> out({N, Cout, in.dim(2), in.dim(3)});
  for (std::size_t n = 0; n < N; ++n) {
    if (bias)
      for (std::size_t co = 0; co < Cout; ++co) std::fill_n(out.plane(n, co), P, (*bias)[co]);
    gemm_nn(Cout, Cin, P, weight.data(), in.plane(n, 0), out.plane(n, 0));
  }
  return out;
}

template <typename T>
Tensor<T> pointwise_conv2d_backward(const Tensor<T>& in, const Tensor<T>& weight, const Tensor<T>& gout,
                                    Tensor<T>& gweight, Tensor<T>* gbias) {
  const std::size_t N = in.dim(0), Cin = in.dim(1), P = in.dim(2) * in.dim(3), Cout = weight.dim(0);
  Tensor<T> gin(in.shape());
  for (std::size_t n = 0; n < N; ++n) {
    gemm_nt(Cout, Cin, P, gout.plane(n, 0), in.plane(n, 0), gweight.data());
    gemm_tn(Cout, Cin, P, weight.data(), gout.plane(n, 0), gin.plane(n, 0));
    if (gbias)
      for (std::size_t co = 0; co < Cout; ++co) (*gbias)[co] += sum(gout.plane(n, co), P);
  }
  return gin;
}

// ---------------------------------------------------------------------------

namespace {

template <typename T>
void im2col(const T* in, std::size_t C, std::size_t H, std::size_t W, const ConvGeometry& g, std::size_t Ho,
            std::size_t Wo, T* col) {
  const std::size_t k = g.kernel;
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t ky = 0; ky < k; ++ky)
      for (std::size_t kx = 0; kx < k; ++kx) {
        T* row = col + ((c * k + ky) * k + kx) * Ho * Wo;
        for (std::size_t oy = 0; oy < Ho; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad);
          T* r = row + oy * Wo;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) {
            std::fill_n(r, Wo, T(0));
            continue;
          }
          const T* src = in + (c * H + static_cast<std::size_t>(iy)) * W;
          for (std::size_t ox = 0; ox < Wo; ++ox) {
            const std::ptrdiff_t ix =
                static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad);
            r[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) ? T(0) : src[ix];
          }
        }
      }
}

template <typename T>
void col2im(const T* col, std::size_t C, std::size_t H, std::size_t W, const ConvGeometry& g, std::size_t Ho,
            std::size_t Wo, T* out) {
  const std::size_t k = g.kernel;
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t ky = 0; ky < k; ++ky)
      for (std::size_t kx = 0; kx < k; ++kx) {
        const T* row = col + ((c * k + ky) * k + kx) * Ho * Wo;
        for (std::size_t oy = 0; oy < Ho; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
          T* dst = out + (c * H + static_cast<std::size_t>(iy)) * W;
          const T* r = row + oy * Wo;
          for (std::size_t ox = 0; ox < Wo; ++ox) {
            const std::ptrdiff_t ix =
                static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad);
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(W)) dst[ix] += r[ox];
          }
        }
      }
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& in, const Tensor<T>& weight, const ConvGeometry& g) {
  require(in.rank() == 4 && weight.rank() == 4 && weight.dim(1) == in.dim(1) && weight.dim(2) == g.kernel &&
              weight.dim(3) == g.kernel,
          "conv2d: shape mismatch");
  const std::size_t N = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3), Cout = weight.dim(0);
  require(H + 2 * g.pad >= g.kernel && W + 2 * g.pad >= g.kernel, "conv2d: input smaller than kernel");
  const std::size_t Ho = g.out_extent(H), Wo = g.out_extent(W), K = C * g.kernel * g.kernel;
  Tensor<T> out({N, Cout, Ho, Wo});
  const bool direct = g.kernel == 1 && g.stride == 1 && g.pad == 0;
  std::vector<T> col(direct ? 0 : K * Ho * Wo);
  for (std::size_t n = 0; n < N; ++n) {
    const T* src = in.plane(n, 0);
    if (!direct) {
      im2col(src, C, H, W, g, Ho, Wo, col.data());
      src = col.data();
    }
    gemm_nn(Cout, K, Ho * Wo, weight.data(), src, out.plane(n, 0));
  }
  return out;
}

template <typename T>
Tensor<T> conv2d_backward(const Tensor<T>& in, const Tensor<T>& weight, const ConvGeometry& g, const Tensor<T>& gout,
                          Tensor<T>& gweight) {
  const std::size_t N = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3), Cout = weight.dim(0);
  const std::size_t Ho = gout.dim(2), Wo = gout.dim(3), K = C * g.kernel * g.kernel, P = Ho * Wo;
  Tensor<T> gin(in.shape());
  const bool direct = g.kernel == 1 && g.stride == 1 && g.pad == 0;
  std::vector<T> col(direct ? 0 : K * P);
  std::vector<T> gcol(direct ? 0 : K * P);
  for (std::size_t n = 0; n < N; ++n) {
    if (direct) {
      gemm_nt(Cout, K, P, gout.plane(n, 0), in.plane(n, 0), gweight.data());
      gemm_tn(Cout, K, P, weight.data(), gout.plane(n, 0), gin.plane(n, 0));
      continue;
    }
    im2col(in.plane(n, 0), C, H, W, g, Ho, Wo, col.data());
    gemm_nt(Cout, K, P, gout.plane(n, 0), col.data(), gweight.data());
    std::fill(gcol.begin(), gcol.end(), T(0));
    gemm_tn(Cout, K, P, weight.data(), gout.plane(n, 0), gcol.data());
    col2im(gcol.data(), C, H, W, g, Ho, Wo, gin.plane(n, 0));
  }
  return gin;
}

// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> depthwise_hconv1d(const Tensor<T>& in, const Tensor<T>& kernels) {
  require(in.rank() == 4 && kernels.rank() == 2 && kernels.dim(0) == in.dim(1) && kernels.dim(1) == 3,
          "depthwise_hconv1d: shape mismatch");
  const std::size_t N = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
  Tensor<T> out(in.shape());
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t c = 0; c < C; ++c) {
      const T k0 = kernels[3 * c], k1 = kernels[3 * c + 1], k2 = kernels[3 * c + 2];
      for (std::size_t y = 0; y < H; ++y) {
        const T* s = in.plane(n, c) + y * W;
        T* d = out.plane(n, c) + y * W;
        for (std::size_t x = 0; x < W; ++x) {
          const T left = x > 0 ? s[x - 1] : T(0);
          const T right = x + 1 < W ? s[x + 1] : T(0);
          d[x] = k0 * left + k1 * s[x] + k2 * right;
        }
      }
    }
  return out;
}

template <typename T>
Tensor<T> depthwise_hconv1d_backward(const Tensor<T>& in, const Tensor<T>& kernels, const Tensor<T>& gout,
                                     Tensor<T>& gkernels) {
  const std::size_t N = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
  Tensor<T> gin(in.shape());
  for (std::size_t c = 0; c < C; ++c) {
    const T k0 = kernels[3 * c], k1 = kernels[3 * c + 1], k2 = kernels[3 * c + 2];
    T g0 = 0, g1 = 0, g2 = 0;
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t y = 0; y < H; ++y) {
        const T* s = in.plane(n, c) + y * W;
        const T* g = gout.plane(n, c) + y * W;
        T* d = gin.plane(n, c) + y * W;
        for (std::size_t x = 0; x < W; ++x) {
          const T gl = x + 1 < W ? g[x + 1] : T(0);  // output x+1 reads input x through k0
          const T gr = x > 0 ? g[x - 1] : T(0);      // output x-1 reads input x through k2
          d[x] = k0 * gl + k1 * g[x] + k2 * gr;
        }
        g1 += dot(g, s, W);
        if (W > 1) {
          g0 += dot(g + 1, s, W - 1);
          g2 += dot(g, s + 1, W - 1);
        }
      }
    gkernels[3 * c] += g0;
    gkernels[3 * c + 1] += g1;
    gkernels[3 * c + 2] += g2;
  }
  return gin;
}

// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> conv1d_channels(const Tensor<T>& in, const Tensor<T>& kernel, const Tensor<T>& bias) {
  require(in.rank() == 2 && kernel.size() % 2 == 1 && bias.size() == 1, "conv1d_channels: shape mismatch");
  const std::size_t N = in.dim(0), L = in.dim(1), k = kernel.size(), half = k / 2;
  Tensor<T> out(in.shape());
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t i = 0; i < L; ++i) {
      T acc = bias[0];
      for (std::size_t j = 0; j < k; ++j) {
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(i + j) - static_cast<std::ptrdiff_t>(half);
        if (src >= 0 && src < static_cast<std::ptrdiff_t>(L)) acc += kernel[j] * in[n * L + static_cast<std::size_t>(src)];
      }
      out[n * L + i] = acc;
    }
  return out;
}

template <typename T>
Tensor<T> conv1d_channels_backward(const Tensor<T>& in, const Tensor<T>& kernel, const Tensor<T>& gout,
                                   Tensor<T>& gkernel, Tensor<T>& gbias) {
  const std::size_t N = in.dim(0), L = in.dim(1), k = kernel.size(), half = k / 2;
  Tensor<T> gin(in.shape());
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t i = 0; i < L; ++i) {
      const T g = gout[n * L + i];
      gbias[0] += g;
      for (std::size_t j = 0; j < k; ++j) {
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(i + j) - static_cast<std::ptrdiff_t>(half);
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(L)) continue;
        const std::size_t s = n * L + static_cast<std::size_t>(src);
        gkernel[j] += g * in[s];
        gin[s] += g * kernel[j];
      }
    }
  return gin;
}

// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> gap2d(const Tensor<T>& in) {
  require(in.rank() == 4, "gap2d: expects N x C x H x W");
  const std::size_t N = in.dim(0), C = in.dim(1), P = in.dim(2) * in.dim(3);
  Tensor<T> out({N, C});
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t c = 0; c < C; ++c) out[n * C + c] = sum(in.plane(n, c), P) / static_cast<T>(P);
  return out;
}

template <typename T>
Tensor<T> gap2d_backward(const Shape& in_shape, const Tensor<T>& gout) {
  Tensor<T> gin(in_shape);
  const std::size_t N = in_shape[0], C = in_shape[1], P = in_shape[2] * in_shape[3];
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t c = 0; c < C; ++c) std::fill_n(gin.plane(n, c), P, gout[n * C + c] / static_cast<T>(P));
  return gin;
}

template <typename T>
Tensor<T> channel_scale(const Tensor<T>& in, const Tensor<T>& scale) {
  const std::size_t N = in.dim(0), C = in.dim(1), P = in.dim(2) * in.dim(3);
  require(scale.size() == N * C, "channel_scale: scale must be N x C");
  Tensor<T> out(in.shape());
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t c = 0; c < C; ++c) {
      const T a = scale[n * C + c];
      const T* s = in.plane(n, c);
      T* d = out.plane(n, c);
      for (std::size_t p = 0; p < P; ++p) d[p] = a * s[p];
    }
  return out;
}

template <typename T>
void channel_scale_backward(const Tensor<T>& in, const Tensor<T>& scale, const Tensor<T>& gout, Tensor<T>& gin,
                            Tensor<T>& gscale) {
  const std::size_t N = in.dim(0), C = in.dim(1), P = in.dim(2) * in.dim(3);
  gin = Tensor<T>(in.shape());
  gscale = Tensor<T>({N, C});
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t c = 0; c < C; ++c) {
      const T a = scale[n * C + c];
      const T* g = gout.plane(n, c);
      T* d = gin.plane(n, c);
      for (std::size_t p = 0; p < P; ++p) d[p] = a * g[p];
      gscale[n * C + c] = dot(g, in.plane(n, c), P);
    }
}

// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> relu(const Tensor<T>& in) {
  Tensor<T> out(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > T(0) ? in[i] : T(0);
  return out;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& out, const Tensor<T>& gout) {
  Tensor<T> gin(out.shape());
  for (std::size_t i = 0; i < out.size(); ++i) gin[i] = out[i] > T(0) ? gout[i] : T(0);
  return gin;
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& in) {
  Tensor<T> out(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) {
    const T x = in[i];
    // split on sign so exp never overflows
    if (x >= T(0)) {
      out[i] = T(1) / (T(1) + std::exp(-x));
    } else {
      const T e = std::exp(x);
      out[i] = e / (T(1) + e);
    }
  }
  return out;
}

template <typename T>
Tensor<T> sigmoid_backward(const Tensor<T>& out, const Tensor<T>& gout) {
  Tensor<T> gin(out.shape());
  for (std::size_t i = 0; i < out.size(); ++i) gin[i] = gout[i] * out[i] * (T(1) - out[i]);
  return gin;
}

// ---------------------------------------------------------------------------

template <typename T>
BatchNorm2d<T>::BatchNorm2d(const std::string& prefix, std::size_t channels, double momentum, double eps)
    : gamma(prefix + ".gamma", {channels}),
      beta(prefix + ".beta", {channels}),
      running_mean({channels}, T(0)),
      running_var({channels}, T(1)),
      prefix_(prefix),
      momentum_(momentum),
      eps_(eps) {
  gamma.value.fill(T(1));
}

template <typename T>
void BatchNorm2d<T>::collect(StateRefs<T>& refs) {
  refs.params.push_back(&gamma);
  refs.params.push_back(&beta);
  refs.buffers.emplace_back(prefix_ + ".running_mean", &running_mean);
  refs.buffers.emplace_back(prefix_ + ".running_var", &running_var);
}

template <typename T>
Tensor<T> BatchNorm2d<T>::forward(const Tensor<T>& in, Mode mode) {
  const std::size_t N = in.dim(0), C = in.dim(1), P = in.dim(2) * in.dim(3);
  require(C == gamma.value.size(), "batchnorm2d: channel mismatch");
  last_mode_ = mode;
  xhat_ = Tensor<T>(in.shape());
  inv_std_.assign(C, T(0));
  Tensor<T> out(in.shape());
  const std::size_t M = N * P;
  for (std::size_t c = 0; c < C; ++c) {
    T mean, var;
    if (mode == Mode::Train) {
      T s = 0;
      for (std::size_t n = 0; n < N; ++n) s += sum(in.plane(n, c), P);
      mean = s / static_cast<T>(M);
      T ss = 0;
      for (std::size_t n = 0; n < N; ++n) {
        const T* x = in.plane(n, c);
        T acc = 0;
        for (std::size_t p = 0; p < P; ++p) acc += (x[p] - mean) * (x[p] - mean);
        ss += acc;
      }
      var = ss / static_cast<T>(M);
      const T unbiased = M > 1 ? ss / static_cast<T>(M - 1) : var;
      const T m = static_cast<T>(momentum_);
      running_mean[c] = (T(1) - m) * running_mean[c] + m * mean;
      running_var[c] = (T(1) - m) * running_var[c] + m * unbiased;
    } else {
      mean = running_mean[c];
      var = running_var[c];
    }
    const T inv = T(1) / std::sqrt(var + static_cast<T>(eps_));
    inv_std_[c] = inv;
    const T g = gamma.value[c], b = beta.value[c];
    for (std::size_t n = 0; n < N; ++n) {
      const T* x = in.plane(n, c);
      T* xh = xhat_.plane(n, c);
      T* o = out.plane(n, c);
      for (std::size_t p = 0; p < P; ++p) {
        xh[p] = (x[p] - mean) * inv;
        o[p] = g * xh[p] + b;
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> BatchNorm2d<T>::backward(const Tensor<T>& gout) {
  const std::size_t N = gout.dim(0), C = gout.dim(1), P = gout.dim(2) * gout.dim(3);
  const std::size_t M = N * P;
  Tensor<T> gin(gout.shape());
  for (std::size_t c = 0; c < C; ++c) {
    T sg = 0, sgx = 0;
    for (std::size_t n = 0; n < N; ++n) {
      sg += sum(gout.plane(n, c), P);
      sgx += dot(gout.plane(n, c), xhat_.plane(n, c), P);
    }
    gamma.grad[c] += sgx;
    beta.grad[c] += sg;
    const T g = gamma.value[c];
    const T inv = inv_std_[c];
    if (last_mode_ == Mode::Eval) {
      for (std::size_t n = 0; n < N; ++n) {
        const T* go = gout.plane(n, c);
        T* gi = gin.plane(n, c);
        for (std::size_t p = 0; p < P; ++p) gi[p] = go[p] * g * inv;
      }
      continue;
    }
    const T mg = sg / static_cast<T>(M);
    const T mgx = sgx / static_cast<T>(M);
    for (std::size_t n = 0; n < N; ++n) {
      const T* go = gout.plane(n, c);
      const T* xh = xhat_.plane(n, c);
      T* gi = gin.plane(n, c);
      for (std::size_t p = 0; p < P; ++p) gi[p] = g * inv * (go[p] - mg - xh[p] * mgx);
    }
  }
  return gin;
}

// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> linear(const Tensor<T>& in, const Tensor<T>& weight, const Tensor<T>& bias) {
  require(in.rank() == 2 && weight.rank() == 2 && weight.dim(1) == in.dim(1), "linear: shape mismatch");
  const std::size_t N = in.dim(0), F = in.dim(1), K = weight.dim(0);
  Tensor<T> out({N, K});
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t k = 0; k < K; ++k) out[n * K + k] = dot(weight.data() + k * F, in.data() + n * F, F) + bias[k];
  return out;
}

template <typename T>
Tensor<T> linear_backward(const Tensor<T>& in, const Tensor<T>& weight, const Tensor<T>& gout, Tensor<T>& gweight,
                          Tensor<T>& gbias) {
  const std::size_t N = in.dim(0), F = in.dim(1), K = weight.dim(0);
  Tensor<T> gin(in.shape());
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t k = 0; k < K; ++k) {
      const T g = gout[n * K + k];
      gbias[k] += g;
      T* gw = gweight.data() + k * F;
      const T* w = weight.data() + k * F;
      const T* x = in.data() + n * F;
      T* gi = gin.data() + n * F;
      for (std::size_t f = 0; f < F; ++f) {
        gw[f] += g * x[f];
        gi[f] += g * w[f];
      }
    }
  return gin;
}

// ---------------------------------------------------------------------------

template <typename T>
CrossEntropy<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const std::size_t> labels) {
  require(logits.rank() == 2 && labels.size() == logits.dim(0), "softmax_cross_entropy: shape mismatch");
  const std::size_t N = logits.dim(0), K = logits.dim(1);
  CrossEntropy<T> ce;
  ce.grad = Tensor<T>(logits.shape());
  ce.per_sample.resize(N);
  ce.predictions.resize(N);
  T total = 0;
  for (std::size_t n = 0; n < N; ++n) {
    require(labels[n] < K, "softmax_cross_entropy: label out of range");
    const T* z = logits.data() + n * K;
    const T zmax = *std::max_element(z, z + K);
    ce.predictions[n] = static_cast<std::size_t>(std::max_element(z, z + K) - z);
    T denom = 0;
    for (std::size_t k = 0; k < K; ++k) denom += std::exp(z[k] - zmax);
    const T log_denom = std::log(denom);
    const T loss = -(z[labels[n]] - zmax - log_denom);
    ce.per_sample[n] = loss;
    total += loss;
    for (std::size_t k = 0; k < K; ++k) {
      const T p = std::exp(z[k] - zmax - log_denom);
      ce.grad[n * K + k] = (p - (k == labels[n] ? T(1) : T(0))) / static_cast<T>(N);
    }
  }
  ce.loss = total / static_cast<T>(N);
  return ce;
}

template <typename T>
void add_inplace(Tensor<T>& a, const Tensor<T>& b) {
  require(a.size() == b.size(), "add_inplace: size mismatch");
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

// ---------------------------------------------------------------------------

#define NEUROLIP_INSTANTIATE(T)                                                                                   \
  template T dot<T>(const T*, const T*, std::size_t);                                                             \
  template T sum<T>(const T*, std::size_t);                                                                       \
  template void gemm_nn<T>(std::size_t, std::size_t, std::size_t, const T*, const T*, T*);                        \
  template void gemm_tn<T>(std::size_t, std::size_t, std::size_t, const T*, const T*, T*);                        \
  template void gemm_nt<T>(std::size_t, std::size_t, std::size_t, const T*, const T*, T*);                        \
  template struct Dense2<T>;                                                                                      \
  template void dense2_forward<T>(const Dense2<T>&, std::span<const T>, std::span<T>);                            \
  template void dense2_backward<T>(Dense2<T>&, std::span<const T>, std::span<const T>, std::span<T>);             \
  template Tensor<T> pointwise_conv2d<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>*);                   \
  template Tensor<T> pointwise_conv2d_backward<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,           \
                                                  Tensor<T>&, Tensor<T>*);                                        \
  template Tensor<T> conv2d<T>(const Tensor<T>&, const Tensor<T>&, const ConvGeometry&);                          \
  template Tensor<T> conv2d_backward<T>(const Tensor<T>&, const Tensor<T>&, const ConvGeometry&, const Tensor<T>&, \
                                        Tensor<T>&);                                                              \
  template Tensor<T> depthwise_hconv1d<T>(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> depthwise_hconv1d_backward<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,          \
                                                   Tensor<T>&);                                                   \
  template Tensor<T> conv1d_channels<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                    \
  template Tensor<T> conv1d_channels_backward<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,            \
                                                 Tensor<T>&, Tensor<T>&);                                         \
  template Tensor<T> gap2d<T>(const Tensor<T>&);                                                                  \
  template Tensor<T> gap2d_backward<T>(const Shape&, const Tensor<T>&);                                           \
  template Tensor<T> channel_scale<T>(const Tensor<T>&, const Tensor<T>&);                                        \
  template void channel_scale_backward<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, Tensor<T>&,       \
                                          Tensor<T>&);                                                            \
  template Tensor<T> relu<T>(const Tensor<T>&);                                                                   \
  template Tensor<T> relu_backward<T>(const Tensor<T>&, const Tensor<T>&);                                        \
  template Tensor<T> sigmoid<T>(const Tensor<T>&);                                                                \
  template Tensor<T> sigmoid_backward<T>(const Tensor<T>&, const Tensor<T>&);                                     \
  template class BatchNorm2d<T>;                                                                                  \
  template Tensor<T> linear<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> linear_backward<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, Tensor<T>&,         \
                                        Tensor<T>&);                                                              \
  template CrossEntropy<T> softmax_cross_entropy<T>(const Tensor<T>&, std::span<const std::size_t>);              \
  template void add_inplace<T>(Tensor<T>&, const Tensor<T>&);

NEUROLIP_INSTANTIATE(float)
NEUROLIP_INSTANTIATE(double)

#undef NEUROLIP_INSTANTIATE

}  // namespace neurolip::kernels
