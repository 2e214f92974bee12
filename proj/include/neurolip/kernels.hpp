#pragma once

// Forward/backward primitives. Every backward *accumulates* into parameter
// gradients and returns (or accumulates into) the input gradient. Reductions
// run in a fixed order so results are reproducible bit for bit.

#include <cstddef>
#include <span>
#include <vector>

#include "neurolip/tensor.hpp"

namespace neurolip::kernels {

// ---------------------------------------------------------------------------
// Two-layer perceptron 2 -> hidden (ReLU) -> 1, applied row-wise to M x 2 input.

template <typename T>
struct Dense2 {
  Parameter<T> w1;  // hidden x 2
  Parameter<T> b1;  // hidden
  Parameter<T> w2;  // hidden (single output row)
  Parameter<T> b2;  // 1

  explicit Dense2(const std::string& prefix = "mlp", std::size_t hidden = 32)
      : w1(prefix + ".w1", {hidden, 2}), b1(prefix + ".b1", {hidden}), w2(prefix + ".w2", {hidden}), b2(prefix + ".b2", {1}) {}

  std::size_t hidden() const noexcept { return b1.value.size(); }
  void init(Rng& rng);
  void collect(StateRefs<T>& refs) { refs.params.insert(refs.params.end(), {&w1, &b1, &w2, &b2}); }
};

/// in: M x 2 (row-major), out: M.
template <typename T>
void dense2_forward(const Dense2<T>& p, std::span<const T> in, std::span<T> out);

/// Recomputes the hidden layer. gin may be empty when the input gradient is not needed.
template <typename T>
void dense2_backward(Dense2<T>& p, std::span<const T> in, std::span<const T> gout, std::span<T> gin);

// ---------------------------------------------------------------------------
// Dense GEMM helpers (row-major, accumulate into C).

/// C[M x P] += A[M x K] * B[K x P]
template <typename T>
void gemm_nn(std::size_t M, std::size_t K, std::size_t P, const T* A, const T* B, T* C);
/// C[K x P] += A[M x K]^T * G[M x P]
template <typename T>
void gemm_tn(std::size_t M, std::size_t K, std::size_t P, const T* A, const T* G, T* C);
/// C[M x K] += G[M x P] * B[K x P]^T
template <typename T>
void gemm_nt(std::size_t M, std::size_t K, std::size_t P, const T* G, const T* B, T* C);

template <typename T>
T dot(const T* a, const T* b, std::size_t n);
template <typename T>
T sum(const T* a, std::size_t n);

// ---------------------------------------------------------------------------
// 1x1 convolution: in N x Cin x H x W, weight Cout x Cin, bias Cout.

template <typename T>
Tensor<T> pointwise_conv2d(const Tensor<T>& in, const Tensor<T>& weight, const Tensor<T>* bias);

template <typename T>
Tensor<T> pointwise_conv2d_backward(const Tensor<T>& in, const Tensor<T>& weight, const Tensor<T>& gout,
                                    Tensor<T>& gweight, Tensor<T>* gbias);

// ---------------------------------------------------------------------------
// General k x k convolution with stride and zero padding, no bias.
// in N x Cin x H x W, weight Cout x Cin x k x k.

struct ConvGeometry {
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t pad = 1;
  std::size_t out_extent(std::size_t in) const { return (in + 2 * pad - kernel) / stride + 1; }
};

template <typename T>
Tensor<T> conv2d(const Tensor<T>& in, const Tensor<T>& weight, const ConvGeometry& g);

template <typename T>
Tensor<T> conv2d_backward(const Tensor<T>& in, const Tensor<T>& weight, const ConvGeometry& g,
                          const Tensor<T>& gout, Tensor<T>& gweight);

// ---------------------------------------------------------------------------
// Depthwise horizontal 1-D convolution, kernel width 3, zero pad 1.
// out[c,y,x] = k0*in[c,y,x-1] + k1*in[c,y,x] + k2*in[c,y,x+1]

template <typename T>
Tensor<T> depthwise_hconv1d(const Tensor<T>& in, const Tensor<T>& kernels);

template <typename T>
Tensor<T> depthwise_hconv1d_backward(const Tensor<T>& in, const Tensor<T>& kernels, const Tensor<T>& gout,
                                     Tensor<T>& gkernels);

// ---------------------------------------------------------------------------
// Single-channel 1-D convolution along a descriptor axis (odd kernel, length
// preserving zero pad). in N x L, kernel k, bias 1.

template <typename T>
Tensor<T> conv1d_channels(const Tensor<T>& in, const Tensor<T>& kernel, const Tensor<T>& bias);

template <typename T>
Tensor<T> conv1d_channels_backward(const Tensor<T>& in, const Tensor<T>& kernel, const Tensor<T>& gout,
                                   Tensor<T>& gkernel, Tensor<T>& gbias);

// ---------------------------------------------------------------------------
// Global average pooling N x C x H x W -> N x C.

template <typename T>
Tensor<T> gap2d(const Tensor<T>& in);

template <typename T>
Tensor<T> gap2d_backward(const Shape& in_shape, const Tensor<T>& gout);

// ---------------------------------------------------------------------------
// Channel-wise scaling out[n,c,:,:] = in[n,c,:,:] * scale[n,c].

template <typename T>
Tensor<T> channel_scale(const Tensor<T>& in, const Tensor<T>& scale);

/// gin (overwritten) and gscale (overwritten).
template <typename T>
void channel_scale_backward(const Tensor<T>& in, const Tensor<T>& scale, const Tensor<T>& gout, Tensor<T>& gin,
                            Tensor<T>& gscale);

// ---------------------------------------------------------------------------
// Elementwise activations; backward takes the forward output.

template <typename T>
Tensor<T> relu(const Tensor<T>& in);
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& out, const Tensor<T>& gout);
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& in);
template <typename T>
Tensor<T> sigmoid_backward(const Tensor<T>& out, const Tensor<T>& gout);

// ---------------------------------------------------------------------------
// Batch normalization over N x H x W per channel.

enum class Mode { Train, Eval };

template <typename T>
class BatchNorm2d {
 public:
  BatchNorm2d(const std::string& prefix, std::size_t channels, double momentum = 0.1, double eps = 1e-5);

  Tensor<T> forward(const Tensor<T>& in, Mode mode);
  Tensor<T> backward(const Tensor<T>& gout);

  void collect(StateRefs<T>& refs);

  Parameter<T> gamma;
  Parameter<T> beta;
  Tensor<T> running_mean;
  Tensor<T> running_var;

 private:
  std::string prefix_;
  double momentum_;
  double eps_;
  Mode last_mode_ = Mode::Eval;
  Tensor<T> xhat_;
  std::vector<T> inv_std_;
};

// ---------------------------------------------------------------------------
// Fully connected: in N x F, weight K x F, bias K -> N x K.

template <typename T>
Tensor<T> linear(const Tensor<T>& in, const Tensor<T>& weight, const Tensor<T>& bias);
template <typename T>
Tensor<T> linear_backward(const Tensor<T>& in, const Tensor<T>& weight, const Tensor<T>& gout, Tensor<T>& gweight,
                          Tensor<T>& gbias);

// ---------------------------------------------------------------------------
// Softmax cross-entropy, averaged over the batch. logits N x K.

template <typename T>
struct CrossEntropy {
  T loss = 0;                   // batch mean
  std::vector<T> per_sample;    // N
  Tensor<T> grad;               // d(mean loss)/d logits
  std::vector<std::size_t> predictions;
};

template <typename T>
CrossEntropy<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const std::size_t> labels);

// ---------------------------------------------------------------------------
// Elementwise helpers.

template <typename T>
void add_inplace(Tensor<T>& a, const Tensor<T>& b);

}  // namespace neurolip::kernels
