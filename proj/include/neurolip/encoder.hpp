#pragma once

// Temporal-aware voxel encoding: learnable temporal allocation (LTA),
// polarity-split accumulation, local spatial aggregation (LSA) and temporal
// channel reweighting (TCR).
//
// Voxel channel layout: [0, B) negative polarity, [B, 2B) positive polarity,
// bin-major within each half.

#include <cstdint>
#include <span>
#include <vector>

#include "neurolip/events.hpp"
#include "neurolip/kernels.hpp"
#include "neurolip/tensor.hpp"

namespace neurolip {

enum class LtaMode {
  Learned,  // MLP(s * dt, bin feature)
  Oracle,   // fixed indicator kernel: classic hard binning
};

struct TveConfig {
  std::size_t bins = 16;
  /// Geometry of the incoming streams, before downscaling.
  SensorGeometry sensor = kDvSpeakerGeometry;
  /// Coordinate divisor applied before voxelization (1 = full resolution).
  std::uint32_t downscale = 4;
  std::size_t tcr_kernel = 1;
  std::size_t mlp_hidden = 32;
  LtaMode lta = LtaMode::Learned;

  std::size_t voxel_width() const { return (sensor.width + downscale - 1) / downscale; }
  std::size_t voxel_height() const { return (sensor.height + downscale - 1) / downscale; }
  void validate() const;
};

template <typename T>
struct TveParams {
  Parameter<T> scale;  // s
  kernels::Dense2<T> mlp;
  Parameter<T> tcr_kernel;
  Parameter<T> tcr_bias;

  explicit TveParams(const TveConfig& cfg);
  void init(Rng& rng);
  void collect(StateRefs<T>& refs);
};

/// dt[i, b] = t_norm[i] - b / B for zero-based b. Returns N x B.
template <typename T>
Tensor<T> temporal_offsets(std::span<const double> t_norm, std::size_t bins);

/// Normalized bin index fed to the MLP: b / (B - 1), or 0 when B == 1.
double bin_feature(std::size_t b, std::size_t bins);

/// w[i, b] = MLP(s * dt[i, b], bin_feature(b)). Returns N x B.
template <typename T>
Tensor<T> lta_weights(const Tensor<T>& offsets, const TveParams<T>& params);

/// Accumulates d(loss)/d(s) and MLP grads given d(loss)/dw.
template <typename T>
void lta_weights_backward(const Tensor<T>& offsets, TveParams<T>& params, const Tensor<T>& gweights);

/// Indicator kernel: weight 1 for the bin containing t_norm, last bin closed
/// on the right. Returns N x B.
template <typename T>
Tensor<T> oracle_weights(std::span<const double> t_norm, std::size_t bins);

/// Scatters per-event bin weights into a 1 x 2B x H x W grid.
template <typename T>
Tensor<T> accumulate(std::span<const Event> events, const Tensor<T>& weights, std::size_t bins,
                     std::size_t height, std::size_t width);

/// Gathers d(loss)/dV back onto the N x B weight matrix.
template <typename T>
Tensor<T> accumulate_backward(std::span<const Event> events, const Tensor<T>& gvoxel, std::size_t bins);

/// out[c,y,x] = in[c,y,x] + in[c,y+1,x] + in[c,y,x+1], neighbours outside the
/// grid count as zero. Reads only the input (no cascading).
template <typename T>
Tensor<T> lsa(const Tensor<T>& in);
template <typename T>
Tensor<T> lsa_backward(const Tensor<T>& gout);

/// Sigmoid-gated channel attention shared by TCR and the enhancer:
/// a = sigmoid(conv1d(gap(V))), out = V * a.
template <typename T>
struct ChannelGate {
  Tensor<T> input;
  Tensor<T> pooled;
  Tensor<T> gate;  // N x C, in (0, 1)
  Tensor<T> output;
};

template <typename T>
ChannelGate<T> channel_gate_forward(const Tensor<T>& in, const Parameter<T>& kernel, const Parameter<T>& bias);

template <typename T>
Tensor<T> channel_gate_backward(const ChannelGate<T>& cache, Parameter<T>& kernel, Parameter<T>& bias,
                                const Tensor<T>& gout);

template <typename T>
struct EncodeTrace {
  std::vector<Event> events;  // after downscaling
  std::vector<double> t_norm;
  Tensor<T> offsets;  // N x B
  Tensor<T> weights;  // N x B
  Tensor<T> voxel;    // pre-LSA, 1 x 2B x H x W
  ChannelGate<T> tcr; // tcr.input is the post-LSA grid, tcr.output is V_att

  const Tensor<T>& v_att() const { return tcr.output; }
};

template <typename T>
class Encoder {
 public:
  explicit Encoder(TveConfig cfg) : cfg_(cfg), params_(cfg) {}

  const TveConfig& config() const noexcept { return cfg_; }
  TveParams<T>& params() noexcept { return params_; }
  const TveParams<T>& params() const noexcept { return params_; }

  /// Stream geometry must equal cfg.sensor. Empty streams encode to zeros.
  EncodeTrace<T> forward(const EventStream& stream) const;

  /// Accumulates parameter gradients given d(loss)/dV_att.
  void backward(const EncodeTrace<T>& trace, const Tensor<T>& gv_att);

 private:
  TveConfig cfg_;
  TveParams<T> params_;
};

}  // namespace neurolip
