#pragma once

// Polarity consistency regularization: a small reconstruction head maps the
// enhanced features back to a 2-channel polarity map R, which is compared to
// the per-polarity temporal average of the voxel grid after both are
// normalized to unit spatial mass. Channel 0 is negative polarity, 1 positive.

#include "neurolip/kernels.hpp"

namespace neurolip {

struct PcrConfig {
  std::size_t mid_channels = 0;  // 0 means 2 * C
  double lambda = 0.05;

  void validate() const;
};

template <typename T>
class PcrHead {
 public:
  PcrHead(std::size_t in_channels, const PcrConfig& cfg);

  void init(Rng& rng);
  void collect(StateRefs<T>& refs);

  /// N x C x H x W -> N x 2 x H x W
  Tensor<T> forward(const Tensor<T>& v_enh);
  Tensor<T> backward(const Tensor<T>& grecon);

  Parameter<T> conv_a_weight;  // Cmid x C
  Parameter<T> conv_a_bias;
  Parameter<T> conv_b_weight;  // 2 x Cmid
  Parameter<T> conv_b_bias;

 private:
  Tensor<T> in_;
  Tensor<T> hidden_;  // post-ReLU
};

/// R_ref[n, a, y, x] = mean over the B bins of V_att[n, a*B + b, y, x].
template <typename T>
Tensor<T> reference_map(const Tensor<T>& v_att, std::size_t bins);

template <typename T>
Tensor<T> reference_map_backward(const Tensor<T>& gref, std::size_t bins);

/// Clamps negatives to zero and divides each (sample, polarity) plane by its
/// sum; planes with mass below 1e-8 become uniform 1/(HW).
template <typename T>
Tensor<T> normalize_polarity(const Tensor<T>& map);

inline constexpr double kPcrMassEpsilon = 1e-8;

template <typename T>
struct PcrLoss {
  T loss = 0;                 // batch mean of l_pcr
  std::vector<T> per_sample;
  Tensor<T> grad_recon;       // d(loss)/dR
  Tensor<T> grad_reference;   // d(loss)/dR_ref
};

/// l_pcr = 1/(2HW) * sum |norm(R) - norm(R_ref)|, averaged over the batch.
template <typename T>
PcrLoss<T> pcr_loss(const Tensor<T>& recon, const Tensor<T>& reference);

}  // namespace neurolip
