#pragma once

#include <span>
#include <vector>

#include "neurolip/backbone.hpp"
#include "neurolip/encoder.hpp"
#include "neurolip/enhancer.hpp"
#include "neurolip/regularizer.hpp"

namespace neurolip {

struct ModelConfig {
  TveConfig tve;
  EnhancerConfig enhancer;
  PcrConfig pcr;
  std::size_t num_classes = 10;
  std::vector<std::size_t> backbone_depth{1, 1, 1, 1};
  std::size_t base_width = 16;

  BackboneConfig backbone() const { return {enhancer.channels, num_classes, backbone_depth, base_width}; }
  void validate() const;
};

/// l_total = l_ce + lambda * l_pcr
template <typename T>
T total_loss(T l_ce, T l_pcr, T lambda) {
  return l_ce + lambda * l_pcr;
}

template <typename T>
struct StepOutput {
  Tensor<T> logits;
  kernels::CrossEntropy<T> ce;
  PcrLoss<T> pcr;
  T l_total = 0;
};

/// Full pipeline: encoder -> enhancer -> backbone, with the polarity
/// reconstruction head on the side. forward() caches what backward() needs,
/// so the two must be called in pairs.
template <typename T>
class Model {
 public:
  explicit Model(ModelConfig cfg);

  /// Deterministic parameter initialization from a seed.
  void init(std::uint64_t seed);

  StepOutput<T> forward(std::span<const EventStream* const> streams, std::span<const std::size_t> labels,
                        kernels::Mode mode);

  /// Accumulates grads for the last forward. With lambda == 0 the
  /// regularizer branch is skipped entirely and its head receives no gradient.
  void backward(const StepOutput<T>& out, double lambda);

  /// Parameters and buffers in a fixed order. The PCR head can be left out,
  /// which is how a frozen head is expressed to the optimizer.
  StateRefs<T> state(bool include_pcr_head = true);

  const ModelConfig& config() const noexcept { return cfg_; }
  Encoder<T>& encoder() noexcept { return encoder_; }
  Enhancer<T>& enhancer() noexcept { return enhancer_; }
  PcrHead<T>& pcr_head() noexcept { return pcr_head_; }
  Backbone<T>& backbone() noexcept { return backbone_; }

  const Tensor<T>& last_v_att() const noexcept { return v_att_; }
  const Tensor<T>& last_v_enh() const noexcept { return v_enh_; }
  const Tensor<T>& last_reconstruction() const noexcept { return recon_; }
  const Tensor<T>& last_reference() const noexcept { return reference_; }

 private:
  ModelConfig cfg_;
  Encoder<T> encoder_;
  Enhancer<T> enhancer_;
  PcrHead<T> pcr_head_;
  Backbone<T> backbone_;

  std::vector<EncodeTrace<T>> traces_;
  Tensor<T> v_att_;
  Tensor<T> v_enh_;
  Tensor<T> recon_;
  Tensor<T> reference_;
};

}  // namespace neurolip
