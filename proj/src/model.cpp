#include "neurolip/model.hpp"

#include <algorithm>

namespace neurolip {

void ModelConfig::validate() const {
  tve.validate();
  enhancer.validate();
  pcr.validate();
  backbone().validate();
}

template <typename T>
Model<T>::Model(ModelConfig cfg)
    : cfg_((cfg.validate(), std::move(cfg))),
      encoder_(cfg_.tve),
      enhancer_(2 * cfg_.tve.bins, cfg_.enhancer),
      pcr_head_(cfg_.enhancer.channels, cfg_.pcr),
      backbone_(cfg_.backbone()) {}

template <typename T>
void Model<T>::init(std::uint64_t seed) {
  // Each component draws from its own stream so changing one sub-config does
  // not reshuffle the others.
  Rng enc(derive_seed(seed, {1})), enh(derive_seed(seed, {2})), pcr(derive_seed(seed, {3})),
      bb(derive_seed(seed, {4}));
  encoder_.params().init(enc);
  enhancer_.init(enh);
  pcr_head_.init(pcr);
  backbone_.init(bb);
}

template <typename T>
StepOutput<T> Model<T>::forward(std::span<const EventStream* const> streams, std::span<const std::size_t> labels,
                                kernels::Mode mode) {
  const std::size_t N = streams.size();
  if (N == 0) throw Error("model forward needs at least one sample");
  const std::size_t C2 = 2 * cfg_.tve.bins, H = cfg_.tve.voxel_height(), W = cfg_.tve.voxel_width();
  const std::size_t plane = C2 * H * W;

  traces_.clear();
  traces_.reserve(N);
  v_att_ = Tensor<T>({N, C2, H, W});
  for (std::size_t n = 0; n < N; ++n) {
    traces_.push_back(encoder_.forward(*streams[n]));
    const auto& v = traces_.back().v_att();
    std::copy_n(v.data(), plane, v_att_.data() + n * plane);
  }

  v_enh_ = enhancer_.forward(v_att_, mode);

  StepOutput<T> out;
  out.logits = backbone_.forward(v_enh_, mode);
  out.ce = kernels::softmax_cross_entropy(out.logits, labels);

  recon_ = pcr_head_.forward(v_enh_);
  reference_ = reference_map(v_att_, cfg_.tve.bins);
  out.pcr = pcr_loss(recon_, reference_);
  out.l_total = total_loss(out.ce.loss, out.pcr.loss, static_cast<T>(cfg_.pcr.lambda));
  return out;
}

template <typename T>
void Model<T>::backward(const StepOutput<T>& out, double lambda) {
  const std::size_t N = traces_.size();
  Tensor<T> genh = backbone_.backward(out.ce.grad);
  Tensor<T> gref_att;
  if (lambda != 0.0) {
    const T lam = static_cast<T>(lambda);
    Tensor<T> grecon = out.pcr.grad_recon;
    for (auto& v : grecon.vec()) v *= lam;
    kernels::add_inplace(genh, pcr_head_.backward(grecon));
    Tensor<T> gref = out.pcr.grad_reference;
    for (auto& v : gref.vec()) v *= lam;
    gref_att = reference_map_backward(gref, cfg_.tve.bins);
  }
  Tensor<T> gatt = enhancer_.backward(genh);
  if (!gref_att.empty()) kernels::add_inplace(gatt, gref_att);

  const std::size_t plane = gatt.size() / N;
  Tensor<T> g({1, gatt.dim(1), gatt.dim(2), gatt.dim(3)});
  for (std::size_t n = 0; n < N; ++n) {
    std::copy_n(gatt.data() + n * plane, plane, g.data());
    encoder_.backward(traces_[n], g);
  }
}

template <typename T>
StateRefs<T> Model<T>::state(bool include_pcr_head) {
  StateRefs<T> refs;
  encoder_.params().collect(refs);
  enhancer_.collect(refs);
  if (include_pcr_head) pcr_head_.collect(refs);
  backbone_.collect(refs);
  return refs;
}

template class Model<float>;
template class Model<double>;

}  // namespace neurolip
