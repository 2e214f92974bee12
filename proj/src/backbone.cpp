#include "neurolip/backbone.hpp"

namespace neurolip {

using kernels::Mode;

namespace {

std::size_t feature_width(const BackboneConfig& cfg) {
  cfg.validate();
  return cfg.base_width << (cfg.depth.size() - 1);
}

}  // namespace

void BackboneConfig::validate() const {
  if (in_channels < 1 || num_classes < 1 || base_width < 1) throw ConfigError("backbone sizes must be >= 1");
  if (depth.empty()) throw ConfigError("backbone depth needs at least one stage");
  for (auto d : depth)
    if (d < 1) throw ConfigError("every backbone stage needs at least one block");
}

template <typename T>
Conv2dLayer<T>::Conv2dLayer(const std::string& name, std::size_t in_channels, std::size_t out_channels,
                            kernels::ConvGeometry g)
    : weight(name + ".weight", {out_channels, in_channels, g.kernel, g.kernel}), geometry(g) {}

template <typename T>
void Conv2dLayer<T>::init(Rng& rng) {
  init_uniform_fan_in(weight.value, weight.value.dim(1) * geometry.kernel * geometry.kernel, rng);
}

template <typename T>
Tensor<T> Conv2dLayer<T>::forward(const Tensor<T>& in) {
  in_ = in;
  return kernels::conv2d(in, weight.value, geometry);
}

template <typename T>
Tensor<T> Conv2dLayer<T>::backward(const Tensor<T>& gout) {
  return kernels::conv2d_backward(in_, weight.value, geometry, gout, weight.grad);
}

template <typename T>
BasicBlock<T>::BasicBlock(const std::string& name, std::size_t in_channels, std::size_t out_channels,
                          std::size_t stride)
    : conv1_(name + ".conv1", in_channels, out_channels, {3, stride, 1}),
      bn1_(name + ".bn1", out_channels),
      conv2_(name + ".conv2", out_channels, out_channels, {3, 1, 1}),
      bn2_(name + ".bn2", out_channels) {
  if (stride != 1 || in_channels != out_channels) {
    down_conv_ = std::make_unique<Conv2dLayer<T>>(name + ".down", in_channels, out_channels,
                                                  kernels::ConvGeometry{1, stride, 0});
    down_bn_ = std::make_unique<kernels::BatchNorm2d<T>>(name + ".down_bn", out_channels);
  }
}

template <typename T>
void BasicBlock<T>::init(Rng& rng) {
  conv1_.init(rng);
  conv2_.init(rng);
  if (down_conv_) down_conv_->init(rng);
}

template <typename T>
void BasicBlock<T>::collect(StateRefs<T>& refs) {
  refs.params.push_back(&conv1_.weight);
  bn1_.collect(refs);
  refs.params.push_back(&conv2_.weight);
  bn2_.collect(refs);
  if (down_conv_) {
    refs.params.push_back(&down_conv_->weight);
    down_bn_->collect(refs);
  }
}

template <typename T>
Tensor<T> BasicBlock<T>::forward(const Tensor<T>& in, Mode mode) {
  mid_ = kernels::relu(bn1_.forward(conv1_.forward(in), mode));
  Tensor<T> out = bn2_.forward(conv2_.forward(mid_), mode);
  if (down_conv_)
    kernels::add_inplace(out, down_bn_->forward(down_conv_->forward(in), mode));
  else
    kernels::add_inplace(out, in);
  out_ = kernels::relu(out);
  return out_;
}

template <typename T>
Tensor<T> BasicBlock<T>::backward(const Tensor<T>& gout) {
  const Tensor<T> gsum = kernels::relu_backward(out_, gout);
  const Tensor<T> gmid = conv2_.backward(bn2_.backward(gsum));
  Tensor<T> gin = conv1_.backward(bn1_.backward(kernels::relu_backward(mid_, gmid)));
  if (down_conv_)
    kernels::add_inplace(gin, down_conv_->backward(down_bn_->backward(gsum)));
  else
    kernels::add_inplace(gin, gsum);
  return gin;
}

template <typename T>
Backbone<T>::Backbone(BackboneConfig cfg)
    : fc_weight("backbone.fc.weight", {cfg.num_classes, feature_width(cfg)}),
      fc_bias("backbone.fc.bias", {cfg.num_classes}),
      cfg_(std::move(cfg)),
      stem_conv_("backbone.stem.conv", cfg_.in_channels, cfg_.base_width, {3, 1, 1}),
      stem_bn_("backbone.stem.bn", cfg_.base_width) {
  std::size_t channels = cfg_.base_width;
  for (std::size_t s = 0; s < cfg_.depth.size(); ++s) {
    const std::size_t width = cfg_.base_width << s;
    for (std::size_t b = 0; b < cfg_.depth[s]; ++b) {
      const std::size_t stride = (s > 0 && b == 0) ? 2 : 1;
      blocks_.push_back(std::make_unique<BasicBlock<T>>(
          "backbone.stage" + std::to_string(s) + ".block" + std::to_string(b), channels, width, stride));
      channels = width;
    }
  }
}

template <typename T>
void Backbone<T>::init(Rng& rng) {
  stem_conv_.init(rng);
  for (auto& b : blocks_) b->init(rng);
  init_uniform_fan_in(fc_weight.value, fc_weight.value.dim(1), rng);
  fc_bias.value.zero();
}

template <typename T>
void Backbone<T>::collect(StateRefs<T>& refs) {
  refs.params.push_back(&stem_conv_.weight);
  stem_bn_.collect(refs);
  for (auto& b : blocks_) b->collect(refs);
  refs.params.push_back(&fc_weight);
  refs.params.push_back(&fc_bias);
}

template <typename T>
Tensor<T> Backbone<T>::forward(const Tensor<T>& in, Mode mode) {
  stem_out_ = kernels::relu(stem_bn_.forward(stem_conv_.forward(in), mode));
  Tensor<T> x = stem_out_;
  for (auto& b : blocks_) x = b->forward(x, mode);
  features_ = std::move(x);
  pooled_ = kernels::gap2d(features_);
  return kernels::linear(pooled_, fc_weight.value, fc_bias.value);
}

template <typename T>
Tensor<T> Backbone<T>::backward(const Tensor<T>& glogits) {
  const Tensor<T> gpooled = kernels::linear_backward(pooled_, fc_weight.value, glogits, fc_weight.grad, fc_bias.grad);
  Tensor<T> g = kernels::gap2d_backward(features_.shape(), gpooled);
  for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) g = (*it)->backward(g);
  return stem_conv_.backward(stem_bn_.backward(kernels::relu_backward(stem_out_, g)));
}

template class Conv2dLayer<float>;
template class Conv2dLayer<double>;
template class BasicBlock<float>;
template class BasicBlock<double>;
template class Backbone<float>;
template class Backbone<double>;

}  // namespace neurolip
