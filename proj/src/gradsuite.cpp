#include "neurolip/gradsuite.hpp"

#include "neurolip/backbone.hpp"
#include "neurolip/encoder.hpp"
#include "neurolip/kernels.hpp"
#include "neurolip/model.hpp"
#include "neurolip/rng.hpp"

namespace neurolip {

namespace {

using P = Parameter<double>;
using Params = std::vector<P*>;
namespace k = kernels;

void randomize(Tensor<double>& t, Rng& rng, double lo = -1.0, double hi = 1.0) {
  for (auto& v : t.vec()) v = lo + (hi - lo) * uniform01(rng);
}

Tensor<double> random_tensor(const Shape& shape, Rng& rng) {
  Tensor<double> t(shape);
  randomize(t, rng);
  return t;
}

double weighted(const Tensor<double>& out, const Tensor<double>& r) { return k::dot(out.data(), r.data(), out.size()); }

GradCase run(std::string name, const Params& params, const std::function<double()>& loss,
             const std::function<void()>& backward, const GradCheckOptions& opts) {
  auto refill = [&] {
    for (P* p : params) p->zero_grad();
    backward();
  };
  return {std::move(name), grad_check(params, loss, refill, opts)};
}

GradCase pointwise_case(const GradCheckOptions& opts, double corrupt) {
  Rng rng(derive_seed(11, {1}));
  P in("input", {2, 3, 4, 5}), w("weight", {4, 3}), b("bias", {4});
  randomize(in.value, rng);
  randomize(w.value, rng);
  randomize(b.value, rng);
  const auto r = random_tensor({2, 4, 4, 5}, rng);
  return run(
      "pointwise_conv2d", {&in, &w, &b}, [&] { return weighted(k::pointwise_conv2d(in.value, w.value, &b.value), r); },
      [&] {
        in.grad = k::pointwise_conv2d_backward(in.value, w.value, r, w.grad, &b.grad);
        for (auto& g : w.grad.vec()) g *= corrupt;
      },
      opts);
}

}  // namespace

std::vector<GradCase> gradient_suite(const GradCheckOptions& opts) {
  std::vector<GradCase> cases;

  {
    Rng rng(derive_seed(11, {0}));
    k::Dense2<double> mlp("mlp", 5);
    mlp.init(rng);
    P x("input", {6, 2});
    randomize(x.value, rng);
    const auto r = random_tensor({6}, rng);
    Params params{&x, &mlp.w1, &mlp.b1, &mlp.w2, &mlp.b2};
    cases.push_back(run(
        "dense2", params,
        [&] {
          std::vector<double> out(6);
          k::dense2_forward<double>(mlp, x.value.span(), out);
          return k::dot(out.data(), r.data(), out.size());
        },
        [&] { k::dense2_backward<double>(mlp, x.value.span(), r.span(), x.grad.span()); }, opts));
  }

  cases.push_back(pointwise_case(opts, 1.0));

  for (std::size_t stride : {1, 2}) {
    Rng rng(derive_seed(11, {2, stride}));
    const k::ConvGeometry g{3, stride, 1};
    P in("input", {2, 3, 5, 6}), w("weight", {4, 3, 3, 3});
    randomize(in.value, rng);
    randomize(w.value, rng);
    const auto r = random_tensor({2, 4, g.out_extent(5), g.out_extent(6)}, rng);
    cases.push_back(run(
        "conv2d_3x3_stride" + std::to_string(stride), {&in, &w},
        [&] { return weighted(k::conv2d(in.value, w.value, g), r); },
        [&] { in.grad = k::conv2d_backward(in.value, w.value, g, r, w.grad); }, opts));
  }

  {
    Rng rng(derive_seed(11, {3}));
    P in("input", {2, 3, 4, 5}), kern("kernels", {3, 3});
    randomize(in.value, rng);
    randomize(kern.value, rng);
    const auto r = random_tensor({2, 3, 4, 5}, rng);
    cases.push_back(run(
        "depthwise_hconv1d", {&in, &kern}, [&] { return weighted(k::depthwise_hconv1d(in.value, kern.value), r); },
        [&] { in.grad = k::depthwise_hconv1d_backward(in.value, kern.value, r, kern.grad); }, opts));
  }

  {
    Rng rng(derive_seed(11, {4}));
    P in("input", {2, 7}), kern("kernel", {3}), bias("bias", {1});
    randomize(in.value, rng);
    randomize(kern.value, rng);
    randomize(bias.value, rng);
    const auto r = random_tensor({2, 7}, rng);
    cases.push_back(run(
        "conv1d_channels", {&in, &kern, &bias},
        [&] { return weighted(k::conv1d_channels(in.value, kern.value, bias.value), r); },
        [&] { in.grad = k::conv1d_channels_backward(in.value, kern.value, r, kern.grad, bias.grad); }, opts));
  }

  {
    Rng rng(derive_seed(11, {5}));
    k::BatchNorm2d<double> bn("bn", 3);
    randomize(bn.gamma.value, rng, 0.5, 1.5);
    randomize(bn.beta.value, rng);
    P in("input", {4, 3, 3, 3});
    randomize(in.value, rng, -2.0, 2.0);
    const auto r = random_tensor({4, 3, 3, 3}, rng);
    cases.push_back(run(
        "batchnorm_train", {&in, &bn.gamma, &bn.beta},
        [&] { return weighted(bn.forward(in.value, k::Mode::Train), r); },
        [&] {
          bn.forward(in.value, k::Mode::Train);
          in.grad = bn.backward(r);
        },
        opts));
  }

  {
    Rng rng(derive_seed(11, {6}));
    P in("input", {2, 5, 3, 4});
    randomize(in.value, rng);
    const auto r = random_tensor({2, 5}, rng);
    cases.push_back(run(
        "relu_gap_sigmoid", {&in},
        [&] { return weighted(k::sigmoid(k::gap2d(k::relu(in.value))), r); },
        [&] {
          const auto z = k::relu(in.value);
          const auto s = k::sigmoid(k::gap2d(z));
          in.grad = k::relu_backward(z, k::gap2d_backward(z.shape(), k::sigmoid_backward(s, r)));
        },
        opts));
  }

  {
    Rng rng(derive_seed(11, {7}));
    P in("input", {2, 6, 3, 4}), kern("gate.kernel", {3}), bias("gate.bias", {1});
    randomize(in.value, rng);
    randomize(kern.value, rng);
    randomize(bias.value, rng);
    const auto r = random_tensor({2, 6, 3, 4}, rng);
    cases.push_back(run(
        "channel_gate", {&in, &kern, &bias},
        [&] { return weighted(channel_gate_forward(in.value, kern, bias).output, r); },
        [&] { in.grad = channel_gate_backward(channel_gate_forward(in.value, kern, bias), kern, bias, r); }, opts));
  }

  {
    Rng rng(derive_seed(11, {8}));
    P x("input", {3, 5}), w("fc.weight", {4, 5}), b("fc.bias", {4});
    randomize(x.value, rng);
    randomize(w.value, rng);
    randomize(b.value, rng);
    const std::vector<std::size_t> labels{0, 2, 3};
    cases.push_back(run(
        "linear_cross_entropy", {&x, &w, &b},
        [&] { return k::softmax_cross_entropy(k::linear(x.value, w.value, b.value), labels).loss; },
        [&] {
          const auto ce = k::softmax_cross_entropy(k::linear(x.value, w.value, b.value), labels);
          x.grad = k::linear_backward(x.value, w.value, ce.grad, w.grad, b.grad);
        },
        opts));
  }

  {
    Rng rng(derive_seed(11, {9}));
    Backbone<double> bb(BackboneConfig{2, 3, {1}, 4});
    bb.init(rng);
    P in("input", {2, 2, 4, 4});
    randomize(in.value, rng);
    StateRefs<double> refs;
    bb.collect(refs);
    Params params = refs.params;
    params.push_back(&in);
    const std::vector<std::size_t> labels{1, 2};
    cases.push_back(run(
        "backbone_tiny", params,
        [&] { return k::softmax_cross_entropy(bb.forward(in.value, k::Mode::Train), labels).loss; },
        [&] {
          const auto ce = k::softmax_cross_entropy(bb.forward(in.value, k::Mode::Train), labels);
          in.grad = bb.backward(ce.grad);
        },
        opts));
  }

  {
    ModelConfig mc;
    mc.tve.bins = 2;
    mc.tve.sensor = {4, 4};
    mc.tve.downscale = 1;
    mc.tve.tcr_kernel = 3;
    mc.tve.mlp_hidden = 6;
    mc.enhancer.channels = 3;
    mc.enhancer.att_kernel = 3;
    mc.num_classes = 3;
    mc.backbone_depth = {1};
    mc.base_width = 4;
    mc.pcr.lambda = 0.5;
    Model<double> model(mc);
    model.init(13);
    // Zero-initialized biases put exact zeros on ReLU and clamp hinges for
    // such a sparse input; check at a generic point instead.
    Rng jitter(derive_seed(11, {10}));
    for (P* p : model.state().params)
      for (auto& v : p->value.vec()) v += 0.05 * (2.0 * uniform01(jitter) - 1.0);
    const EventStream stream({{0, 0, 1, 1}, {120, 1, 1, -1}, {400, 2, 2, 1}, {650, 3, 0, -1}, {1000, 1, 3, 1}},
                             mc.tve.sensor);
    const EventStream* ptr = &stream;
    const std::vector<std::size_t> labels{2};
    const double lambda = mc.pcr.lambda;
    cases.push_back(run(
        "encode_enhance_ce_pcr", model.state().params,
        [&] { return model.forward({&ptr, 1}, labels, k::Mode::Train).l_total; },
        [&] { model.backward(model.forward({&ptr, 1}, labels, k::Mode::Train), lambda); }, opts));
  }

  return cases;
}

GradCase corrupted_backward_sentinel() { return pointwise_case({}, 1.1); }

}  // namespace neurolip
