#include <gtest/gtest.h>

#include <cmath>

#include "neurolip/adam.hpp"
#include "neurolip/gradsuite.hpp"
#include "neurolip/kernels.hpp"

using namespace neurolip;
namespace k = neurolip::kernels;

namespace {

Tensor<double> random_tensor(const Shape& shape, Rng& rng) {
  Tensor<double> t(shape);
  for (auto& v : t.vec()) v = 2.0 * uniform01(rng) - 1.0;
  return t;
}

}  // namespace

TEST(Dense2, ZeroParamsGiveZero) {
  k::Dense2<double> mlp;
  std::vector<double> in{0.3, -2.0, 5.0, 1.0}, out(2, 7.0);
  k::dense2_forward<double>(mlp, in, out);
  EXPECT_EQ(out, (std::vector<double>{0.0, 0.0}));
}

TEST(Dense2, ForcedArithmetic) {
  k::Dense2<double> mlp;
  mlp.b1.value.fill(1.0);
  mlp.w2.value.fill(1.0);
  std::vector<double> in{0.3, -2.0}, out(1);
  k::dense2_forward<double>(mlp, in, out);
  EXPECT_DOUBLE_EQ(out[0], 32.0);
}

TEST(Gemm, MatchesNaiveProducts) {
  Rng rng(1);
  const std::size_t M = 5, K = 7, P = 3;
  const auto A = random_tensor({M, K}, rng), B = random_tensor({K, P}, rng), G = random_tensor({M, P}, rng);
  std::vector<double> c(M * P, 1.0), ct(K * P, 0.0), cn(M * K, 0.0);
  k::gemm_nn(M, K, P, A.data(), B.data(), c.data());
  k::gemm_tn(M, K, P, A.data(), G.data(), ct.data());
  k::gemm_nt(M, K, P, G.data(), B.data(), cn.data());
  for (std::size_t i = 0; i < M; ++i)
    for (std::size_t j = 0; j < P; ++j) {
      double s = 1.0;
      for (std::size_t q = 0; q < K; ++q) s += A[i * K + q] * B[q * P + j];
      EXPECT_NEAR(c[i * P + j], s, 1e-12);
    }
  for (std::size_t q = 0; q < K; ++q)
    for (std::size_t j = 0; j < P; ++j) {
      double s = 0;
      for (std::size_t i = 0; i < M; ++i) s += A[i * K + q] * G[i * P + j];
      EXPECT_NEAR(ct[q * P + j], s, 1e-12);
    }
  for (std::size_t i = 0; i < M; ++i)
    for (std::size_t q = 0; q < K; ++q) {
      double s = 0;
      for (std::size_t j = 0; j < P; ++j) s += G[i * P + j] * B[q * P + j];
      EXPECT_NEAR(cn[i * K + q], s, 1e-12);
    }
}

TEST(Conv2d, MatchesDirectLoop) {
  Rng rng(2);
  const k::ConvGeometry g{3, 2, 1};
  const auto in = random_tensor({2, 3, 5, 6}, rng), w = random_tensor({4, 3, 3, 3}, rng);
  const auto out = k::conv2d(in, w, g);
  ASSERT_EQ(out.shape(), (Shape{2, 4, 3, 3}));
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t o = 0; o < 4; ++o)
      for (std::size_t y = 0; y < 3; ++y)
        for (std::size_t x = 0; x < 3; ++x) {
          double s = 0;
          for (std::size_t c = 0; c < 3; ++c)
            for (int dy = 0; dy < 3; ++dy)
              for (int dx = 0; dx < 3; ++dx) {
                const int iy = int(y) * 2 - 1 + dy, ix = int(x) * 2 - 1 + dx;
                if (iy < 0 || ix < 0 || iy >= 5 || ix >= 6) continue;
                s += in.at(n, c, iy, ix) * w.at(o, c, dy, dx);
              }
          EXPECT_NEAR(out.at(n, o, y, x), s, 1e-12);
        }
}

TEST(DepthwiseHconv, MatchesDirectLoop) {
  Rng rng(3);
  const auto in = random_tensor({1, 2, 3, 4}, rng), kern = random_tensor({2, 3}, rng);
  const auto out = k::depthwise_hconv1d(in, kern);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t y = 0; y < 3; ++y)
      for (std::size_t x = 0; x < 4; ++x) {
        double s = kern[c * 3 + 1] * in.at(0, c, y, x);
        if (x > 0) s += kern[c * 3] * in.at(0, c, y, x - 1);
        if (x + 1 < 4) s += kern[c * 3 + 2] * in.at(0, c, y, x + 1);
        EXPECT_NEAR(out.at(0, c, y, x), s, 1e-12);
      }
}

TEST(SoftmaxCrossEntropy, UniformLogitsGiveLogK) {
  const Tensor<double> logits({2, 5}, 0.3);
  const std::vector<std::size_t> labels{1, 4};
  EXPECT_NEAR(k::softmax_cross_entropy(logits, labels).loss, std::log(5.0), 1e-12);
}

TEST(BatchNorm, EvalWithIdentityStatsIsIdentity) {
  k::BatchNorm2d<double> bn("bn", 2, 0.1, 0.0);
  Rng rng(4);
  const auto in = random_tensor({3, 2, 2, 2}, rng);
  const auto out = bn.forward(in, k::Mode::Eval);
  for (std::size_t i = 0; i < in.size(); ++i) EXPECT_NEAR(out[i], in[i], 1e-12);
}

TEST(BatchNorm, TrainModeNormalizesAndTracksStats) {
  k::BatchNorm2d<double> bn("bn", 1);
  Tensor<double> in({2, 1, 1, 2});
  in.vec() = {1.0, 2.0, 3.0, 4.0};
  const auto out = bn.forward(in, k::Mode::Train);
  double mean = 0, sq = 0;
  for (double v : out.vec()) mean += v, sq += v * v;
  EXPECT_NEAR(mean, 0.0, 1e-12);
  EXPECT_NEAR(sq / 4.0, 1.25 / (1.25 + 1e-5), 1e-9);
  EXPECT_NEAR(bn.running_mean[0], 0.1 * 2.5, 1e-12);
  EXPECT_NEAR(bn.running_var[0], 0.9 + 0.1 * (1.25 * 4.0 / 3.0), 1e-12);
}

TEST(Adam, MatchesScalarReference) {
  Parameter<double> p("p", {2});
  p.value.vec() = {0.5, -1.0};
  AdamConfig cfg;
  cfg.lr = 0.01;
  Adam<double> opt({&p}, cfg);
  double x[2] = {0.5, -1.0}, m[2] = {0, 0}, v[2] = {0, 0};
  for (int t = 1; t <= 5; ++t) {
    for (int i = 0; i < 2; ++i) p.grad[i] = 2.0 * p.value[i] + 0.1 * t;
    opt.step();
    for (int i = 0; i < 2; ++i) {
      const double g = 2.0 * x[i] + 0.1 * t;
      m[i] = 0.9 * m[i] + 0.1 * g;
      v[i] = 0.999 * v[i] + 0.001 * g * g;
      const double mh = m[i] / (1 - std::pow(0.9, t)), vh = v[i] / (1 - std::pow(0.999, t));
      x[i] -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
      EXPECT_NEAR(p.value[i], x[i], 1e-12) << "step " << t;
    }
  }
}

TEST(Adam, StepDecaySchedule) {
  EXPECT_DOUBLE_EQ(step_decay_lr(1e-4, 0.5, 10, 0), 1e-4);
  EXPECT_DOUBLE_EQ(step_decay_lr(1e-4, 0.5, 10, 9), 1e-4);
  EXPECT_DOUBLE_EQ(step_decay_lr(1e-4, 0.5, 10, 10), 5e-5);
  EXPECT_DOUBLE_EQ(step_decay_lr(1e-4, 0.5, 10, 29), 2.5e-5);
}

TEST(GradCheck, SuitePassesAndSentinelTrips) {
  for (const auto& c : gradient_suite()) EXPECT_TRUE(c.passed()) << c.name << " " << c.result.max_rel_error;
  EXPECT_GT(corrupted_backward_sentinel().result.max_rel_error, kGradSentinelThreshold);
}

TEST(GradCheck, RelativeErrorDefinition) {
  EXPECT_DOUBLE_EQ(relative_error(1.0, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(relative_error(1.0, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(relative_error(0.0, 0.0), 0.0);
}
