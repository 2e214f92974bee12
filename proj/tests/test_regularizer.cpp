#include <gtest/gtest.h>

#include "neurolip/gradcheck.hpp"
#include "neurolip/regularizer.hpp"
#include "support.hpp"

using namespace neurolip;

namespace {

Tensor<double> random_map(const Shape& shape, Rng& rng, double lo = 0.0) {
  Tensor<double> t(shape);
  for (auto& v : t.vec()) v = lo + (1.0 - lo) * uniform01(rng);
  return t;
}

}  // namespace

TEST(Reconstruct, ShapeAndZeroOutputLayer) {
  PcrHead<double> head(5, {});
  Rng rng(1);
  head.init(rng);
  head.conv_b_weight.value.zero();
  const auto r = head.forward(random_map({2, 5, 3, 4}, rng, -1.0));
  EXPECT_EQ(r.shape(), (Shape{2, 2, 3, 4}));
  for (double v : r.vec()) EXPECT_EQ(v, 0.0);
}

TEST(ReferenceMap, SingleEventAndConstant) {
  Tensor<double> v({1, 4, 2, 2});
  v.at(0, 2, 1, 0) = 1.0;
  v.at(0, 3, 1, 0) = 1.0;
  const auto r = reference_map(v, 2);
  EXPECT_DOUBLE_EQ(r.at(0, 1, 1, 0), 1.0);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(r[i], 0.0);
  const auto ones = reference_map(Tensor<double>({1, 6, 2, 3}, 1.0), 3);
  for (double x : ones.vec()) EXPECT_DOUBLE_EQ(x, 1.0);
}

TEST(ReferenceMap, MatchesPerPixelMean) {
  Rng rng(2);
  const auto v = random_map({2, 8, 3, 3}, rng, -1.0);
  const auto r = reference_map(v, 4);
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t a = 0; a < 2; ++a)
      for (std::size_t y = 0; y < 3; ++y)
        for (std::size_t x = 0; x < 3; ++x) {
          double m = 0;
          for (std::size_t b = 0; b < 4; ++b) m += v.at(n, a * 4 + b, y, x);
          EXPECT_NEAR(r.at(n, a, y, x), m / 4, 1e-12);
        }
}

TEST(PcrLoss, IdenticalMapsGiveZero) {
  Rng rng(3);
  const auto m = random_map({2, 2, 4, 4}, rng);
  EXPECT_EQ(pcr_loss(m, m).loss, 0.0);
}

TEST(PcrLoss, DisjointSupportGivesOne) {
  Tensor<double> r({1, 2, 1, 2}), ref({1, 2, 1, 2});
  r.vec() = {1, 0, 1, 0};
  ref.vec() = {0, 1, 0, 1};
  EXPECT_DOUBLE_EQ(pcr_loss(r, ref).loss, 1.0);
}

TEST(PcrLoss, MatchesOracle) {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const auto r = random_map({1, 2, 3, 5}, rng, -0.3), ref = random_map({1, 2, 3, 5}, rng);
    EXPECT_NEAR(pcr_loss(r, ref).loss, oracle::pcr_oracle(r.vec(), ref.vec(), 3, 5), 1e-12);
  }
}

TEST(PcrLoss, MasslessPlaneBecomesUniform) {
  Tensor<double> r({1, 2, 1, 2}, -1.0), ref({1, 2, 1, 2}, 0.5);
  EXPECT_NEAR(pcr_loss(r, ref).loss, 0.0, 1e-15);
}

TEST(PcrLoss, GradientThroughHeadAndReference) {
  PcrHead<double> head(3, {});
  Rng rng(5);
  head.init(rng);
  for (auto* b : {&head.conv_a_bias, &head.conv_b_bias})
    for (auto& v : b->value.vec()) v = 0.5 + 0.1 * uniform01(rng);
  Parameter<double> in("input", {2, 3, 3, 3}), ref("reference", {2, 2, 3, 3});
  in.value = random_map({2, 3, 3, 3}, rng, -1.0);
  ref.value = random_map({2, 2, 3, 3}, rng, 0.1);
  StateRefs<double> refs;
  head.collect(refs);
  auto params = refs.params;
  params.push_back(&in);
  params.push_back(&ref);
  auto loss = [&] { return pcr_loss(head.forward(in.value), ref.value).loss; };
  auto backward = [&] {
    for (auto* p : params) p->zero_grad();
    const auto l = pcr_loss(head.forward(in.value), ref.value);
    in.grad = head.backward(l.grad_recon);
    ref.grad = l.grad_reference;
  };
  EXPECT_LT(grad_check(params, loss, backward).max_rel_error, 1e-4);
}
