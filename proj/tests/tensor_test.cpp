#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "lexivis/tensor.hpp"

namespace lexivis {
namespace {

ConvWeights make_weights(std::size_t out, std::size_t in, std::size_t k, std::vector<float> w, std::vector<float> b) {
  ConvWeights cw;
  cw.out_channels = out;
  cw.in_channels = in;
  cw.kernel_h = k;
  cw.kernel_w = k;
  cw.weights = std::move(w);
  cw.bias = std::move(b);
  return cw;
}

Tensor random_tensor(std::mt19937& rng, std::size_t c, std::size_t h, std::size_t w) {
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  Tensor t(c, h, w);
  for (float& v : t.data()) v = dist(rng);
  return t;
}

ConvWeights random_weights(std::mt19937& rng, std::size_t out, std::size_t in, std::size_t k) {
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  std::vector<float> w(out * in * k * k);
  std::vector<float> b(out);
  for (float& v : w) v = dist(rng);
  for (float& v : b) v = dist(rng);
  return make_weights(out, in, k, std::move(w), std::move(b));
}

double normwise_error(const Tensor& a, const Tensor& ref) {
  double diff = 0.0;
  double scale = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    diff = std::max(diff, std::abs(static_cast<double>(a.data()[i]) - ref.data()[i]));
    scale = std::max(scale, std::abs(static_cast<double>(ref.data()[i])));
  }
  return scale == 0.0 ? diff : diff / scale;
}

TEST(Tensor, RejectsMismatchedData) {
  EXPECT_THROW(Tensor(2, 2, 2, std::vector<float>(7)), ConfigError);
  EXPECT_THROW(Tensor(0, 2, 2), ConfigError);
}

TEST(Conv2d, ZeroInputYieldsBias) {
  Tensor in(1, 3, 3);
  auto w = make_weights(1, 1, 3, std::vector<float>(9, 0.7f), {2.5f});
  const auto out = conv2d(in, w, 1, 1);
  for (float v : out.data()) EXPECT_EQ(v, 2.5f);
}

TEST(Conv2d, AllOnesKernelOverPaddedGrid) {
  Tensor in(1, 3, 3, std::vector<float>{1, 2, 3, 4, 5, 6, 7, 8, 9});
  auto w = make_weights(1, 1, 3, std::vector<float>(9, 1.0f), {0.0f});
  const auto out = conv2d(in, w, 1, 1);
  ASSERT_EQ(out.height(), 3u);
  ASSERT_EQ(out.width(), 3u);
  EXPECT_EQ(out.at(0, 1, 1), 45.0f);
  EXPECT_EQ(out.at(0, 0, 0), 12.0f);
  EXPECT_EQ(conv2d_reference(in, w, 1, 1), out);
}

TEST(Conv2d, OneByOneIsAffine) {
  Tensor in(1, 1, 1, std::vector<float>{3.0f});
  auto w = make_weights(1, 1, 1, {2.0f}, {0.5f});
  const auto out = conv2d(in, w, 1, 0);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out.data()[0], 6.5f);
}

TEST(Conv2d, OutputGeometryWithStride) {
  std::mt19937 rng(3);
  const auto in = random_tensor(rng, 2, 7, 9);
  const auto w = random_weights(rng, 5, 2, 3);
  const auto out = conv2d(in, w, 2, 1);
  EXPECT_EQ(out.channels(), 5u);
  EXPECT_EQ(out.height(), (7u + 2 - 3) / 2 + 1);
  EXPECT_EQ(out.width(), (9u + 2 - 3) / 2 + 1);
  EXPECT_LE(normwise_error(out, conv2d_reference(in, w, 2, 1)), 1e-6);
}

TEST(Conv2d, ConfigurationErrors) {
  Tensor in(2, 4, 4);
  auto w = make_weights(1, 3, 3, std::vector<float>(27), {0.0f});
  EXPECT_THROW(conv2d(in, w, 1, 1), ConfigError);
  auto big = make_weights(1, 2, 7, std::vector<float>(98), {0.0f});
  EXPECT_THROW(conv2d(in, big, 1, 0), ConfigError);
  auto bad_bias = make_weights(2, 2, 3, std::vector<float>(36), {0.0f});
  EXPECT_THROW(conv2d(in, bad_bias, 1, 1), ConfigError);
}

TEST(Conv2d, MatchesReferenceOnRandomShapes) {
  std::mt19937 rng(11);
  std::uniform_int_distribution<std::size_t> ch(1, 8);
  std::uniform_int_distribution<std::size_t> sp(1, 16);
  std::uniform_int_distribution<std::size_t> ks(0, 2);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t k = 2 * ks(rng) + 1;
    const std::size_t pad = k / 2;
    const auto in = random_tensor(rng, ch(rng), sp(rng), sp(rng));
    const auto w = random_weights(rng, ch(rng), in.channels(), k);
    const auto fast = conv2d(in, w, 1, pad);
    const auto ref = conv2d_reference(in, w, 1, pad);
    ASSERT_TRUE(fast.same_shape(ref));
    EXPECT_LE(normwise_error(fast, ref), 1e-6) << "trial " << trial;
  }
}

TEST(Conv2d, ThreadCountDoesNotChangeBits) {
  std::mt19937 rng(5);
  const auto in = random_tensor(rng, 8, 33, 31);
  const auto w = random_weights(rng, 13, 8, 3);
  const auto one = conv2d(in, w, 1, 1, 1);
  EXPECT_EQ(conv2d(in, w, 1, 1, 3), one);
  EXPECT_EQ(conv2d(in, w, 1, 1, 8), one);
}

TEST(Relu, Examples) {
  Tensor t(1, 1, 3, std::vector<float>{-1.0f, 2.0f, 0.0f});
  EXPECT_EQ(relu(t), Tensor(1, 1, 3, std::vector<float>{0.0f, 2.0f, 0.0f}));
  Tensor pos(1, 2, 2, std::vector<float>{0.0f, 1.0f, 2.0f, 3.0f});
  EXPECT_EQ(relu(pos), pos);
  Tensor neg(1, 2, 2, std::vector<float>{-4.0f, -1.0f, -0.5f, -3.0f});
  EXPECT_EQ(relu(neg), Tensor(1, 2, 2));
}

TEST(Relu, Idempotent) {
  std::mt19937 rng(17);
  for (int i = 0; i < 20; ++i) {
    const auto t = random_tensor(rng, 3, 5, 6);
    const auto once = relu(t);
    EXPECT_EQ(relu(once), once);
  }
}

TEST(MaxPool2, Examples) {
  EXPECT_EQ(maxpool2(Tensor(1, 2, 2, std::vector<float>{1, 2, 3, 4})), Tensor(1, 1, 1, std::vector<float>{4}));
  EXPECT_EQ(maxpool2(Tensor(2, 4, 6, 1.5f)), Tensor(2, 2, 3, 1.5f));
  EXPECT_EQ(maxpool2(Tensor(1, 2, 4, std::vector<float>{1, 5, 2, 2, 0, 0, 9, 1})),
            Tensor(1, 1, 2, std::vector<float>{5, 9}));
}

TEST(MaxPool2, OddDimensionsRejected) {
  EXPECT_THROW(maxpool2(Tensor(1, 3, 4)), ConfigError);
  EXPECT_THROW(maxpool2(Tensor(1, 4, 5)), ConfigError);
}

TEST(MaxPool2, PreservesMaxAndBoundsMin) {
  std::mt19937 rng(23);
  for (int i = 0; i < 20; ++i) {
    const auto t = random_tensor(rng, 2, 8, 12);
    const auto p = maxpool2(t);
    const auto [in_min, in_max] = std::minmax_element(t.data().begin(), t.data().end());
    const auto [out_min, out_max] = std::minmax_element(p.data().begin(), p.data().end());
    EXPECT_EQ(*out_max, *in_max);
    EXPECT_GE(*out_min, *in_min);
  }
}

TEST(Quantile, NearestRankExamples) {
  std::vector<float> v(10);
  std::iota(v.begin(), v.end(), 0.0f);
  EXPECT_EQ(quantile_nearest_rank(v, 0.9), 8.0f);
  EXPECT_EQ(quantile_nearest_rank(std::vector<float>{4.25f}, 0.9), 4.25f);
  const std::vector<float> c(17, 3.0f);
  for (double q : {0.1, 0.5, 0.9, 1.0}) EXPECT_EQ(quantile_nearest_rank(c, q), 3.0f);
  EXPECT_THROW(quantile_nearest_rank(std::vector<float>{}, 0.9), ArgumentError);
  EXPECT_THROW(quantile_nearest_rank(v, 0.0), ArgumentError);
}

TEST(Quantile, IntegerRankIsNotRoundedUp) {
  // 0.9 * 70 is 63.000000000000007 in double; the nearest rank is 63.
  EXPECT_EQ(nearest_rank(70, 0.9), 63u);
  EXPECT_EQ(nearest_rank(50176, 0.9), 45159u);
  EXPECT_EQ(nearest_rank(10, 1.0), 10u);
}

TEST(Quantile, PermutationInvariantAndReturnsMember) {
  std::mt19937 rng(29);
  std::uniform_real_distribution<float> dist(-5.0f, 5.0f);
  for (int i = 0; i < 50; ++i) {
    std::vector<float> v(1 + rng() % 200);
    for (float& x : v) x = dist(rng);
    const float q = quantile_nearest_rank(v, 0.9);
    EXPECT_NE(std::find(v.begin(), v.end(), q), v.end());
    std::shuffle(v.begin(), v.end(), rng);
    EXPECT_EQ(quantile_nearest_rank(v, 0.9), q);
  }
}

}  // namespace
}  // namespace lexivis
