/*
 * Copyright 2026 The mia Authors. All rights reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "mia/attention.hpp"
#include "oracles.hpp"

namespace mia {
namespace {

MiaBlock random_block(std::size_t c, std::size_t r, std::uint64_t seed, bool spatial = true) {
  MiaBlock b(c, r, true, spatial);
  std::mt19937_64 rng(seed);
  b.initialize(rng);
  b.b1 = oracle::random_tensor(b.b1.shape(), seed + 1, -0.5, 0.5);
  b.b2 = oracle::random_tensor(b.b2.shape(), seed + 2, -0.5, 0.5);
  if (spatial) b.conv_bias = oracle::random_tensor(b.conv_bias.shape(), seed + 3, -0.5, 0.5);
  return b;
}

TEST(ChannelDescriptorTest, Examples) {
  EXPECT_DOUBLE_EQ(channel_descriptor(Tensor(Shape{1, 1, 2, 2}, {1, 2, 3, 4}))[0], 2.5);
  const Tensor z = channel_descriptor(Tensor::full(Shape{2, 3, 3, 5}, 7.0));
  EXPECT_EQ(z.shape(), Shape({2, 3}));
  for (double v : z.data()) EXPECT_DOUBLE_EQ(v, 7.0);
}

TEST(ChannelDescriptorTest, MatchesLoopOracle) {
  const Tensor x = oracle::random_tensor(Shape{2, 3, 4, 4}, 21);
  const auto expect = oracle::channel_means(x);
  const Tensor z = channel_descriptor(x);
  for (std::size_t i = 0; i < expect.size(); ++i) EXPECT_NEAR(z[i], expect[i], 1e-12);
}

TEST(SpatialDescriptorTest, Examples) {
  const Tensor m = spatial_descriptor(Tensor(Shape{1, 2, 1, 1}, {3, 5}));
  EXPECT_EQ(m.shape(), Shape({1, 1, 1}));
  EXPECT_DOUBLE_EQ(m[0], 4.0);
  const Tensor x = oracle::random_tensor(Shape{2, 1, 3, 3}, 22);
  EXPECT_EQ(spatial_descriptor(x).values(), x.values());
}

TEST(SpatialDescriptorTest, MatchesLoopOracle) {
  const Tensor x = oracle::random_tensor(Shape{2, 3, 5, 5}, 23);
  const auto expect = oracle::spatial_means(x);
  const Tensor m = spatial_descriptor(x);
  for (std::size_t i = 0; i < expect.size(); ++i) EXPECT_NEAR(m[i], expect[i], 1e-12);
}

TEST(ChannelWeightsTest, ZeroBlockGivesHalf) {
  const MiaBlock b(8, 2);
  const Tensor wc = channel_weights(oracle::random_tensor(Shape{3, 8}, 24), b);
  for (double v : wc.data()) EXPECT_EQ(v, 0.5);
}

TEST(ChannelWeightsTest, IdentityLikeWithZeroInput) {
  MiaBlock b(2, 1);
  b.w1 = Tensor(Shape{2, 2}, {1, 0, 0, 1});
  b.w2 = Tensor(Shape{2, 2}, {1, 0, 0, 1});
  const Tensor wc = channel_weights(Tensor(Shape{1, 2}), b);
  EXPECT_EQ(wc.values(), (std::vector<double>{0.5, 0.5}));
}

TEST(ChannelWeightsTest, MatchesMatvecOracle) {
  const MiaBlock b = random_block(4, 2, 25);
  const Tensor z = oracle::random_tensor(Shape{3, 4}, 26);
  const Tensor wc = channel_weights(z, b);
  const std::size_t h = b.hidden();
  for (std::size_t n = 0; n < 3; ++n) {
    std::vector<double> hid(h);
    for (std::size_t j = 0; j < h; ++j) {
      double acc = b.b1[j];
      for (std::size_t c = 0; c < 4; ++c) acc += b.w1[j * 4 + c] * z[n * 4 + c];
      hid[j] = std::max(acc, 0.0);
    }
    for (std::size_t c = 0; c < 4; ++c) {
      double acc = b.b2[c];
      for (std::size_t j = 0; j < h; ++j) acc += b.w2[c * h + j] * hid[j];
      EXPECT_NEAR(wc[n * 4 + c], oracle::logistic(acc), 1e-12);
    }
  }
}

TEST(SpatialWeightsTest, ZeroKernelGivesHalf) {
  const MiaBlock b(4, 2);
  const Tensor ws = spatial_weights(oracle::random_tensor(Shape{2, 4, 4}, 27), b);
  for (double v : ws.data()) EXPECT_EQ(v, 0.5);
}

TEST(SpatialWeightsTest, SinglePixelUsesCentreTap) {
  MiaBlock b(4, 2);
  b.conv_kernel[3 * 7 + 3] = 1.3;
  const Tensor ws = spatial_weights(Tensor(Shape{1, 1, 1}, {0.7}), b);
  EXPECT_NEAR(ws[0], oracle::logistic(1.3 * 0.7), 1e-15);
}

TEST(SpatialWeightsTest, MatchesDirectConvolution) {
  const MiaBlock b = random_block(4, 2, 28);
  const Tensor m = oracle::random_tensor(Shape{1, 9, 9}, 29);
  const Tensor ws = spatial_weights(m, b);
  const auto conv = oracle::conv_same(m.values(), 9, 9, b.conv_kernel.values(), 7);
  for (std::size_t i = 0; i < 81; ++i) EXPECT_NEAR(ws[i], oracle::logistic(conv[i] + b.conv_bias[0]), 1e-10);
}

TEST(FuseAttentionTest, Examples) {
  const Tensor ones = fuse_attention(Tensor(Shape{1, 2}, {1, 1}), Tensor::ones(Shape{1, 2, 2}));
  EXPECT_EQ(ones.shape(), Shape({1, 2, 2, 2}));
  for (double v : ones.data()) EXPECT_EQ(v, 1.0);
  const Tensor a = fuse_attention(Tensor(Shape{1, 1}, {0.5}), Tensor(Shape{1, 1, 2}, {0.2, 0.4}));
  EXPECT_DOUBLE_EQ(a[0], 0.1);
  EXPECT_DOUBLE_EQ(a[1], 0.2);
}

TEST(FuseAttentionTest, CrossRatio) {
  const Tensor wc = oracle::random_tensor(Shape{1, 5}, 30, 0.0, 1.0);
  const Tensor ws = oracle::random_tensor(Shape{1, 3, 4}, 31, 0.0, 1.0);
  const Tensor a = fuse_attention(wc, ws);
  const std::size_t p = 12;
  for (std::size_t c = 0; c < 5; ++c)
    for (std::size_t d = 0; d < 5; ++d)
      for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < p; ++j)
          EXPECT_NEAR(a[c * p + i] * a[d * p + j], a[c * p + j] * a[d * p + i], 1e-10);
}

TEST(ApplyAttentionTest, Examples) {
  const Tensor x = oracle::random_tensor(Shape{2, 3, 4, 4}, 32);
  EXPECT_EQ(apply_attention(x, Tensor::ones(x.shape())).values(), x.values());
  const Tensor zeroed = apply_attention(x, Tensor::zeros(x.shape()));
  for (double v : zeroed.data()) EXPECT_EQ(v, 0.0);
  const Tensor a = oracle::random_tensor(x.shape(), 33, 0.0, 1.0);
  const Tensor y = apply_attention(x, a);
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_LE(std::abs(y[i]), std::abs(x[i]));
  EXPECT_THROW(apply_attention(x, Tensor::ones(Shape{2, 3, 4, 3})), Error);
}

TEST(ForwardTest, ZeroBlockQuartersInput) {
  const Tensor x = oracle::random_tensor(Shape{2, 4, 5, 5}, 34);
  const MiaOutput out = forward(x, MiaBlock(4, 2));
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_NEAR(out.output[i], 0.25 * x[i], 1e-12);
}

TEST(ForwardTest, ZeroInputGivesZero) {
  const MiaOutput out = forward(Tensor::zeros(Shape{1, 4, 5, 5}), random_block(4, 2, 35));
  for (double v : out.output.data()) EXPECT_EQ(v, 0.0);
}

TEST(ForwardTest, MapsAreBoundedAndRankOne) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Tensor x = oracle::random_tensor(Shape{2, 8, 6, 6}, 100 + seed, -10.0, 10.0);
    const MiaOutput out = forward(x, random_block(8, 4, 200 + seed));
    for (const Tensor* t : {&out.maps.wc, &out.maps.ws, &out.maps.a})
      for (double v : t->data()) {
        EXPECT_GT(v, 0.0);
        EXPECT_LT(v, 1.0);
      }
    for (std::size_t n = 0; n < 2; ++n)
      for (std::size_t c = 0; c < 8; ++c)
        for (std::size_t p = 0; p < 36; ++p)
          EXPECT_EQ(out.maps.a[(n * 8 + c) * 36 + p], out.maps.wc[n * 8 + c] * out.maps.ws[n * 36 + p]);
    for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_LE(std::abs(out.output[i]), std::abs(x[i]));
  }
}

TEST(ForwardTest, ConstantSpatialGateReducesToChannelAttention) {
  MiaBlock full = random_block(8, 2, 36);
  full.conv_kernel = Tensor::zeros(full.conv_kernel.shape());
  full.conv_bias = Tensor(Shape{1}, {0.4});
  MiaBlock se = full;
  se.has_spatial = false;
  const double s = oracle::logistic(0.4);
  const Tensor x = oracle::random_tensor(Shape{2, 8, 5, 5}, 37);
  const Tensor a = forward(x, full).output;
  const Tensor b = forward(x, se).output;
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_NEAR(a[i], s * b[i], 1e-12);
}

TEST(ForwardTest, BatchPermutationEquivariance) {
  const MiaBlock b = random_block(4, 2, 38);
  const Tensor x = oracle::random_tensor(Shape{3, 4, 5, 5}, 39);
  const std::size_t per = 4 * 25;
  const std::vector<std::size_t> perm{2, 0, 1};
  std::vector<double> px(x.numel());
  for (std::size_t n = 0; n < 3; ++n)
    std::copy_n(x.data().begin() + perm[n] * per, per, px.begin() + n * per);
  const Tensor y = forward(x, b).output;
  const Tensor py = forward(Tensor(x.shape(), px), b).output;
  for (std::size_t n = 0; n < 3; ++n)
    for (std::size_t k = 0; k < per; ++k) EXPECT_EQ(py[n * per + k], y[perm[n] * per + k]);
}

TEST(ParamCountTest, Examples) {
  EXPECT_EQ(param_count(MiaBlock(64, 16)), 630u);
  EXPECT_EQ(param_count(MiaBlock(1, 1)), 54u);
  EXPECT_EQ(param_count(MiaBlock(32, 8)), 342u);
  EXPECT_EQ(param_count(MiaBlock(16, 16)), 99u);
  EXPECT_EQ(param_count(MiaBlock(32, 16)), 212u);
}

TEST(ParamCountTest, MatchesFieldSizes) {
  std::mt19937_64 rng(40);
  for (int i = 0; i < 50; ++i) {
    const std::size_t c = 1 + rng() % 128, r = 1 + rng() % 32;
    const MiaBlock b(c, r);
    const std::size_t h = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(double(c) / double(r))));
    EXPECT_EQ(b.hidden(), h);
    EXPECT_EQ(param_count(b), b.w1.numel() + b.b1.numel() + b.w2.numel() + b.b2.numel() +
                                  b.conv_kernel.numel() + b.conv_bias.numel());
    EXPECT_EQ(param_count(b), 2 * c * h + h + c + 50);
  }
}

TEST(InitTest, GlorotRangeAndZeroBiases) {
  MiaBlock b(32, 4);
  std::mt19937_64 rng(41);
  b.initialize(rng);
  const double lim1 = std::sqrt(6.0 / (32 + 8));
  for (double v : b.w1.data()) EXPECT_LE(std::abs(v), lim1);
  const double limk = std::sqrt(6.0 / (49 + 49));
  for (double v : b.conv_kernel.data()) EXPECT_LE(std::abs(v), limk);
  for (double v : b.b1.data()) EXPECT_EQ(v, 0.0);
  for (double v : b.b2.data()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(b.conv_bias[0], 0.0);
}

TEST(PgmTest, HeaderAndScaling) {
  const std::string pgm = encode_pgm(Tensor(Shape{1, 3}, {0.0, 0.5, 1.0}));
  const std::string header = "P5\n3 1\n255\n";
  ASSERT_EQ(pgm.size(), header.size() + 3);
  EXPECT_EQ(pgm.substr(0, header.size()), header);
  EXPECT_EQ(static_cast<unsigned char>(pgm[header.size()]), 0);
  EXPECT_EQ(static_cast<unsigned char>(pgm[header.size() + 1]), 128);
  EXPECT_EQ(static_cast<unsigned char>(pgm[header.size() + 2]), 255);
}

}  // namespace
}  // namespace mia
