// Copyright 2026 The LightDense Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "support/oracles.hpp"

namespace ld = lightdense;
using ld::Activation;
using ld::ConvSpec;
using ld::PoolSpec;
using ld::Shape;
using ld::Tensor;

namespace {

Tensor ramp(Shape s) {
  Tensor t(s);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(i);
  return t;
}

ConvSpec spec(int in, int out, int k, int stride, int pad, int dil, int groups, bool bias) {
  ConvSpec s;
  s.in_channels = in;
  s.out_channels = out;
  s.kernel_h = s.kernel_w = k;
  s.stride_h = s.stride_w = stride;
  s.pad_h = s.pad_w = pad;
  s.dilation_h = s.dilation_w = dil;
  s.groups = groups;
  s.has_bias = bias;
  return s;
}

}  // namespace

// conv2d ----------------------------------------------------------------------

TEST(Conv2d, IdentityKernelReproducesInput) {
  const Tensor x = ramp({1, 1, 3, 3});
  const Tensor y = ld::conv2d(x, Tensor({1, 1, 1, 1}, 1.0f), {}, spec(1, 1, 1, 1, 0, 1, 1, false));
  EXPECT_TRUE(oracle::bitwise_equal(x, y));
}

TEST(Conv2d, OnesKernelSumsToNine) {
  const Tensor y = ld::conv2d(Tensor({1, 1, 3, 3}, 1.0f), Tensor({1, 1, 3, 3}, 1.0f), {},
                              spec(1, 1, 3, 1, 0, 1, 1, false));
  ASSERT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_FLOAT_EQ(y[0], 9.0f);
}

TEST(Conv2d, MatchesDirectLoopOnFixedCase) {
  oracle::Rng rng(11);
  const Tensor x = oracle::random_tensor({1, 4, 8, 8}, rng);
  const Tensor w = oracle::random_tensor({6, 4, 3, 3}, rng);
  const auto s = spec(4, 6, 3, 1, 1, 1, 1, false);
  EXPECT_LE(oracle::relative_error(ld::conv2d(x, w, {}, s), oracle::conv(x, w, {}, s)), 1e-5);
}

TEST(Conv2d, MatchesDirectLoopOnRandomDraws) {
  oracle::Rng rng(12);
  for (int t = 0; t < 100; ++t) {
    const int groups = rng.randint(1, 3);
    const int in = groups * rng.randint(1, 4), out = groups * rng.randint(1, 4);
    const int k = rng.randint(1, 4), stride = rng.randint(1, 3), dil = rng.randint(1, 2);
    const auto s = spec(in, out, k, stride, rng.randint(0, k), dil, groups, rng.coin());
    const int h = dil * (k - 1) + rng.randint(1, 9), w = dil * (k - 1) + rng.randint(1, 9);
    const Tensor x = oracle::random_tensor({rng.randint(1, 2), in, h, w}, rng);
    const Tensor wt = oracle::random_tensor(s.weight_shape(), rng);
    const auto b = s.has_bias ? oracle::random_values(out, rng) : std::vector<float>{};
    SCOPED_TRACE(t);
    EXPECT_LE(oracle::relative_error(ld::conv2d(x, wt, b, s), oracle::conv(x, wt, b, s)), 1e-5);
  }
}

TEST(Conv2d, OutputShapeFormula) {
  const auto s = spec(2, 3, 3, 2, 1, 2, 1, false);
  EXPECT_EQ(s.output_shape({1, 2, 11, 8}), (Shape{1, 3, 5, 3}));
}

TEST(Conv2d, ChannelMismatchIsConfigErrorNamingDimension) {
  const auto s = spec(4, 2, 3, 1, 1, 1, 1, false);
  try {
    ld::conv2d(Tensor({1, 3, 5, 5}), Tensor(s.weight_shape()), {}, s);
    FAIL() << "expected ConfigError";
  } catch (const ld::ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("channel"), std::string::npos) << e.what();
  }
  EXPECT_THROW(ld::conv2d(Tensor({1, 4, 5, 5}), Tensor({2, 4, 1, 1}), {}, s), ld::ConfigError);
  EXPECT_THROW(spec(3, 4, 3, 1, 1, 1, 2, false).validate(), ld::ConfigError);
  EXPECT_THROW(spec(4, 4, 0, 1, 1, 1, 1, false).validate(), ld::ConfigError);
}

TEST(Conv2d, RepeatedCallsAreBitwiseIdentical) {
  oracle::Rng rng(13);
  const auto s = spec(5, 7, 3, 2, 1, 1, 1, true);
  const Tensor x = oracle::random_tensor({2, 5, 13, 9}, rng);
  const Tensor w = oracle::random_tensor(s.weight_shape(), rng);
  const auto b = oracle::random_values(7, rng);
  EXPECT_TRUE(oracle::bitwise_equal(ld::conv2d(x, w, b, s), ld::conv2d(x, w, b, s)));
}

// depthwise -------------------------------------------------------------------

TEST(DepthwiseConv2d, ChannelsAreIndependent) {
  oracle::Rng rng(21);
  Tensor x = oracle::random_tensor({1, 2, 4, 4}, rng);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) x.at(0, 1, i, j) = 0.0f;
  const auto s = spec(2, 2, 3, 1, 1, 1, 2, false);
  const Tensor y = ld::depthwise_conv2d(x, oracle::random_tensor(s.weight_shape(), rng), {}, s);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) EXPECT_EQ(y.at(0, 1, i, j), 0.0f);
}

TEST(DepthwiseConv2d, UnitKernelsReproduceInput) {
  oracle::Rng rng(22);
  const Tensor x = oracle::random_tensor({1, 3, 5, 5}, rng);
  const auto s = spec(3, 3, 1, 1, 0, 1, 3, false);
  EXPECT_TRUE(oracle::bitwise_equal(ld::depthwise_conv2d(x, Tensor(s.weight_shape(), 1.0f), {}, s), x));
}

TEST(DepthwiseConv2d, MatchesBlockDiagonalOracle) {
  oracle::Rng rng(23);
  const Tensor x = oracle::random_tensor({1, 8, 16, 16}, rng);
  const auto s = spec(8, 8, 3, 1, 1, 1, 8, true);
  const Tensor w = oracle::random_tensor(s.weight_shape(), rng);
  const auto b = oracle::random_values(8, rng);
  auto dense = s;
  dense.groups = 1;
  const Tensor ref = oracle::conv(x, oracle::block_diagonal(w), b, dense);
  EXPECT_LE(oracle::abs_error(ld::depthwise_conv2d(x, w, b, s), ref), 1e-6);
}

TEST(DepthwiseConv2d, BitwiseEqualToGroupedConv) {
  oracle::Rng rng(24);
  for (int t = 0; t < 100; ++t) {
    const int c = rng.randint(1, 6), k = 2 * rng.randint(0, 2) + 1, stride = rng.randint(1, 2);
    const int dil = rng.randint(1, 2);
    const auto s = spec(c, c, k, stride, dil * (k - 1) / 2, dil, c, rng.coin());
    const Tensor x = oracle::random_tensor({1, c, rng.randint(k, 12), rng.randint(k, 12)}, rng);
    const Tensor w = oracle::random_tensor(s.weight_shape(), rng);
    const auto b = s.has_bias ? oracle::random_values(c, rng) : std::vector<float>{};
    SCOPED_TRACE(t);
    EXPECT_TRUE(oracle::bitwise_equal(ld::depthwise_conv2d(x, w, b, s), ld::conv2d(x, w, b, s)));
    EXPECT_LE(oracle::relative_error(ld::depthwise_conv2d(x, w, b, s), oracle::conv(x, w, b, s)), 1e-5);
  }
}

TEST(DepthwiseConv2d, GroupsMustEqualChannels) {
  const auto s = spec(4, 4, 3, 1, 1, 1, 2, false);
  EXPECT_THROW(ld::depthwise_conv2d(Tensor({1, 4, 5, 5}), Tensor(s.weight_shape()), {}, s), ld::ConfigError);
}

// batch norm ------------------------------------------------------------------

TEST(BatchNorm, NeutralParametersAreIdentity) {
  oracle::Rng rng(31);
  const Tensor x = oracle::random_tensor({1, 2, 3, 3}, rng);
  const std::vector<float> one{1, 1}, zero{0, 0};
  EXPECT_TRUE(oracle::bitwise_equal(ld::batch_norm(x, one, zero, zero, one, 0.0f), x));
}

TEST(BatchNorm, AffineByHand) {
  const std::vector<float> g{2}, b{3}, m{0}, v{1};
  EXPECT_FLOAT_EQ(ld::batch_norm(Tensor({1, 1, 1, 1}, 1.0f), g, b, m, v, 0.0f)[0], 5.0f);
}

TEST(BatchNorm, MatchesScalarOracle) {
  oracle::Rng rng(32);
  for (int t = 0; t < 100; ++t) {
    const int c = rng.randint(1, 6);
    const Tensor x = oracle::random_tensor({rng.randint(1, 2), c, rng.randint(1, 6), rng.randint(1, 6)}, rng, -3, 3);
    const auto g = oracle::random_values(c, rng, 0.5, 2), b = oracle::random_values(c, rng);
    const auto m = oracle::random_values(c, rng), v = oracle::random_values(c, rng, 0.1, 2);
    EXPECT_LE(oracle::relative_error(ld::batch_norm(x, g, b, m, v, 1e-5f), oracle::batch_norm(x, g, b, m, v, 1e-5)),
              1e-6);
  }
}

TEST(BatchNorm, NegativeVarianceIsInputError) {
  const std::vector<float> one{1}, zero{0}, neg{-0.5f};
  EXPECT_THROW(ld::batch_norm(Tensor({1, 1, 2, 2}), one, zero, zero, neg, 1e-5f), ld::InputError);
}

// activations -----------------------------------------------------------------

TEST(Activation, SaturationPoints) {
  EXPECT_FLOAT_EQ(ld::hard_swish(3.0f), 3.0f);
  EXPECT_FLOAT_EQ(ld::hard_swish(-3.0f), 0.0f);
  EXPECT_FLOAT_EQ(ld::hard_swish(0.0f), 0.0f);
  EXPECT_FLOAT_EQ(ld::apply_activation(-1.5f, Activation::kRelu), 0.0f);
  EXPECT_FLOAT_EQ(ld::hard_sigmoid(0.0f), 0.5f);
  EXPECT_FLOAT_EQ(ld::relu6(7.0f), 6.0f);
  EXPECT_FLOAT_EQ(ld::apply_activation(-2.0f, Activation::kIdentity), -2.0f);
}

TEST(Activation, HardSwishIsContinuousAtKinks) {
  for (float x : {-3.0f, 3.0f})
    for (float d : {1e-6f, -1e-6f}) EXPECT_LE(std::fabs(ld::hard_swish(x) - ld::hard_swish(x + d)), 1e-5f);
}

TEST(Activation, TensorFormIsElementwise) {
  const Tensor x({1, 1, 1, 4}, std::vector<float>{-4, -1, 1, 4});
  const Tensor y = ld::activate(x, Activation::kHardSigmoid);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_FLOAT_EQ(y[i], ld::hard_sigmoid(x[i]));
  EXPECT_EQ(ld::parse_activation("h_swish"), Activation::kHardSwish);
  EXPECT_THROW(ld::parse_activation("gelu"), ld::ConfigError);
}

// pooling and resize ----------------------------------------------------------

TEST(MaxPool, QuadrantMaxima) {
  const Tensor y = ld::max_pool2d(ramp({1, 1, 4, 4}), {2, 2, 0, false});
  ASSERT_EQ(y.shape(), (Shape{1, 1, 2, 2}));
  EXPECT_EQ(oracle::values(y), (std::vector<float>{5, 7, 13, 15}));
}

TEST(MaxPool, ConstantInputGivesConstantOutput) {
  const Tensor y = ld::max_pool2d(Tensor({1, 2, 5, 5}, 2.5f), {3, 2, 1, false});
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_EQ(y[i], 2.5f);
}

TEST(MaxPool, UnitKernelIsSubsampling) {
  oracle::Rng rng(41);
  const Tensor x = oracle::random_tensor({1, 3, 9, 8}, rng);
  const Tensor y = ld::max_pool2d(x, {1, 2, 0, false});
  ASSERT_EQ(y.shape(), (Shape{1, 3, 5, 4}));
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 4; ++j) EXPECT_EQ(y.at(0, c, i, j), x.at(0, c, 2 * i, 2 * j));
}

TEST(MaxPool, MatchesWindowOracle) {
  oracle::Rng rng(42);
  for (int t = 0; t < 100; ++t) {
    const int k = rng.randint(1, 4), stride = rng.randint(1, 3), pad = rng.randint(0, k / 2);
    const Tensor x = oracle::random_tensor({1, 2, rng.randint(k, 11), rng.randint(k, 11)}, rng);
    const PoolSpec ps{k, stride, pad, false};
    const Tensor y = ld::max_pool2d(x, ps);
    EXPECT_TRUE(oracle::bitwise_equal(y, oracle::max_pool(x, k, stride, pad, y.h(), y.w())));
  }
}

TEST(MaxPool, WindowLargerThanInputIsConfigError) {
  EXPECT_THROW(ld::max_pool2d(Tensor({1, 1, 2, 2}), {3, 1, 0, false}), ld::ConfigError);
}

TEST(ResizeNearest, UpsampleReplicatesBlocks) {
  const Tensor y = ld::resize_nearest(ramp({1, 1, 2, 2}), 4, 4);
  EXPECT_EQ(oracle::values(y), (std::vector<float>{0, 0, 1, 1, 0, 0, 1, 1, 2, 2, 3, 3, 2, 2, 3, 3}));
}

TEST(ResizeNearest, SameSizeIsIdentity) {
  const Tensor x = ramp({1, 2, 3, 5});
  EXPECT_TRUE(oracle::bitwise_equal(ld::resize_nearest(x, 3, 5), x));
}

TEST(ResizeNearest, FloorIndexConvention) {
  const Tensor y = ld::resize_nearest(ramp({1, 1, 3, 3}), 2, 2);
  EXPECT_EQ(oracle::values(y), (std::vector<float>{0, 1, 3, 4}));
}

TEST(ResizeNearest, MatchesIndexOracleAndRoundTrips) {
  oracle::Rng rng(43);
  for (int t = 0; t < 100; ++t) {
    const Tensor x = oracle::random_tensor({1, 2, rng.randint(1, 9), rng.randint(1, 9)}, rng);
    const int oh = rng.randint(1, 20), ow = rng.randint(1, 20);
    EXPECT_TRUE(oracle::bitwise_equal(ld::resize_nearest(x, oh, ow), oracle::resize_nearest(x, oh, ow)));
    const int f = rng.randint(1, 4);
    EXPECT_TRUE(oracle::bitwise_equal(ld::resize_nearest(ld::resize_nearest(x, x.h() * f, x.w() * f), x.h(), x.w()), x));
  }
}

TEST(GlobalAvgPool, ConstantAndSmallCases) {
  EXPECT_FLOAT_EQ(ld::global_avg_pool(Tensor({1, 1, 3, 3}, 5.0f))[0], 5.0f);
  EXPECT_FLOAT_EQ(ld::global_avg_pool(Tensor({1, 1, 2, 2}, std::vector<float>{1, 2, 3, 4}))[0], 2.5f);
}

TEST(GlobalAvgPool, MatchesMeanOracle) {
  oracle::Rng rng(44);
  for (int t = 0; t < 100; ++t) {
    const Tensor x = oracle::random_tensor({rng.randint(1, 2), rng.randint(1, 4), rng.randint(1, 9), rng.randint(1, 9)}, rng);
    EXPECT_LE(oracle::abs_error(ld::global_avg_pool(x), oracle::global_avg_pool(x)), 1e-6);
  }
}

TEST(GlobalAvgPool, EmptyExtentIsInputError) {
  EXPECT_THROW(ld::global_avg_pool(Tensor({1, 1, 0, 3})), ld::InputError);
}

// concat, add, bilinear -------------------------------------------------------

TEST(Concat, PreservesOrder) {
  const Tensor a({1, 2, 4, 4}, 1.0f), b({1, 3, 4, 4}, 2.0f);
  const Tensor y = ld::concat_channels({&a, &b});
  ASSERT_EQ(y.shape(), (Shape{1, 5, 4, 4}));
  EXPECT_EQ(y.at(0, 1, 3, 3), 1.0f);
  EXPECT_EQ(y.at(0, 2, 0, 0), 2.0f);
  const Tensor c({1, 1, 3, 4});
  EXPECT_THROW(ld::concat_channels({&a, &c}), ld::ConfigError);
}

TEST(Add, ElementwiseAndShapeChecked) {
  const Tensor y = ld::add(ramp({1, 1, 2, 2}), Tensor({1, 1, 2, 2}, 1.0f));
  EXPECT_EQ(oracle::values(y), (std::vector<float>{1, 2, 3, 4}));
  EXPECT_THROW(ld::add(Tensor({1, 1, 2, 2}), Tensor({1, 2, 2, 2})), ld::ConfigError);
}

TEST(BilinearSample, GridPointsAndCenters) {
  const Tensor x = ramp({1, 1, 2, 2});
  EXPECT_EQ(ld::bilinear_sample(x, 0, 0, 1.0f, 0.0f), 2.0f);
  EXPECT_EQ(ld::bilinear_sample(x, 0, 0, 0.0f, 1.0f), 1.0f);
  EXPECT_FLOAT_EQ(ld::bilinear_sample(x, 0, 0, 0.5f, 0.5f), 1.5f);
}

TEST(BilinearSample, OutOfRangeClampsToBorder) {
  const Tensor x = ramp({1, 1, 2, 2});
  EXPECT_EQ(ld::bilinear_sample(x, 0, 0, -3.0f, -3.0f), 0.0f);
  EXPECT_EQ(ld::bilinear_sample(x, 0, 0, 9.0f, 9.0f), 3.0f);
  EXPECT_FLOAT_EQ(ld::bilinear_sample(x, 0, 0, -1.0f, 0.5f), 0.5f);
}

TEST(TensorInvariants, DataLengthMustMatchShape) {
  EXPECT_THROW(Tensor({1, 1, 2, 2}, std::vector<float>{1, 2, 3}), ld::ConfigError);
  EXPECT_EQ(Tensor({2, 3, 4, 5}).size(), 120u);
}
