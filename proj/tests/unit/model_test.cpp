// Copyright 2026 The ENorm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "enorm/architectures.hpp"
#include "enorm/diagnostics.hpp"
#include "enorm/errors.hpp"
#include "enorm/model.hpp"
#include "oracles.hpp"

namespace enorm {
namespace {

Network single_linear(double w, std::optional<double> b) {
  Network net;
  net.input_shape = {1};
  Linear lin{Matrix(1, 1, w), std::nullopt};
  if (b) lin.bias = Vector{*b};
  net.layers.emplace_back(std::move(lin));
  return net;
}

Network one_one_one(double w1, double w2) {
  Network net;
  net.input_shape = {1};
  net.layers.emplace_back(Linear{Matrix(1, 1, w1), std::nullopt});
  net.layers.emplace_back(ReLU{});
  net.layers.emplace_back(Linear{Matrix(1, 1, w2), std::nullopt});
  return net;
}

// Checks every parameter and input gradient of <forward(net, x), g> against
// central differences.
void expect_gradients_match(const Network& net, const Activation& x, double rel_tol) {
  const Activation y = forward(net, x);
  const Activation g = random_batch(Shape(y.shape.begin() + 1, y.shape.end()), y.batch(), 99);
  const BackwardResult analytic = backward(net, x, g);
  auto objective = [&](const Network& n, const Activation& in) {
    const Activation out = forward(n, in);
    double s = 0.0;
    for (std::size_t i = 0; i < out.data.size(); ++i) s += out.data[i] * g.data[i];
    return s;
  };
  const double h = 1e-6;
  auto check = [&](double fd, double an, const char* what) {
    EXPECT_NEAR(an, fd, rel_tol * std::max(1.0, std::fabs(fd))) << what;
  };

  std::vector<std::span<const double>> grads;
  for_each_parameter(analytic.param_grads,
                     [&](std::span<const double> s) { grads.push_back(s); });
  Network probe = net;
  std::size_t t = 0;
  std::vector<std::span<double>> params;
  for_each_parameter(probe, [&](std::span<double> s) { params.push_back(s); });
  ASSERT_EQ(params.size(), grads.size());
  for (t = 0; t < params.size(); ++t) {
    for (std::size_t i = 0; i < params[t].size(); ++i) {
      const double saved = params[t][i];
      params[t][i] = saved + h;
      const double up = objective(probe, x);
      params[t][i] = saved - h;
      const double down = objective(probe, x);
      params[t][i] = saved;
      check((up - down) / (2 * h), grads[t][i], "parameter");
    }
  }
  Activation xp = x;
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    const double saved = xp.data[i];
    xp.data[i] = saved + h;
    const double up = objective(net, xp);
    xp.data[i] = saved - h;
    const double down = objective(net, xp);
    xp.data[i] = saved;
    check((up - down) / (2 * h), analytic.input_grad.data[i], "input");
  }
}

TEST(Forward, AffineLayer) {
  const Network net = single_linear(2.0, 1.0);
  EXPECT_EQ(forward(net, Activation({1, 1}, Vector{3})).data, Vector{7});
}

TEST(Forward, Relu) {
  EXPECT_EQ(relu(Activation({1, 2}, Vector{-1, 2})).data, (Vector{0, 2}));
}

TEST(Forward, RescaledOneOneOneKeepsOutput) {
  const Activation x({1, 1}, Vector{1});
  EXPECT_EQ(forward(one_one_one(2.0, 0.5), x).data, Vector{1});
  // d = 0.5 on the hidden neuron: W1 * d, W2 / d.
  EXPECT_EQ(forward(one_one_one(2.0 * 0.5, 0.5 / 0.5), x).data, Vector{1});
}

TEST(Forward, IsPure) {
  const Network net = oracle::random_network(oracle::Family::kResBlocks, 4);
  const Activation x = random_batch(net.input_shape, 5, 1);
  EXPECT_EQ(forward(net, x), forward(net, x));
}

TEST(Forward, ConvMatchesDirectLoops) {
  std::mt19937_64 rng(21);
  for (std::size_t stride : {1u, 2u}) {
    for (std::size_t pad : {0u, 1u, 2u}) {
      const Conv2d conv = make_conv(3, 4, 3, stride, pad, true, Init::kHe, rng);
      const Activation x = random_batch({3, 7, 6}, 2, stride * 10 + pad);
      const Activation got = conv2d_forward(conv, x);
      const Activation want =
          oracle::direct_conv2d(x, conv.weight, conv.bias, stride, pad);
      ASSERT_EQ(got.shape, want.shape);
      EXPECT_LT(oracle::max_abs_diff(got.data, want.data), 1e-12);
    }
  }
}

TEST(Forward, MaxPoolPicksWindowMaximum) {
  const Activation x({1, 1, 2, 4}, Vector{1, 5, -2, 0, 3, 2, 7, -1});
  const Activation y = maxpool2d_forward(MaxPool2d{2, 2}, x);
  EXPECT_EQ(y.shape, (Shape{1, 1, 1, 2}));
  EXPECT_EQ(y.data, (Vector{5, 7}));
}

TEST(Forward, ReluCommutesWithPositiveDiagonal) {
  std::mt19937_64 rng(8);
  const Activation y = random_batch({6}, 4, 2);
  const Vector d = oracle::log_uniform(6, rng);
  Activation scaled = y;
  for (std::size_t i = 0; i < y.data.size(); ++i) scaled.data[i] *= d[i % 6];
  const Activation lhs = relu(scaled);
  Activation rhs = relu(y);
  for (std::size_t i = 0; i < y.data.size(); ++i) rhs.data[i] *= d[i % 6];
  EXPECT_EQ(lhs.data, rhs.data);
}

TEST(Forward, MaxPoolCommutesWithPositiveChannelScaling) {
  std::mt19937_64 rng(9);
  const Activation y = random_batch({3, 4, 4}, 2, 3);
  const Vector gamma = oracle::log_uniform(3, rng);
  auto scale = [&](Activation a) {
    const std::size_t plane = a.data.size() / (a.shape[0] * 3);
    for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] *= gamma[(i / plane) % 3];
    return a;
  };
  const MaxPool2d pool{2, 2};
  EXPECT_EQ(maxpool2d_forward(pool, scale(y)).data, scale(maxpool2d_forward(pool, y)).data);
}

TEST(Forward, ShapeErrors) {
  const Network net = single_linear(1.0, std::nullopt);
  EXPECT_THROW(forward(net, Activation({1, 2})), ShapeError);
  Network bad;
  bad.input_shape = {3};
  bad.layers.emplace_back(Linear{Matrix(2, 2), std::nullopt});
  EXPECT_THROW(validate_shapes(bad), ShapeError);
  Network conv;
  conv.input_shape = {1, 2, 2};
  conv.layers.emplace_back(Conv2d{Tensor4(1, 1, 3, 3), std::nullopt, 1, 0});
  EXPECT_THROW(validate_shapes(conv), ShapeError);
}

TEST(ForwardTrace, IdentityRescaleIsBitExact) {
  const Network net = oracle::random_network(oracle::Family::kFcBias, 2);
  const Activation x = random_batch(net.input_shape, 4, 5);
  const auto chain = oracle::fc_chain(net);
  std::vector<Vector> hidden;
  for (std::size_t k = 0; k + 1 < chain.weights.size(); ++k) {
    hidden.emplace_back(chain.weights[k].cols(), 1.0);
  }
  const Network same = oracle::rescale_fc(net, hidden);
  const auto a = forward_trace(net, x);
  const auto b = forward_trace(same, x);
  EXPECT_EQ(a.outputs, b.outputs);
}

TEST(ForwardTrace, HiddenActivationScalesByCoefficients) {
  Network net;
  net.input_shape = {1};
  net.layers.emplace_back(Linear{Matrix::from_rows({{1, 2}}), std::nullopt});
  net.layers.emplace_back(ReLU{});
  net.layers.emplace_back(Linear{Matrix::from_rows({{4}, {1}}), std::nullopt});
  const Vector d{2.0, 1.0 / std::sqrt(2.0)};
  const Network scaled = oracle::rescale_fc(net, {d});
  const Activation x({3, 1}, Vector{0.5, -1.0, 2.0});
  const auto a = forward_trace(net, x);
  const auto b = forward_trace(scaled, x);
  for (std::size_t s = 0; s < 3; ++s) {
    for (std::size_t j = 0; j < 2; ++j) {
      EXPECT_NEAR(b.outputs[1].data[s * 2 + j], a.outputs[1].data[s * 2 + j] * d[j], 1e-15);
    }
  }
  EXPECT_LT(oracle::max_abs_diff(a.outputs.back().data, b.outputs.back().data), 1e-14);
}

TEST(ForwardTrace, SingleReluLayer) {
  Network net;
  net.input_shape = {3};
  net.layers.emplace_back(ReLU{});
  const Activation x({2, 3}, Vector{-1, 0, 2, 3, -4, 5});
  EXPECT_EQ(forward_trace(net, x).outputs.back(), forward(net, x));
}

TEST(Backward, LinearWeightGradientIsOuterProduct) {
  Network net;
  net.input_shape = {2};
  net.layers.emplace_back(Linear{Matrix::from_rows({{1, -1, 2}, {0.5, 3, 1}}), Vector{0, 0, 0}});
  const Activation x({1, 2}, Vector{2, -3});
  const Activation g({1, 3}, Vector{1, 0.5, -2});
  const auto result = backward(net, x, g);
  const auto& lin = std::get<Linear>(result.param_grads.layers[0]);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_DOUBLE_EQ(lin.weight(i, j), x.data[i] * g.data[j]);
  EXPECT_EQ(*lin.bias, g.data);
}

TEST(Backward, ReluBlocksNegativePreactivation) {
  Network net;
  net.input_shape = {2};
  net.layers.emplace_back(ReLU{});
  const auto result =
      backward(net, Activation({1, 2}, Vector{-1, 2}), Activation({1, 2}, Vector{5, 5}));
  EXPECT_EQ(result.input_grad.data, (Vector{0, 5}));
}

TEST(Backward, ConvMatchesFiniteDifferences) {
  std::mt19937_64 rng(31);
  Network net;
  net.input_shape = {1, 4, 4};
  net.layers.emplace_back(make_conv(1, 2, 3, 1, 0, true, Init::kHe, rng));
  expect_gradients_match(net, random_batch(net.input_shape, 1, 4), 1e-5);
}

TEST(Backward, EveryLayerKindMatchesFiniteDifferences) {
  for (auto family : {oracle::Family::kFcBias, oracle::Family::kConvReluConv,
                      oracle::Family::kConvMaxpoolConv, oracle::Family::kResBlocks}) {
    const Network net = oracle::random_network(family, 17);
    expect_gradients_match(net, random_batch(net.input_shape, 2, 6), 1e-5);
  }
}

TEST(Backward, StridedPaddedConvMatchesFiniteDifferences) {
  std::mt19937_64 rng(41);
  Network net;
  net.input_shape = {2, 5, 5};
  net.layers.emplace_back(make_conv(2, 3, 3, 2, 1, true, Init::kHe, rng));
  net.layers.emplace_back(ReLU{});
  net.layers.emplace_back(MaxPool2d{2, 1});
  expect_gradients_match(net, random_batch(net.input_shape, 2, 7), 1e-5);
}

TEST(ElementCount, ClosedForms) {
  EXPECT_EQ(count_normalized_elements(single_linear(3.0, std::nullopt)), 1u);
  const std::vector<std::size_t> widths{3072, 500, 10};
  EXPECT_EQ(count_normalized_elements(make_fc(widths, true, Init::kHe, 0)), 1541000u);
}

TEST(ElementCount, ResNet18TypeC) {
  const Network net = make_resnet18c();
  const std::size_t n = count_normalized_elements(net);
  EXPECT_GE(n, 11'000'000u);
  EXPECT_LE(n, 13'000'000u);
  EXPECT_EQ(std::llround(static_cast<double>(n) / 1e6), 12);
  EXPECT_EQ(output_shape(net), (Shape{1000}));
}

}  // namespace
}  // namespace enorm
