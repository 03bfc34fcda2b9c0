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

// Network representation, forward/backward passes and shape checks.
//
// Activations are batch-leading: (batch, features) or (batch, channels, h, w).
// Linear layers compute y = x W + b with W stored as (in, out). Convolutions
// are cross-correlations with zero padding and an integer stride.

#ifndef ENORM_MODEL_HPP_
#define ENORM_MODEL_HPP_

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include "enorm/tensor.hpp"

namespace enorm {

using Shape = std::vector<std::size_t>;

struct Activation {
  Shape shape;  // shape[0] is the batch size
  std::vector<double> data;

  Activation() = default;
  explicit Activation(Shape s, double fill = 0.0);
  Activation(Shape s, std::vector<double> values);

  std::size_t batch() const { return shape.empty() ? 0 : shape[0]; }
  std::size_t sample_size() const;
  bool operator==(const Activation&) const = default;
};

struct Linear {
  Matrix weight;  // (in, out)
  std::optional<Vector> bias;

  std::size_t in_features() const { return weight.rows(); }
  std::size_t out_features() const { return weight.cols(); }
  bool operator==(const Linear&) const = default;
};

struct Conv2d {
  Tensor4 weight;
  std::optional<Vector> bias;
  std::size_t stride = 1;
  std::size_t padding = 0;

  bool operator==(const Conv2d&) const = default;
};

struct ReLU {
  bool operator==(const ReLU&) const = default;
};

struct MaxPool2d {
  std::size_t kernel = 2;
  std::size_t stride = 2;
  bool operator==(const MaxPool2d&) const = default;
};

struct Flatten {
  bool operator==(const Flatten&) const = default;
};

// Residual block with a learned 1x1 shortcut:
//   out = conv2(relu(conv1(x))) + skip(x)
// No activation is applied after the sum.
struct ResBlockC {
  Conv2d conv1;
  Conv2d conv2;
  Conv2d skip;

  bool operator==(const ResBlockC&) const = default;
};

using LayerSpec = std::variant<Linear, Conv2d, ReLU, MaxPool2d, Flatten, ResBlockC>;

enum class LayerKind { kLinear, kConv2d, kReLU, kMaxPool2d, kFlatten, kResBlockC };

LayerKind kind_of(const LayerSpec& layer);
std::string_view kind_name(LayerKind kind);

enum class ScalarType { kF32, kF64 };

// Stored values of an f32 network are always representable as float; compute
// happens in double either way.
struct Network {
  Shape input_shape;  // per-sample, without the batch dimension
  std::vector<LayerSpec> layers;
  ScalarType dtype = ScalarType::kF64;

  bool operator==(const Network&) const = default;
};

struct ActivationTrace {
  Activation input;
  std::vector<Activation> outputs;  // outputs[k] is the output of layers[k]
};

struct BackwardResult {
  Network param_grads;  // same structure as the network, holding gradients
  Activation input_grad;
};

// Per-sample output shape of every layer. Throws ShapeError when adjacent
// layers do not compose.
std::vector<Shape> layer_output_shapes(const Network& net);
Shape output_shape(const Network& net);
void validate_shapes(const Network& net);

Activation forward(const Network& net, const Activation& x);
ActivationTrace forward_trace(const Network& net, const Activation& x);

BackwardResult backward(const Network& net, const ActivationTrace& trace,
                        const Activation& loss_grad);
BackwardResult backward(const Network& net, const Activation& x,
                        const Activation& loss_grad);

// Single-layer kernels, exposed for tests and the balancer.
Activation linear_forward(const Linear& layer, const Activation& x);
Activation conv2d_forward(const Conv2d& layer, const Activation& x);
Activation relu(const Activation& x);
Activation maxpool2d_forward(const MaxPool2d& layer, const Activation& x);
Activation resblock_forward(const ResBlockC& block, const Activation& x);

// Weight coefficients touched by one balancing cycle. Biases are not counted.
std::size_t count_normalized_elements(const Network& net);
std::size_t count_parameters(const Network& net);

// Same structure with every weight and bias set to zero.
Network zeros_like(const Network& net);

// Rounds every parameter to float when net.dtype is f32; no-op otherwise.
void round_to_dtype(Network& net);

namespace detail {

template <typename F>
void visit_conv_params(Conv2d& conv, F&& f) {
  f(conv.weight.data());
  if (conv.bias) f(std::span<double>(*conv.bias));
}

template <typename F>
void visit_conv_params(const Conv2d& conv, F&& f) {
  f(conv.weight.data());
  if (conv.bias) f(std::span<const double>(*conv.bias));
}

}  // namespace detail

// Calls f(span) for every weight and bias tensor in a fixed order.
template <typename Net, typename F>
  requires std::is_same_v<std::remove_const_t<Net>, Network>
void for_each_parameter(Net& net, F&& f) {
  for (auto& layer : net.layers) {
    std::visit(
        [&](auto& l) {
          using L = std::remove_cvref_t<decltype(l)>;
          if constexpr (std::is_same_v<L, Linear>) {
            f(l.weight.data());
            if (l.bias) f(std::span(*l.bias));
          } else if constexpr (std::is_same_v<L, Conv2d>) {
            detail::visit_conv_params(l, f);
          } else if constexpr (std::is_same_v<L, ResBlockC>) {
            detail::visit_conv_params(l.conv1, f);
            detail::visit_conv_params(l.conv2, f);
            detail::visit_conv_params(l.skip, f);
          }
        },
        layer);
  }
}

}  // namespace enorm

#endif  // ENORM_MODEL_HPP_
