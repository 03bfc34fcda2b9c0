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

#include "enorm/model.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <utility>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "enorm/errors.hpp"

namespace enorm {

Activation::Activation(Shape s, double fill) : shape(std::move(s)) {
  const std::size_t n = std::accumulate(shape.begin(), shape.end(),
                                        std::size_t{1}, std::multiplies<>());
  data.assign(shape.empty() ? 0 : n, fill);
}

Activation::Activation(Shape s, std::vector<double> values)
    : shape(std::move(s)), data(std::move(values)) {
  const std::size_t n = std::accumulate(shape.begin(), shape.end(),
                                        std::size_t{1}, std::multiplies<>());
  if (shape.empty() || n != data.size()) {
    throw ShapeError(fmt::format("activation shape [{}] given {} values",
                                 fmt::join(shape, ", "), data.size()));
  }
}

std::size_t Activation::sample_size() const {
  if (shape.size() < 2) return shape.empty() ? 0 : 1;
  return std::accumulate(shape.begin() + 1, shape.end(), std::size_t{1},
                         std::multiplies<>());
}

LayerKind kind_of(const LayerSpec& layer) {
  return static_cast<LayerKind>(layer.index());
}

std::string_view kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::kLinear: return "linear";
    case LayerKind::kConv2d: return "conv2d";
    case LayerKind::kReLU: return "relu";
    case LayerKind::kMaxPool2d: return "maxpool2d";
    case LayerKind::kFlatten: return "flatten";
    case LayerKind::kResBlockC: return "resblock_c";
  }
  return "unknown";
}

namespace {

std::size_t product(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1},
                         std::multiplies<>());
}

Shape conv_output_shape(const Conv2d& conv, const Shape& in, std::size_t index) {
  if (in.size() != 3) {
    throw ShapeError(fmt::format("layer {}: conv2d expects (C, H, W) input, got [{}]",
                                 index, fmt::join(in, ", ")));
  }
  const Tensor4& w = conv.weight;
  if (in[0] != w.in_channels()) {
    throw ShapeError(fmt::format("layer {}: conv2d expects {} input channels, got {}",
                                 index, w.in_channels(), in[0]));
  }
  if (conv.stride == 0) throw ShapeError(fmt::format("layer {}: zero stride", index));
  if (conv.bias && conv.bias->size() != w.out_channels()) {
    throw ShapeError(fmt::format("layer {}: bias has {} entries for {} filters",
                                 index, conv.bias->size(), w.out_channels()));
  }
  const std::size_t h = in[1] + 2 * conv.padding;
  const std::size_t wd = in[2] + 2 * conv.padding;
  if (h < w.kernel_h() || wd < w.kernel_w()) {
    throw ShapeError(fmt::format("layer {}: kernel larger than padded input", index));
  }
  return {w.out_channels(), (h - w.kernel_h()) / conv.stride + 1,
          (wd - w.kernel_w()) / conv.stride + 1};
}

Shape layer_output_shape(const LayerSpec& layer, const Shape& in,
                         std::size_t index) {
  return std::visit(
      [&](const auto& l) -> Shape {
        using L = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<L, Linear>) {
          if (in.size() != 1 || in[0] != l.in_features()) {
            throw ShapeError(fmt::format(
                "layer {}: linear expects [{}] input, got [{}]", index,
                l.in_features(), fmt::join(in, ", ")));
          }
          if (l.bias && l.bias->size() != l.out_features()) {
            throw ShapeError(fmt::format("layer {}: bias has {} entries for {} outputs",
                                         index, l.bias->size(), l.out_features()));
          }
          return {l.out_features()};
        } else if constexpr (std::is_same_v<L, Conv2d>) {
          return conv_output_shape(l, in, index);
        } else if constexpr (std::is_same_v<L, ReLU>) {
          return in;
        } else if constexpr (std::is_same_v<L, MaxPool2d>) {
          if (in.size() != 3) {
            throw ShapeError(fmt::format("layer {}: maxpool2d expects (C, H, W) input",
                                         index));
          }
          if (l.kernel == 0 || l.stride == 0 || in[1] < l.kernel || in[2] < l.kernel) {
            throw ShapeError(fmt::format("layer {}: invalid pooling window", index));
          }
          return {in[0], (in[1] - l.kernel) / l.stride + 1,
                  (in[2] - l.kernel) / l.stride + 1};
        } else if constexpr (std::is_same_v<L, Flatten>) {
          return {product(in)};
        } else {
          const Shape a = conv_output_shape(l.conv1, in, index);
          const Shape c = conv_output_shape(l.conv2, a, index);
          if (l.skip.weight.kernel_h() != 1 || l.skip.weight.kernel_w() != 1) {
            throw ShapeError(fmt::format("layer {}: shortcut must be a 1x1 convolution",
                                         index));
          }
          const Shape s = conv_output_shape(l.skip, in, index);
          if (s != c) {
            throw ShapeError(fmt::format(
                "layer {}: residual branch [{}] and shortcut [{}] disagree", index,
                fmt::join(c, ", "), fmt::join(s, ", ")));
          }
          return c;
        }
      },
      layer);
}

Shape sample_shape(const Activation& a) {
  return Shape(a.shape.begin() + 1, a.shape.end());
}

Shape with_batch(std::size_t batch, const Shape& s) {
  Shape out{batch};
  out.insert(out.end(), s.begin(), s.end());
  return out;
}

void check_input(const Network& net, const Activation& x) {
  if (x.shape.empty() || sample_shape(x) != net.input_shape) {
    throw ShapeError(fmt::format("input shape [{}] does not match network input [{}]",
                                 fmt::join(x.shape, ", "),
                                 fmt::join(net.input_shape, ", ")));
  }
}

void require_rank(const Activation& x, std::size_t rank, std::string_view what) {
  if (x.shape.size() != rank) {
    throw ShapeError(fmt::format("{} expects a rank-{} activation, got [{}]", what,
                                 rank, fmt::join(x.shape, ", ")));
  }
}

}  // namespace

std::vector<Shape> layer_output_shapes(const Network& net) {
  std::vector<Shape> shapes;
  shapes.reserve(net.layers.size());
  Shape current = net.input_shape;
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    current = layer_output_shape(net.layers[k], current, k);
    shapes.push_back(current);
  }
  return shapes;
}

Shape output_shape(const Network& net) {
  auto shapes = layer_output_shapes(net);
  return shapes.empty() ? net.input_shape : shapes.back();
}

void validate_shapes(const Network& net) { (void)layer_output_shapes(net); }

Activation linear_forward(const Linear& layer, const Activation& x) {
  require_rank(x, 2, "linear");
  const std::size_t n = x.shape[0];
  const std::size_t in = layer.in_features();
  const std::size_t out = layer.out_features();
  if (x.shape[1] != in) {
    throw ShapeError(fmt::format("linear expects {} features, got {}", in, x.shape[1]));
  }
  Activation y({n, out});
  for (std::size_t s = 0; s < n; ++s) {
    double* row = &y.data[s * out];
    if (layer.bias) std::copy(layer.bias->begin(), layer.bias->end(), row);
    for (std::size_t i = 0; i < in; ++i) {
      const double xi = x.data[s * in + i];
      if (xi == 0.0) continue;
      for (std::size_t j = 0; j < out; ++j) row[j] += xi * layer.weight(i, j);
    }
  }
  return y;
}

Activation conv2d_forward(const Conv2d& layer, const Activation& x) {
  require_rank(x, 4, "conv2d");
  const Shape out_shape = conv_output_shape(layer, sample_shape(x), 0);
  const Tensor4& w = layer.weight;
  const std::size_t n = x.shape[0];
  const std::size_t cin = x.shape[1], h = x.shape[2], wd = x.shape[3];
  const std::size_t cout = out_shape[0], oh = out_shape[1], ow = out_shape[2];
  const auto pad = static_cast<std::ptrdiff_t>(layer.padding);
  Activation y(with_batch(n, out_shape));
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t o = 0; o < cout; ++o) {
      const double b = layer.bias ? (*layer.bias)[o] : 0.0;
      double* plane = &y.data[((s * cout) + o) * oh * ow];
      std::fill(plane, plane + oh * ow, b);
      for (std::size_t i = 0; i < cin; ++i) {
        const double* src = &x.data[((s * cin) + i) * h * wd];
        for (std::size_t kh = 0; kh < w.kernel_h(); ++kh) {
          for (std::size_t kw = 0; kw < w.kernel_w(); ++kw) {
            const double coeff = w(o, i, kh, kw);
            for (std::size_t py = 0; py < oh; ++py) {
              const std::ptrdiff_t iy =
                  static_cast<std::ptrdiff_t>(py * layer.stride + kh) - pad;
              if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
              for (std::size_t px = 0; px < ow; ++px) {
                const std::ptrdiff_t ix =
                    static_cast<std::ptrdiff_t>(px * layer.stride + kw) - pad;
                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(wd)) continue;
                plane[py * ow + px] += coeff * src[iy * static_cast<std::ptrdiff_t>(wd) + ix];
              }
            }
          }
        }
      }
    }
  }
  return y;
}

Activation relu(const Activation& x) {
  Activation y = x;
  for (double& v : y.data) v = v > 0.0 ? v : 0.0;
  return y;
}

Activation maxpool2d_forward(const MaxPool2d& layer, const Activation& x) {
  require_rank(x, 4, "maxpool2d");
  const std::size_t n = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3];
  if (h < layer.kernel || w < layer.kernel || layer.stride == 0) {
    throw ShapeError("maxpool2d window larger than input");
  }
  const std::size_t oh = (h - layer.kernel) / layer.stride + 1;
  const std::size_t ow = (w - layer.kernel) / layer.stride + 1;
  Activation y({n, c, oh, ow});
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    const double* src = &x.data[plane * h * w];
    double* dst = &y.data[plane * oh * ow];
    for (std::size_t py = 0; py < oh; ++py) {
      for (std::size_t px = 0; px < ow; ++px) {
        double best = src[(py * layer.stride) * w + px * layer.stride];
        for (std::size_t ky = 0; ky < layer.kernel; ++ky) {
          for (std::size_t kx = 0; kx < layer.kernel; ++kx) {
            best = std::max(best, src[(py * layer.stride + ky) * w +
                                      px * layer.stride + kx]);
          }
        }
        dst[py * ow + px] = best;
      }
    }
  }
  return y;
}

Activation resblock_forward(const ResBlockC& block, const Activation& x) {
  Activation out = conv2d_forward(block.conv2, relu(conv2d_forward(block.conv1, x)));
  const Activation shortcut = conv2d_forward(block.skip, x);
  if (shortcut.shape != out.shape) {
    throw ShapeError("residual branch and shortcut shapes disagree");
  }
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += shortcut.data[i];
  return out;
}

namespace {

Activation flatten(const Activation& x) {
  Activation y = x;
  y.shape = {x.batch(), x.sample_size()};
  return y;
}

Activation layer_forward(const LayerSpec& layer, const Activation& x) {
  return std::visit(
      [&](const auto& l) -> Activation {
        using L = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<L, Linear>) {
          return linear_forward(l, x);
        } else if constexpr (std::is_same_v<L, Conv2d>) {
          return conv2d_forward(l, x);
        } else if constexpr (std::is_same_v<L, ReLU>) {
          return relu(x);
        } else if constexpr (std::is_same_v<L, MaxPool2d>) {
          return maxpool2d_forward(l, x);
        } else if constexpr (std::is_same_v<L, Flatten>) {
          return flatten(x);
        } else {
          return resblock_forward(l, x);
        }
      },
      layer);
}

// Accumulates parameter gradients into grad and returns the input gradient
// when dx is requested.
void linear_backward(const Linear& layer, const Activation& x,
                     const Activation& g, Linear& grad, Activation* dx) {
  const std::size_t n = x.shape[0];
  const std::size_t in = layer.in_features();
  const std::size_t out = layer.out_features();
  for (std::size_t s = 0; s < n; ++s) {
    const double* gs = &g.data[s * out];
    for (std::size_t i = 0; i < in; ++i) {
      const double xi = x.data[s * in + i];
      if (xi == 0.0) continue;
      for (std::size_t j = 0; j < out; ++j) grad.weight(i, j) += xi * gs[j];
    }
    if (grad.bias) {
      for (std::size_t j = 0; j < out; ++j) (*grad.bias)[j] += gs[j];
    }
  }
  if (dx != nullptr) {
    *dx = Activation(x.shape);
    for (std::size_t s = 0; s < n; ++s) {
      const double* gs = &g.data[s * out];
      for (std::size_t i = 0; i < in; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < out; ++j) acc += gs[j] * layer.weight(i, j);
        dx->data[s * in + i] = acc;
      }
    }
  }
}

void conv2d_backward(const Conv2d& layer, const Activation& x,
                     const Activation& g, Conv2d& grad, Activation* dx) {
  const Tensor4& w = layer.weight;
  const std::size_t n = x.shape[0];
  const std::size_t cin = x.shape[1], h = x.shape[2], wd = x.shape[3];
  const std::size_t cout = g.shape[1], oh = g.shape[2], ow = g.shape[3];
  const auto pad = static_cast<std::ptrdiff_t>(layer.padding);
  if (dx != nullptr) *dx = Activation(x.shape);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t o = 0; o < cout; ++o) {
      const double* gp = &g.data[((s * cout) + o) * oh * ow];
      if (grad.bias) {
        double acc = 0.0;
        for (std::size_t q = 0; q < oh * ow; ++q) acc += gp[q];
        (*grad.bias)[o] += acc;
      }
      for (std::size_t i = 0; i < cin; ++i) {
        const double* src = &x.data[((s * cin) + i) * h * wd];
        double* dsrc = dx != nullptr ? &dx->data[((s * cin) + i) * h * wd] : nullptr;
        for (std::size_t kh = 0; kh < w.kernel_h(); ++kh) {
          for (std::size_t kw = 0; kw < w.kernel_w(); ++kw) {
            const double coeff = w(o, i, kh, kw);
            double acc = 0.0;
            for (std::size_t py = 0; py < oh; ++py) {
              const std::ptrdiff_t iy =
                  static_cast<std::ptrdiff_t>(py * layer.stride + kh) - pad;
              if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
              for (std::size_t px = 0; px < ow; ++px) {
                const std::ptrdiff_t ix =
                    static_cast<std::ptrdiff_t>(px * layer.stride + kw) - pad;
                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(wd)) continue;
                const std::ptrdiff_t at = iy * static_cast<std::ptrdiff_t>(wd) + ix;
                acc += gp[py * ow + px] * src[at];
                if (dsrc != nullptr) dsrc[at] += gp[py * ow + px] * coeff;
              }
            }
            grad.weight(o, i, kh, kw) += acc;
          }
        }
      }
    }
  }
}

Activation relu_backward(const Activation& pre_or_post, const Activation& g) {
  Activation dx = g;
  for (std::size_t i = 0; i < dx.data.size(); ++i) {
    if (!(pre_or_post.data[i] > 0.0)) dx.data[i] = 0.0;
  }
  return dx;
}

Activation maxpool2d_backward(const MaxPool2d& layer, const Activation& x,
                              const Activation& g) {
  const std::size_t n = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3];
  const std::size_t oh = g.shape[2], ow = g.shape[3];
  Activation dx(x.shape);
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    const double* src = &x.data[plane * h * w];
    const double* gp = &g.data[plane * oh * ow];
    double* dp = &dx.data[plane * h * w];
    for (std::size_t py = 0; py < oh; ++py) {
      for (std::size_t px = 0; px < ow; ++px) {
        std::size_t arg = (py * layer.stride) * w + px * layer.stride;
        for (std::size_t ky = 0; ky < layer.kernel; ++ky) {
          for (std::size_t kx = 0; kx < layer.kernel; ++kx) {
            const std::size_t at = (py * layer.stride + ky) * w + px * layer.stride + kx;
            if (src[at] > src[arg]) arg = at;
          }
        }
        dp[arg] += gp[py * ow + px];
      }
    }
  }
  return dx;
}

void resblock_backward(const ResBlockC& block, const Activation& x,
                       const Activation& g, ResBlockC& grad, Activation* dx) {
  const Activation a = conv2d_forward(block.conv1, x);
  const Activation r = relu(a);
  Activation dr;
  conv2d_backward(block.conv2, r, g, grad.conv2, &dr);
  const Activation da = relu_backward(a, dr);
  Activation dx_main;
  Activation dx_skip;
  conv2d_backward(block.conv1, x, da, grad.conv1, dx != nullptr ? &dx_main : nullptr);
  conv2d_backward(block.skip, x, g, grad.skip, dx != nullptr ? &dx_skip : nullptr);
  if (dx != nullptr) {
    *dx = std::move(dx_main);
    for (std::size_t i = 0; i < dx->data.size(); ++i) dx->data[i] += dx_skip.data[i];
  }
}

}  // namespace

Activation forward(const Network& net, const Activation& x) {
  check_input(net, x);
  Activation current = x;
  for (const auto& layer : net.layers) current = layer_forward(layer, current);
  return current;
}

ActivationTrace forward_trace(const Network& net, const Activation& x) {
  check_input(net, x);
  ActivationTrace trace;
  trace.input = x;
  trace.outputs.reserve(net.layers.size());
  const Activation* current = &trace.input;
  for (const auto& layer : net.layers) {
    trace.outputs.push_back(layer_forward(layer, *current));
    current = &trace.outputs.back();
  }
  return trace;
}

BackwardResult backward(const Network& net, const ActivationTrace& trace,
                        const Activation& loss_grad) {
  if (trace.outputs.size() != net.layers.size()) {
    throw ShapeError("activation trace does not match the network depth");
  }
  const Activation& final_out =
      trace.outputs.empty() ? trace.input : trace.outputs.back();
  if (loss_grad.shape != final_out.shape) {
    throw ShapeError(fmt::format("loss gradient shape [{}] does not match output [{}]",
                                 fmt::join(loss_grad.shape, ", "),
                                 fmt::join(final_out.shape, ", ")));
  }
  BackwardResult result{zeros_like(net), {}};
  Activation g = loss_grad;
  for (std::size_t idx = net.layers.size(); idx-- > 0;) {
    const Activation& in = idx == 0 ? trace.input : trace.outputs[idx - 1];
    const Activation& out = trace.outputs[idx];
    LayerSpec& grad_layer = result.param_grads.layers[idx];
    Activation dx;
    std::visit(
        [&](const auto& l) {
          using L = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<L, Linear>) {
            linear_backward(l, in, g, std::get<Linear>(grad_layer), &dx);
          } else if constexpr (std::is_same_v<L, Conv2d>) {
            conv2d_backward(l, in, g, std::get<Conv2d>(grad_layer), &dx);
          } else if constexpr (std::is_same_v<L, ReLU>) {
            dx = relu_backward(out, g);
          } else if constexpr (std::is_same_v<L, MaxPool2d>) {
            dx = maxpool2d_backward(l, in, g);
          } else if constexpr (std::is_same_v<L, Flatten>) {
            dx = g;
            dx.shape = in.shape;
          } else {
            resblock_backward(l, in, g, std::get<ResBlockC>(grad_layer), &dx);
          }
        },
        net.layers[idx]);
    g = std::move(dx);
  }
  result.input_grad = std::move(g);
  return result;
}

BackwardResult backward(const Network& net, const Activation& x,
                        const Activation& loss_grad) {
  return backward(net, forward_trace(net, x), loss_grad);
}

std::size_t count_normalized_elements(const Network& net) {
  std::size_t total = 0;
  for (const auto& layer : net.layers) {
    std::visit(
        [&](const auto& l) {
          using L = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<L, Linear> || std::is_same_v<L, Conv2d>) {
            total += l.weight.size();
          } else if constexpr (std::is_same_v<L, ResBlockC>) {
            total += l.conv1.weight.size() + l.conv2.weight.size() +
                     l.skip.weight.size();
          }
        },
        layer);
  }
  return total;
}

std::size_t count_parameters(const Network& net) {
  std::size_t total = 0;
  for_each_parameter(net, [&](std::span<const double> p) { total += p.size(); });
  return total;
}

Network zeros_like(const Network& net) {
  Network out = net;
  for_each_parameter(out, [](std::span<double> p) {
    std::fill(p.begin(), p.end(), 0.0);
  });
  return out;
}

void round_to_dtype(Network& net) {
  if (net.dtype != ScalarType::kF32) return;
  for_each_parameter(net, [](std::span<double> p) {
    for (double& v : p) v = static_cast<double>(static_cast<float>(v));
  });
}

}  // namespace enorm
