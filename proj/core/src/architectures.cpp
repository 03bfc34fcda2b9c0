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

#include "enorm/architectures.hpp"

#include <charconv>
#include <cmath>
#include <stdexcept>
#include <string>

#include <fmt/format.h>

#include "enorm/balancer.hpp"
#include "enorm/errors.hpp"

namespace enorm {

namespace {

void fill_init(std::span<double> values, std::size_t fan_in, std::size_t fan_out,
               Init init, std::mt19937_64& rng) {
  if (init == Init::kHe) {
    std::normal_distribution<double> dist(0.0,
                                          std::sqrt(2.0 / static_cast<double>(fan_in)));
    for (double& v : values) v = dist(rng);
  } else {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-a, a);
    for (double& v : values) v = dist(rng);
  }
}

}  // namespace

Network make_fc(std::span<const std::size_t> widths, bool bias, Init init,
                std::uint64_t seed, ScalarType dtype) {
  if (widths.size() < 2) throw std::invalid_argument("need at least two widths");
  std::mt19937_64 rng(seed);
  Network net;
  net.input_shape = {widths.front()};
  net.dtype = dtype;
  for (std::size_t k = 1; k < widths.size(); ++k) {
    Linear layer{Matrix(widths[k - 1], widths[k]), std::nullopt};
    fill_init(layer.weight.data(), widths[k - 1], widths[k], init, rng);
    if (bias) {
      // Small nonzero biases so that bias rescaling is exercised.
      std::uniform_real_distribution<double> dist(-0.1, 0.1);
      Vector b(widths[k]);
      for (double& v : b) v = dist(rng);
      layer.bias = std::move(b);
    }
    net.layers.emplace_back(std::move(layer));
    if (k + 1 < widths.size()) net.layers.emplace_back(ReLU{});
  }
  round_to_dtype(net);
  return net;
}

std::vector<std::size_t> parse_widths(std::string_view text) {
  std::vector<std::size_t> widths;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t dash = std::min(text.find('-', pos), text.size());
    std::size_t value = 0;
    const char* first = text.data() + pos;
    const char* last = text.data() + dash;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last || value == 0) {
      throw FormatError(fmt::format("bad layer widths '{}'", text));
    }
    widths.push_back(value);
    pos = dash + 1;
  }
  if (widths.size() < 2) throw FormatError(fmt::format("bad layer widths '{}'", text));
  return widths;
}

Conv2d make_conv(std::size_t in_channels, std::size_t out_channels,
                 std::size_t kernel, std::size_t stride, std::size_t padding,
                 bool bias, Init init, std::mt19937_64& rng) {
  Conv2d conv{Tensor4(out_channels, in_channels, kernel, kernel), std::nullopt,
              stride, padding};
  fill_init(conv.weight.data(), in_channels * kernel * kernel,
            out_channels * kernel * kernel, init, rng);
  if (bias) {
    std::uniform_real_distribution<double> dist(-0.1, 0.1);
    Vector b(out_channels);
    for (double& v : b) v = dist(rng);
    conv.bias = std::move(b);
  }
  return conv;
}

ResBlockC make_resblock(std::size_t in_channels, std::size_t out_channels,
                        std::size_t stride, bool bias, Init init,
                        std::mt19937_64& rng) {
  ResBlockC block;
  block.conv1 = make_conv(in_channels, out_channels, 3, stride, 1, bias, init, rng);
  block.conv2 = make_conv(out_channels, out_channels, 3, 1, 1, bias, init, rng);
  block.skip = make_conv(in_channels, out_channels, 1, stride, 0, bias, init, rng);
  return block;
}

Network make_resnet18c(std::size_t num_classes, std::size_t image_size,
                       std::uint64_t seed, ScalarType dtype) {
  std::mt19937_64 rng(seed);
  Network net;
  net.input_shape = {3, image_size, image_size};
  net.dtype = dtype;
  net.layers.emplace_back(make_conv(3, 64, 7, 2, 3, false, Init::kHe, rng));
  net.layers.emplace_back(ReLU{});
  net.layers.emplace_back(MaxPool2d{2, 2});
  std::size_t channels = 64;
  for (std::size_t stage = 0; stage < 4; ++stage) {
    const std::size_t width = std::size_t{64} << stage;
    for (std::size_t b = 0; b < 2; ++b) {
      const std::size_t stride = (stage > 0 && b == 0) ? 2 : 1;
      net.layers.emplace_back(make_resblock(channels, width, stride, false, Init::kHe, rng));
      net.layers.emplace_back(ReLU{});
      channels = width;
    }
  }
  const Shape features = output_shape(net);
  net.layers.emplace_back(MaxPool2d{features[1], features[1]});
  net.layers.emplace_back(Flatten{});
  Linear fc{Matrix(channels, num_classes), Vector(num_classes, 0.0)};
  fill_init(fc.weight.data(), channels, num_classes, Init::kHe, rng);
  net.layers.emplace_back(std::move(fc));
  round_to_dtype(net);
  return net;
}

void scale_weight_unit(Network& net, std::size_t unit, double factor) {
  const auto units = weight_units(net);
  if (unit >= units.size()) {
    throw std::out_of_range(fmt::format("network has {} weight tensors", units.size()));
  }
  const UnitRef ref = units[unit];
  std::visit(
      [&](auto& l) {
        using L = std::decay_t<decltype(l)>;
        auto scale = [&](std::span<double> v) {
          for (double& x : v) x *= factor;
        };
        if constexpr (std::is_same_v<L, Linear> || std::is_same_v<L, Conv2d>) {
          scale(l.weight.data());
        } else if constexpr (std::is_same_v<L, ResBlockC>) {
          if (ref.part == UnitPart::kConv1) scale(l.conv1.weight.data());
          if (ref.part == UnitPart::kConv2) scale(l.conv2.weight.data());
          if (ref.part == UnitPart::kSkip) scale(l.skip.weight.data());
        }
      },
      net.layers[ref.layer]);
  round_to_dtype(net);
}

}  // namespace enorm
