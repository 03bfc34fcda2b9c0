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

// Network builders used by the CLI, the tests and the benchmarks.

#ifndef ENORM_ARCHITECTURES_HPP_
#define ENORM_ARCHITECTURES_HPP_

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "enorm/model.hpp"

namespace enorm {

enum class Init {
  kHe,      // N(0, 2 / fan_in)
  kXavier,  // U(-a, a), a = sqrt(6 / (fan_in + fan_out))
};

// Linear layers of the given widths with a ReLU between consecutive ones and
// none after the last.
Network make_fc(std::span<const std::size_t> widths, bool bias, Init init,
                std::uint64_t seed, ScalarType dtype = ScalarType::kF64);

// "784-1000-500-10" -> {784, 1000, 500, 10}
std::vector<std::size_t> parse_widths(std::string_view text);

Conv2d make_conv(std::size_t in_channels, std::size_t out_channels,
                 std::size_t kernel, std::size_t stride, std::size_t padding,
                 bool bias, Init init, std::mt19937_64& rng);

ResBlockC make_resblock(std::size_t in_channels, std::size_t out_channels,
                        std::size_t stride, bool bias, Init init,
                        std::mt19937_64& rng);

// 18-layer residual network with learned 1x1 shortcuts on every block
// (stem conv 7x7/2, max-pool, four stages of two blocks with 64-128-256-512
// channels, global max-pool, classifier).
Network make_resnet18c(std::size_t num_classes = 1000, std::size_t image_size = 224,
                       std::uint64_t seed = 0, ScalarType dtype = ScalarType::kF32);

// Multiplies every weight of the k-th weight tensor (0-based) by factor.
void scale_weight_unit(Network& net, std::size_t unit, double factor);

}  // namespace enorm

#endif  // ENORM_ARCHITECTURES_HPP_
