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

// Reference computations used by the tests. Nothing here calls into the
// balancer, so results can be compared against it.

#ifndef ENORM_TESTS_SUPPORT_ORACLES_HPP_
#define ENORM_TESTS_SUPPORT_ORACLES_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "enorm/model.hpp"
#include "enorm/tensor.hpp"

namespace enorm::oracle {

// Fully connected chain read out of a Linear/ReLU network.
struct FcChain {
  std::vector<Matrix> weights;  // (in, out) each
  std::vector<std::optional<Vector>> biases;
};

FcChain fc_chain(const Network& net);

// sum_k c_k sum_ij |W_k[i,j] * d_k[j] / d_{k-1}[i]|^p where d_0 and d_q are
// ones and hidden[k-1] holds d_k. Empty `c` means all ones.
double fc_rescaled_norm(const FcChain& chain, const std::vector<Vector>& hidden, double p,
                        std::span<const double> c = {});

// Hidden coefficients packed into one vector, in chain order.
std::vector<Vector> unpack_hidden(const FcChain& chain, std::span<const double> flat);
std::size_t hidden_count(const FcChain& chain);

struct GridResult {
  double value = 0.0;
  std::vector<double> log_point;
  std::size_t evaluations = 0;
};

// Minimizes f over log-space. An exhaustive grid of `coarse_points` per
// dimension over [-range, range] is followed by exhaustive 5^n local grids
// around the incumbent with the step halved until it drops below
// `resolution`.
GridResult grid_search_log(const std::function<double(std::span<const double>)>& f,
                           std::size_t dims, double range, std::size_t coarse_points,
                           double resolution);

// Central difference of f at x along every coordinate.
std::vector<double> central_gradient(const std::function<double(std::span<const double>)>& f,
                                     std::vector<double> x, double h);

// Direct seven-loop cross-correlation.
Activation direct_conv2d(const Activation& x, const Tensor4& w,
                         const std::optional<Vector>& bias, std::size_t stride,
                         std::size_t padding);

// Explicit D_{k-1}^-1 W_k D_k on a Linear/ReLU network, bias * D_k.
Network rescale_fc(const Network& net, const std::vector<Vector>& hidden);

// Random network families exercised by the preservation checks.
enum class Family { kFcBias, kConvReluConv, kConvMaxpoolConv, kResBlocks };
Network random_network(Family family, std::uint64_t seed,
                       ScalarType dtype = ScalarType::kF64);

// Log-uniform positive vector in [lo, hi].
Vector log_uniform(std::size_t n, std::mt19937_64& rng, double lo = 0.1, double hi = 10.0);

double max_abs_diff(std::span<const double> a, std::span<const double> b);

}  // namespace enorm::oracle

#endif  // ENORM_TESTS_SUPPORT_ORACLES_HPP_
