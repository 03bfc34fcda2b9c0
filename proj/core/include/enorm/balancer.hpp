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

// Equi-normalization: coordinate descent on per-neuron rescaling
// coefficients that minimizes the global l_p norm of the weights while
// leaving the network function unchanged.

#ifndef ENORM_BALANCER_HPP_
#define ENORM_BALANCER_HPP_

#include <cstddef>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "enorm/model.hpp"
#include "enorm/tensor.hpp"

namespace enorm {

// Diagonal of a rescaling matrix D_k. Every entry is strictly positive.
class RescalingVector {
 public:
  RescalingVector() = default;
  explicit RescalingVector(std::vector<double> values);
  RescalingVector(std::initializer_list<double> values)
      : RescalingVector(std::vector<double>(values)) {}
  static RescalingVector ones(std::size_t n);

  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> values() const noexcept { return values_; }
  RescalingVector inverse() const;
  // max_i |d[i] - 1|
  double max_deviation() const noexcept;

  bool operator==(const RescalingVector&) const = default;

 private:
  std::vector<double> values_;
};

struct AsymmetricMode {
  enum class Kind { kOff, kUniform, kAdaptive };
  Kind kind = Kind::kOff;
  double c = 1.0;  // only used by kUniform

  static AsymmetricMode off() { return {}; }
  static AsymmetricMode uniform(double c);
  static AsymmetricMode adaptive() { return {Kind::kAdaptive, 1.0}; }
};

// c_1..c_q for a chain whose widths are layer_sizes = (n_0, ..., n_q).
//   uniform:  c_k = c^(p (q - k))
//   adaptive: c_k = 1 / (n_{k-1} n_k)
std::vector<double> asymmetric_coefficients(const AsymmetricMode& mode, double p,
                                            std::span<const std::size_t> layer_sizes);

// ---------------------------------------------------------------------------
// Pair primitives on 2-D matrices.

// d[i] = sqrt(||right[i, :]||_p / ||left[:, i]||_p) * c_ratio^(1/(2p)).
// Throws DisconnectedNeuronError when a norm is zero.
RescalingVector pair_coefficients(const Matrix& left, const Matrix& right, double p,
                                  double c_ratio = 1.0);

struct PairRescaling {
  Matrix left;
  Matrix right;
  std::optional<Vector> bias_left;
};

// left * diag(d), diag(d)^-1 * right, bias_left * d.
PairRescaling apply_pair_rescaling(const Matrix& left, const Matrix& right,
                                   const std::optional<Vector>& bias_left,
                                   const RescalingVector& d);

struct ConvPairRescaling {
  Tensor4 left;
  Tensor4 right;
  std::optional<Vector> bias_left;
  RescalingVector coefficients;
};

// Balances the channel boundary between two consecutive convolutions through
// their 2-D reshapes.
ConvPairRescaling conv_pair_update(const Tensor4& conv_k, const Tensor4& conv_k1,
                                   const std::optional<Vector>& bias_k, double p,
                                   double c_ratio = 1.0);

// ---------------------------------------------------------------------------
// Residual blocks.

// Parallel equivalent of conv1 and the shortcut, shaped
// (block out channels, block in channels, S, S). Entry-wise
//   |eq| = (|conv1|^p + |skip padded to S x S|^p)^(1/p)
// with the sign of the shortcut entry (or of conv1 where the shortcut is 0),
// so per-input-channel norms equal the norms over the union of both branches.
// Requires conv1 to have as many filters as the block has output channels.
Tensor4 block_equivalent_weight(const ResBlockC& block, double p = 2.0);

struct ResBlockRescaling {
  ResBlockC block;
  RescalingVector internal;  // conv1 -> conv2 coefficients
};

// conv1 and skip are left-rescaled by prev_d, conv2 and skip are
// right-rescaled by next_d, then conv1/conv2 are balanced as a pair.
// The result satisfies block'(x * prev_d) == block(x) * next_d per channel.
ResBlockRescaling balance_resblock(const RescalingVector& prev_d,
                                   const ResBlockC& block,
                                   const RescalingVector& next_d, double p = 2.0);

// ---------------------------------------------------------------------------
// Whole networks.

enum class UnitPart { kMain, kConv1, kConv2, kSkip };

// One weight tensor: a linear/conv layer, or a convolution inside a block.
struct UnitRef {
  std::size_t layer = 0;
  UnitPart part = UnitPart::kMain;
  bool operator==(const UnitRef&) const = default;
};

struct Consumer {
  UnitRef unit;
  std::size_t group = 1;  // input rows per channel (> 1 after a flatten)
  bool operator==(const Consumer&) const = default;
};

// A set of hidden channels rescaled together: producers have their output
// channels multiplied by d, consumers have their input channels divided by d.
struct Boundary {
  std::vector<UnitRef> producers;
  std::vector<Consumer> consumers;
  std::size_t channels = 0;
};

// Boundaries in left-to-right sweep order. ReLU, max-pool and flatten layers
// are transparent. The network input and output are never rescaled.
std::vector<Boundary> find_boundaries(const Network& net);

// Every weight tensor in network order.
std::vector<UnitRef> weight_units(const Network& net);

std::span<const double> unit_data(const Network& net, UnitRef unit);
std::string unit_name(const Network& net, UnitRef unit);
// Weight tensor as (input rows) x (output channels); conv filters are
// reshaped with conv_to_left_matrix.
Matrix unit_left_matrix(const Network& net, UnitRef unit);

// Per-boundary coefficients, aligned with find_boundaries().
struct RescalingPlan {
  std::vector<RescalingVector> boundaries;

  static RescalingPlan identity(const Network& net);
  // Elementwise product, this applied first.
  RescalingPlan then(const RescalingPlan& next) const;
  double max_deviation() const noexcept;
};

// Weight law: producers * d, producer biases * d, consumers / d.
void apply_rescaling(Network& net, const RescalingPlan& plan);

// Gradient law for momentum buffers shaped like the network:
// buffer(W_k) <- D_{k-1} buffer(W_k) D_k^-1, buffer(b_k) <- buffer(b_k) D_k^-1.
void rescale_momentum(Network& buffers, const RescalingPlan& plan);

// Throws DisconnectedNeuronError naming the first hidden channel with a zero
// incoming or outgoing weight norm.
void validate_connectivity(const Network& net, double p = 2.0);

// c_k for every weight unit (all ones when the mode is off). Asymmetric
// modes are restricted to networks without residual blocks.
std::vector<double> unit_weights(const Network& net, const AsymmetricMode& mode,
                                 double p);

// Per-layer output scaling implied by a plan: element k is the per-channel
// (or per-feature) factor of layers[k]'s output, empty where it is identity.
std::vector<Vector> activation_scalings(const Network& net, const RescalingPlan& plan);

struct CycleResult {
  RescalingPlan coefficients;
  double max_deviation = 0.0;
  double lp_norm = 0.0;  // weighted global l_p norm after the cycle
};

// One left-to-right sweep over every boundary.
CycleResult enorm_cycle(Network& net, double p = 2.0,
                        const AsymmetricMode& mode = AsymmetricMode::off());

struct BalanceOptions {
  double p = 2.0;
  AsymmetricMode mode;
  std::size_t max_cycles = 100;
  double tol = 1e-9;
};

struct BalanceReport {
  std::size_t cycles_run = 0;
  double initial_lp_norm = 0.0;
  std::vector<double> lp_norm_per_cycle;
  std::vector<double> max_dev_per_cycle;
  double max_coeff_deviation = 0.0;
  bool converged = false;
  RescalingPlan total;  // cumulative coefficients applied by the run
};

// Runs cycles until max |d - 1| < tol or max_cycles is reached.
// Non-convergence is reported, not thrown.
BalanceReport balance(Network& net, const BalanceOptions& options = {});

}  // namespace enorm

#endif  // ENORM_BALANCER_HPP_
