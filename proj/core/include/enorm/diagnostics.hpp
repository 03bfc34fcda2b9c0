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

// Measurement utilities: global norms, energy profiles, functional
// equivalence checks and canonicalization checks.

#ifndef ENORM_DIAGNOSTICS_HPP_
#define ENORM_DIAGNOSTICS_HPP_

#include <cstdint>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "enorm/balancer.hpp"
#include "enorm/model.hpp"

namespace enorm {

// sum_k c_k ||W_k||_p^p over every weight tensor; biases are excluded.
double global_lp_norm(const Network& net, double p = 2.0,
                      const AsymmetricMode& mode = AsymmetricMode::off());

struct EnergyProfile {
  struct Unit {
    std::string name;
    std::vector<double> column_norms;  // l2 norm per neuron / output filter
  };
  std::vector<Unit> units;
};

EnergyProfile energy_profile(const Network& net);

struct EquivalenceVerdict {
  double max_abs_output_diff = 0.0;
  // Filled when a plan relating the two networks is supplied.
  std::vector<double> max_abs_activation_diff_per_layer;
  bool pass = false;
};

// Compares outputs of two same-architecture networks on `inputs`. When
// b_from_a is given (b = a rescaled by it), every intermediate activation of
// b is divided by its known scaling and compared against a's as well.
EquivalenceVerdict check_equivalence(const Network& a, const Network& b,
                                     const Activation& inputs, double tol,
                                     const std::optional<RescalingPlan>& b_from_a = {});

// Standard-normal batch of `count` samples with the given per-sample shape.
Activation random_batch(const Shape& sample_shape, std::size_t count,
                        std::uint64_t seed);

enum class RescalingSampler {
  kLogUniform,  // d ~ exp(U[log lo, log hi])
  kExtremes,    // d in {lo, hi}
  kIdentity,
};

RescalingPlan random_rescaling(const Network& net, std::mt19937_64& rng,
                               RescalingSampler sampler = RescalingSampler::kLogUniform,
                               double lo = 0.1, double hi = 10.0);

// max over weight tensors of ||A - B||_F / ||B||_F.
double max_relative_deviation(const Network& a, const Network& b);

struct CanonicalizationOptions {
  std::size_t rescalings = 5;
  std::uint64_t seed = 0;
  double tol = 1e-6;
  RescalingSampler sampler = RescalingSampler::kLogUniform;
  BalanceOptions balance{2.0, AsymmetricMode::off(), 2000, 1e-13};
};

struct CanonicalizationResult {
  bool pass = false;
  bool all_converged = false;
  double max_deviation = 0.0;
};

// Balances the network and `rescalings` random rescalings of it, and checks
// that every run lands on the same weights.
CanonicalizationResult canonicalization_check(const Network& net,
                                              const CanonicalizationOptions& options);

// CSV writers. Doubles are printed with 17 significant digits.
void write_energy_csv(std::ostream& out, const EnergyProfile& profile);
void write_balance_report_csv(std::ostream& out, const BalanceReport& report);

}  // namespace enorm

#endif  // ENORM_DIAGNOSTICS_HPP_
