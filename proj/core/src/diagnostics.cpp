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

#include "enorm/diagnostics.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "enorm/errors.hpp"

namespace enorm {

double global_lp_norm(const Network& net, double p, const AsymmetricMode& mode) {
  const auto units = weight_units(net);
  const auto c = unit_weights(net, mode, p);
  double total = 0.0;
  for (std::size_t k = 0; k < units.size(); ++k) {
    double sum = 0.0;
    for (double w : unit_data(net, units[k])) sum += abs_pow(w, p);
    total += c[k] * sum;
  }
  return total;
}

EnergyProfile energy_profile(const Network& net) {
  EnergyProfile profile;
  for (const UnitRef& u : weight_units(net)) {
    const Matrix m = unit_left_matrix(net, u);
    profile.units.push_back({unit_name(net, u), pnorm_cols(m, 2.0)});
  }
  return profile;
}

namespace {

double max_abs_diff(const Activation& a, const Activation& b) {
  double diff = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    diff = std::max(diff, std::fabs(a.data[i] - b.data[i]));
  }
  return diff;
}

// Divides each channel (or feature) of x by its factor.
Activation unscale(const Activation& x, const Vector& factors) {
  if (factors.empty()) return x;
  Activation out = x;
  const std::size_t channels = x.shape[1];
  if (factors.size() != channels) throw ShapeError("scaling does not match activation");
  const std::size_t inner = x.sample_size() / channels;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] /= factors[(i / inner) % channels];
  }
  return out;
}

bool same_architecture(const Network& a, const Network& b) {
  if (a.input_shape != b.input_shape || a.layers.size() != b.layers.size()) return false;
  for (std::size_t k = 0; k < a.layers.size(); ++k) {
    if (a.layers[k].index() != b.layers[k].index()) return false;
  }
  return layer_output_shapes(a) == layer_output_shapes(b);
}

}  // namespace

EquivalenceVerdict check_equivalence(const Network& a, const Network& b,
                                     const Activation& inputs, double tol,
                                     const std::optional<RescalingPlan>& b_from_a) {
  if (!same_architecture(a, b)) {
    throw ShapeError("equivalence check needs identical architectures");
  }
  const ActivationTrace ta = forward_trace(a, inputs);
  const ActivationTrace tb = forward_trace(b, inputs);
  EquivalenceVerdict verdict;
  const Activation& out_a = ta.outputs.empty() ? ta.input : ta.outputs.back();
  const Activation& out_b = tb.outputs.empty() ? tb.input : tb.outputs.back();
  verdict.max_abs_output_diff = max_abs_diff(out_a, out_b);
  double worst = verdict.max_abs_output_diff;
  if (b_from_a) {
    const std::vector<Vector> scalings = activation_scalings(b, *b_from_a);
    for (std::size_t k = 0; k < ta.outputs.size(); ++k) {
      const double d = max_abs_diff(ta.outputs[k], unscale(tb.outputs[k], scalings[k]));
      verdict.max_abs_activation_diff_per_layer.push_back(d);
      worst = std::max(worst, d);
    }
  }
  verdict.pass = std::isfinite(worst) && worst <= tol;
  return verdict;
}

Activation random_batch(const Shape& sample_shape, std::size_t count,
                        std::uint64_t seed) {
  Shape shape{count};
  shape.insert(shape.end(), sample_shape.begin(), sample_shape.end());
  Activation x(shape);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& v : x.data) v = normal(rng);
  return x;
}

RescalingPlan random_rescaling(const Network& net, std::mt19937_64& rng,
                               RescalingSampler sampler, double lo, double hi) {
  if (!(lo > 0.0) || !(hi >= lo)) throw std::invalid_argument("need 0 < lo <= hi");
  std::uniform_real_distribution<double> uniform(std::log(lo), std::log(hi));
  std::bernoulli_distribution coin(0.5);
  RescalingPlan plan;
  for (const Boundary& b : find_boundaries(net)) {
    std::vector<double> d(b.channels, 1.0);
    for (double& v : d) {
      switch (sampler) {
        case RescalingSampler::kLogUniform: v = std::exp(uniform(rng)); break;
        case RescalingSampler::kExtremes: v = coin(rng) ? hi : lo; break;
        case RescalingSampler::kIdentity: break;
      }
    }
    plan.boundaries.emplace_back(std::move(d));
  }
  return plan;
}

double max_relative_deviation(const Network& a, const Network& b) {
  const auto units_a = weight_units(a);
  const auto units_b = weight_units(b);
  if (units_a.size() != units_b.size()) {
    throw ShapeError("networks have different weight tensors");
  }
  double worst = 0.0;
  for (std::size_t k = 0; k < units_a.size(); ++k) {
    auto wa = unit_data(a, units_a[k]);
    auto wb = unit_data(b, units_b[k]);
    if (wa.size() != wb.size()) throw ShapeError("weight tensor sizes differ");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < wa.size(); ++i) {
      num += (wa[i] - wb[i]) * (wa[i] - wb[i]);
      den += wb[i] * wb[i];
    }
    worst = std::max(worst, den > 0.0 ? std::sqrt(num / den) : std::sqrt(num));
  }
  return worst;
}

CanonicalizationResult canonicalization_check(const Network& net,
                                              const CanonicalizationOptions& options) {
  Network reference = net;
  const BalanceReport ref_report = balance(reference, options.balance);
  CanonicalizationResult result;
  result.all_converged = ref_report.converged;
  std::mt19937_64 rng(options.seed);
  for (std::size_t r = 0; r < options.rescalings; ++r) {
    Network candidate = net;
    apply_rescaling(candidate, random_rescaling(net, rng, options.sampler));
    const BalanceReport report = balance(candidate, options.balance);
    result.all_converged = result.all_converged && report.converged;
    result.max_deviation =
        std::max(result.max_deviation, max_relative_deviation(candidate, reference));
  }
  result.pass = result.all_converged && result.max_deviation <= options.tol;
  return result;
}

void write_energy_csv(std::ostream& out, const EnergyProfile& profile) {
  fmt::print(out, "unit,name,neuron,norm\n");
  for (std::size_t u = 0; u < profile.units.size(); ++u) {
    const auto& unit = profile.units[u];
    for (std::size_t j = 0; j < unit.column_norms.size(); ++j) {
      fmt::print(out, "{},{},{},{:.17g}\n", u, unit.name, j, unit.column_norms[j]);
    }
  }
}

void write_balance_report_csv(std::ostream& out, const BalanceReport& report) {
  fmt::print(out, "cycle,lp_norm,max_dev\n");
  for (std::size_t c = 0; c < report.lp_norm_per_cycle.size(); ++c) {
    fmt::print(out, "{},{:.17g},{:.17g}\n", c + 1, report.lp_norm_per_cycle[c],
               report.max_dev_per_cycle[c]);
  }
}

}  // namespace enorm
