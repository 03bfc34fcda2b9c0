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

#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "enorm/architectures.hpp"
#include "enorm/balancer.hpp"
#include "enorm/diagnostics.hpp"
#include "enorm/errors.hpp"
#include "oracles.hpp"

namespace enorm {
namespace {

Network chain(const std::vector<Matrix>& weights) {
  Network net;
  net.input_shape = {weights.front().rows()};
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (k > 0) net.layers.emplace_back(ReLU{});
    net.layers.emplace_back(Linear{weights[k], std::nullopt});
  }
  return net;
}

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

TEST(GlobalNorm, OneTwoOne) {
  Network net = chain({Matrix::from_rows({{1, 2}}), Matrix::from_rows({{4}, {1}})});
  EXPECT_EQ(global_lp_norm(net, 2.0), 22.0);
  enorm_cycle(net, 2.0);
  EXPECT_NEAR(global_lp_norm(net, 2.0), 12.0, 1e-12);
}

TEST(GlobalNorm, ZeroMatrix) {
  EXPECT_EQ(global_lp_norm(chain({Matrix(2, 3, 0.0)}), 2.0), 0.0);
}

TEST(GlobalNorm, BiasesExcludedAndWeighted) {
  Network net;
  net.input_shape = {1};
  net.layers.emplace_back(Linear{Matrix(1, 2, 1.0), Vector{5, 5}});
  net.layers.emplace_back(ReLU{});
  net.layers.emplace_back(Linear{Matrix(2, 1, 2.0), std::nullopt});
  EXPECT_EQ(global_lp_norm(net, 2.0), 10.0);
  EXPECT_EQ(global_lp_norm(net, 1.0), 6.0);
  EXPECT_NEAR(global_lp_norm(net, 2.0, AsymmetricMode::uniform(2.0)), 2.0 * 4 + 8.0, 1e-12);
}

TEST(EnergyProfile, ColumnNorms) {
  const EnergyProfile profile = energy_profile(chain({Matrix::from_rows({{3, 0}, {4, 0}})}));
  ASSERT_EQ(profile.units.size(), 1u);
  EXPECT_EQ(profile.units[0].column_norms, (std::vector<double>{5, 0}));
}

TEST(EnergyProfile, BalancedOneOneOne) {
  Network net = chain({Matrix::from_rows({{2}}), Matrix::from_rows({{0.5}})});
  balance(net);
  const EnergyProfile profile = energy_profile(net);
  ASSERT_EQ(profile.units.size(), 2u);
  EXPECT_NEAR(profile.units[0].column_norms[0], 1.0, 1e-12);
  EXPECT_NEAR(profile.units[1].column_norms[0], 1.0, 1e-12);
}

TEST(EnergyProfile, UnbalancedDeepNetRealigns) {
  const std::vector<std::size_t> widths(21, 500);
  Network net = make_fc(widths, false, Init::kXavier, 1);
  scale_weight_unit(net, 5, 1.2);
  scale_weight_unit(net, 11, 0.8);
  auto ratio = [&](std::size_t unit) {
    const EnergyProfile p = energy_profile(net);
    const double neighbors =
        0.5 * (mean(p.units[unit - 1].column_norms) + mean(p.units[unit + 1].column_norms));
    return mean(p.units[unit].column_norms) / neighbors;
  };
  EXPECT_NEAR(ratio(5), 1.2, 0.02);
  EXPECT_NEAR(ratio(11), 0.8, 0.02);
  balance(net, {2.0, AsymmetricMode::off(), 30, 1e-9});
  EXPECT_NEAR(ratio(5), 1.0, 0.01);
  EXPECT_NEAR(ratio(11), 1.0, 0.01);
}

TEST(EnergyProfile, DependsOnWeightsOnly) {
  const Network net = oracle::random_network(oracle::Family::kConvMaxpoolConv, 2);
  const EnergyProfile before = energy_profile(net);
  Activation x = random_batch(net.input_shape, 6, 1);
  forward(net, x);
  const EnergyProfile after = energy_profile(net);
  ASSERT_EQ(before.units.size(), after.units.size());
  for (std::size_t u = 0; u < before.units.size(); ++u) {
    EXPECT_EQ(before.units[u].name, after.units[u].name);
    EXPECT_EQ(before.units[u].column_norms, after.units[u].column_norms);
  }
}

TEST(Equivalence, SelfBalancedAndPerturbed) {
  const Network net = oracle::random_network(oracle::Family::kResBlocks, 12);
  const Activation x = random_batch(net.input_shape, 32, 4);
  const auto self = check_equivalence(net, net, x, 0.0);
  EXPECT_EQ(self.max_abs_output_diff, 0.0);
  EXPECT_TRUE(self.pass);

  Network balanced = net;
  balance(balanced);
  EXPECT_TRUE(check_equivalence(net, balanced, x, 1e-10).pass);

  Network perturbed = net;
  for_each_parameter(perturbed, [first = true](std::span<double> s) mutable {
    if (first) s[0] += 0.1;
    first = false;
  });
  EXPECT_FALSE(check_equivalence(net, perturbed, x, 1e-10).pass);
}

TEST(Equivalence, Symmetric) {
  const Network a = oracle::random_network(oracle::Family::kFcBias, 3);
  Network b = a;
  std::mt19937_64 rng(1);
  apply_rescaling(b, random_rescaling(a, rng));
  const Activation x = random_batch(a.input_shape, 16, 9);
  EXPECT_EQ(check_equivalence(a, b, x, 1e-9).max_abs_output_diff,
            check_equivalence(b, a, x, 1e-9).max_abs_output_diff);
}

TEST(Equivalence, ArchitectureMismatch) {
  const Network a = oracle::random_network(oracle::Family::kFcBias, 3);
  const Network b = oracle::random_network(oracle::Family::kFcBias, 4);
  EXPECT_THROW(check_equivalence(a, b, random_batch(a.input_shape, 2, 1), 1e-9), ShapeError);
}

TEST(Canonicalization, IdentityRescaling) {
  const Network net = oracle::random_network(oracle::Family::kFcBias, 5);
  CanonicalizationOptions opt;
  opt.rescalings = 1;
  opt.sampler = RescalingSampler::kIdentity;
  const auto r = canonicalization_check(net, opt);
  EXPECT_TRUE(r.pass);
  EXPECT_EQ(r.max_deviation, 0.0);
}

TEST(Canonicalization, RandomAndExtremeRescalings) {
  const std::vector<std::size_t> widths{4, 3, 3, 2};
  const Network net = make_fc(widths, true, Init::kHe, 14);
  for (auto sampler : {RescalingSampler::kLogUniform, RescalingSampler::kExtremes}) {
    CanonicalizationOptions opt;
    opt.rescalings = 5;
    opt.sampler = sampler;
    const auto r = canonicalization_check(net, opt);
    EXPECT_TRUE(r.all_converged);
    EXPECT_TRUE(r.pass);
    EXPECT_LT(r.max_deviation, 1e-6);
  }
}

TEST(Canonicalization, ConvAndResidualNets) {
  for (auto family : {oracle::Family::kConvMaxpoolConv, oracle::Family::kResBlocks}) {
    CanonicalizationOptions opt;
    opt.seed = 3;
    EXPECT_TRUE(canonicalization_check(oracle::random_network(family, 21), opt).pass);
  }
}

TEST(MinimumNorm, BalancedBeatsRandomRescalings) {
  std::mt19937_64 rng(123);
  for (auto family : {oracle::Family::kFcBias, oracle::Family::kConvReluConv,
                      oracle::Family::kResBlocks}) {
    const Network net = oracle::random_network(family, 50);
    Network balanced = net;
    balance(balanced, {2.0, AsymmetricMode::off(), 5000, 1e-12});
    const double best = global_lp_norm(balanced);
    for (int i = 0; i < 100; ++i) {
      Network other = net;
      apply_rescaling(other, random_rescaling(net, rng));
      EXPECT_LE(best, global_lp_norm(other) * (1 + 1e-12));
    }
  }
}

TEST(Csv, BalanceReportSchema) {
  Network net = chain({Matrix::from_rows({{1, 2}}), Matrix::from_rows({{4}, {1}})});
  const BalanceReport r = balance(net, {2.0, AsymmetricMode::off(), 10, 1e-9});
  std::ostringstream out;
  write_balance_report_csv(out, r);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "cycle,lp_norm,max_dev");
  std::getline(in, line);
  EXPECT_EQ(line.rfind("1,12,", 0), 0u) << line;
  std::size_t rows = 1;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, r.cycles_run);
}

TEST(Csv, EnergySchema) {
  std::ostringstream out;
  write_energy_csv(out, energy_profile(chain({Matrix::from_rows({{3, 0}, {4, 0}})})));
  std::istringstream in(out.str());
  std::string header, first, second;
  std::getline(in, header);
  std::getline(in, first);
  std::getline(in, second);
  EXPECT_EQ(header, "unit,name,neuron,norm");
  EXPECT_EQ(first.substr(first.rfind(',')), ",5");
  EXPECT_EQ(second.substr(second.rfind(',')), ",0");
}

}  // namespace
}  // namespace enorm
