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

#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "enorm/architectures.hpp"
#include "enorm/balancer.hpp"
#include "enorm/io.hpp"
#include "enorm_cli/cli.hpp"
#include "oracles.hpp"

namespace enorm {
namespace {

namespace fs = std::filesystem;

struct CliRun {
  int code;
  std::string out, err;
};

CliRun run(std::vector<std::string> args) {
  args.insert(args.begin(), "enorm");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  ::testing::internal::CaptureStdout();
  ::testing::internal::CaptureStderr();
  const int code = cli::cli_main(static_cast<int>(argv.size()), argv.data());
  std::string out = ::testing::internal::GetCapturedStdout();
  std::string err = ::testing::internal::GetCapturedStderr();
  return {code, std::move(out), std::move(err)};
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           (std::string("enorm_cli_") +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string at(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

TEST_F(CliTest, CheckAcceptsBalancedCopy) {
  save_network(oracle::random_network(oracle::Family::kConvMaxpoolConv, 4), at("a.enorm"));
  ASSERT_EQ(run({"balance", "--net", at("a.enorm"), "--out", at("b.enorm")}).code, 0);
  const CliRun r = run({"check", "--net-a", at("a.enorm"), "--net-b", at("b.enorm")});
  EXPECT_EQ(r.code, cli::kExitOk);
  EXPECT_NE(r.out.find("verdict: equivalent"), std::string::npos) << r.out;
}

TEST_F(CliTest, CheckRejectsPerturbedNetwork) {
  Network net = oracle::random_network(oracle::Family::kFcBias, 4);
  save_network(net, at("a.enorm"));
  std::get<Linear>(net.layers[0]).weight(0, 0) += 0.01;
  save_network(net, at("b.enorm"));
  EXPECT_EQ(run({"check", "--net-a", at("a.enorm"), "--net-b", at("b.enorm")}).code,
            cli::kExitCheckFailed);
}

TEST_F(CliTest, BalanceReportsDisconnectedNeuron) {
  Network net = make_fc(std::vector<std::size_t>{3, 4, 2}, true, Init::kHe, 1);
  auto& w = std::get<Linear>(net.layers[0]).weight;
  for (std::size_t i = 0; i < w.rows(); ++i) w(i, 2) = 0.0;
  std::get<Linear>(net.layers[0]).bias->at(2) = 0.0;
  save_network(net, at("dead.enorm"));
  const CliRun r = run({"balance", "--net", at("dead.enorm"), "--out", at("out.enorm")});
  EXPECT_EQ(r.code, cli::kExitUsage);
  EXPECT_NE(r.err.find("disconnected neuron"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(at("out.enorm")));
}

TEST_F(CliTest, BalanceIsIdempotent) {
  save_network(oracle::random_network(oracle::Family::kResBlocks, 2), at("a.enorm"));
  ASSERT_EQ(run({"balance", "--net", at("a.enorm"), "--out", at("b.enorm"), "--cycles", "500"}).code,
            0);
  ASSERT_EQ(run({"balance", "--net", at("b.enorm"), "--out", at("c.enorm"), "--report",
                 at("r.csv")})
                .code,
            0);
  std::istringstream csv(slurp(at("r.csv")));
  std::string header, first;
  std::getline(csv, header);
  std::getline(csv, first);
  EXPECT_EQ(header, "cycle,lp_norm,max_dev");
  EXPECT_LT(std::stod(first.substr(first.rfind(',') + 1)), 1e-9) << first;
}

TEST_F(CliTest, CountsResnetElements) {
  ASSERT_EQ(run({"generate", "--arch", "resnet18c", "--dtype", "f32", "--out", at("r.enorm")}).code,
            0);
  const CliRun r = run({"inspect", "--net", at("r.enorm"), "--count-elements"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("normalized_elements: 12031168"), std::string::npos) << r.out;
}

TEST_F(CliTest, InspectWritesEnergyProfile) {
  ASSERT_EQ(run({"generate", "--arch", "fc:5-7-3", "--out", at("n.enorm")}).code, 0);
  ASSERT_EQ(run({"inspect", "--net", at("n.enorm"), "--energy", at("e.csv")}).code, 0);
  std::istringstream csv(slurp(at("e.csv")));
  std::string line;
  std::size_t rows = 0;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, 1u + 7u + 3u);  // header plus one row per neuron of each unit
}

TEST_F(CliTest, CanonAgreesAcrossRescalings) {
  save_network(oracle::random_network(oracle::Family::kConvReluConv, 9), at("a.enorm"));
  const CliRun r = run({"canon", "--net", at("a.enorm"), "--rescalings", "3"});
  EXPECT_EQ(r.code, 0) << r.out;
}

TEST_F(CliTest, TrainIsDeterministic) {
  std::ofstream(at("run.json")) << R"({"dataset": "synthetic_classification", "samples": 120,
    "outputs": 3, "architecture": "6-12-3", "epochs": 2, "learning_rate": 0.05,
    "momentum": 0.9, "batch_size": 16, "enorm_cycles": 1, "seed": 5})";
  ASSERT_EQ(run({"train", "--config", at("run.json"), "--out", at("r1")}).code, 0);
  ASSERT_EQ(run({"train", "--config", at("run.json"), "--out", at("r2")}).code, 0);
  for (const char* name : {"metrics.csv", "epochs.csv", "energy_epoch_001.csv", "network.enorm"}) {
    const std::string a = slurp(dir_ / "r1" / name);
    EXPECT_FALSE(a.empty()) << name;
    EXPECT_EQ(a, slurp(dir_ / "r2" / name)) << name;
  }
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(run({}).code, cli::kExitUsage);
  EXPECT_EQ(run({"check", "--net-a", at("x.enorm")}).code, cli::kExitUsage);
  EXPECT_EQ(run({"inspect", "--net", at("missing.enorm")}).code, cli::kExitUsage);
  EXPECT_EQ(run({"balance", "--net", at("x"), "--out", at("y"), "--uniform-c", "1.2", "--adaptive"})
                .code,
            cli::kExitUsage);
  EXPECT_EQ(run({"train", "--config", at("missing.json")}).code, cli::kExitUsage);
}

}  // namespace
}  // namespace enorm
