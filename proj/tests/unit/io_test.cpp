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
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "enorm/architectures.hpp"
#include "enorm/errors.hpp"
#include "enorm/io.hpp"
#include "enorm/trainer.hpp"
#include "oracles.hpp"

namespace enorm {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("enorm_io_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)) + "_" +
             ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

// Splits a container into its manifest and blob.
std::pair<json, std::string> split(const std::string& bytes) {
  std::uint64_t len = 0;
  std::memcpy(&len, bytes.data() + 8, 8);
  return {json::parse(bytes.substr(16, len)), bytes.substr(16 + len)};
}

std::string join(const json& manifest, const std::string& blob) {
  const std::string text = manifest.dump();
  std::string out = "ENORMNET";
  const std::uint64_t len = text.size();
  out.append(reinterpret_cast<const char*>(&len), 8);
  return out + text + blob;
}

void expect_format_error(const std::string& bytes, const std::string& fragment) {
  try {
    decode_network(bytes);
    FAIL() << "expected FormatError mentioning '" << fragment << "'";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
  }
}

bool bitwise_equal(const Network& a, const Network& b) {
  std::vector<std::span<const double>> x, y;
  for_each_parameter(a, [&](std::span<const double> s) { x.push_back(s); });
  for_each_parameter(b, [&](std::span<const double> s) { y.push_back(s); });
  if (x.size() != y.size()) return false;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i].size() != y[i].size() ||
        std::memcmp(x[i].data(), y[i].data(), x[i].size_bytes()) != 0) {
      return false;
    }
  }
  return a == b;
}

TEST(Container, RoundTripsEveryFamily) {
  TempDir dir;
  for (auto family : {oracle::Family::kFcBias, oracle::Family::kConvReluConv,
                      oracle::Family::kConvMaxpoolConv, oracle::Family::kResBlocks}) {
    for (ScalarType dtype : {ScalarType::kF64, ScalarType::kF32}) {
      const Network net = oracle::random_network(family, 3, dtype);
      const fs::path path = dir.path() / "net.enorm";
      save_network(net, path);
      EXPECT_TRUE(bitwise_equal(load_network(path), net));
    }
  }
}

TEST(Container, F64KeepsFullPrecision) {
  Network net;
  net.input_shape = {1};
  net.layers.emplace_back(Linear{Matrix(1, 2, Vector{0.1, 1.0 / 3.0}), Vector{-1e-300, 5e300}});
  EXPECT_TRUE(bitwise_equal(decode_network(encode_network(net)), net));
}

TEST(Container, ManifestFields) {
  const Network net = oracle::random_network(oracle::Family::kResBlocks, 1, ScalarType::kF32);
  const auto [manifest, blob] = split(encode_network(net));
  EXPECT_EQ(manifest["version"], 1);
  EXPECT_EQ(manifest["dtype"], "f32");
  EXPECT_EQ(manifest["blob_bytes"].get<std::size_t>(), blob.size());
  EXPECT_EQ(blob.size(), count_parameters(net) * 4);
  EXPECT_EQ(manifest["layers"][2]["kind"], "resblock_c");
  EXPECT_TRUE(manifest["layers"][2].contains("skip"));
}

TEST(Container, LittleEndianRowMajor) {
  Network net;
  net.input_shape = {2};
  net.layers.emplace_back(Linear{Matrix::from_rows({{1.0, 2.0}, {3.0, -0.5}}), std::nullopt});
  const auto [manifest, blob] = split(encode_network(net));
  ASSERT_EQ(blob.size(), 32u);
  const double expected[] = {1.0, 2.0, 3.0, -0.5};
  for (int i = 0; i < 4; ++i) {
    std::uint64_t bits = 0;
    for (int b = 7; b >= 0; --b) bits = (bits << 8) | static_cast<unsigned char>(blob[i * 8 + b]);
    EXPECT_EQ(std::bit_cast<double>(bits), expected[i]);
  }
}

TEST(Container, TruncatedBlob) {
  const std::string bytes = encode_network(oracle::random_network(oracle::Family::kFcBias, 2));
  expect_format_error(bytes.substr(0, bytes.size() - 8), "layer");
  auto [manifest, blob] = split(bytes);
  manifest["blob_bytes"] = blob.size() + 64;
  expect_format_error(join(manifest, blob), "blob");
}

TEST(Container, VersionMismatch) {
  auto [manifest, blob] = split(encode_network(oracle::random_network(oracle::Family::kFcBias, 2)));
  manifest["version"] = 2;
  expect_format_error(join(manifest, blob), "version 2");
}

TEST(Container, OverlappingOffsets) {
  auto [manifest, blob] =
      split(encode_network(oracle::random_network(oracle::Family::kConvReluConv, 2)));
  manifest["layers"][2]["tensors"][0]["offset"] = 0;
  expect_format_error(join(manifest, blob), "layer 2 (conv2d)");
}

TEST(Container, MalformedInputs) {
  expect_format_error("not a container", "magic");
  const std::string bytes = encode_network(oracle::random_network(oracle::Family::kFcBias, 2));
  expect_format_error(bytes.substr(0, 40), "manifest");
  auto [manifest, blob] = split(bytes);
  manifest["layers"][0]["kind"] = "attention";
  expect_format_error(join(manifest, blob), "unknown layer kind");
  auto [m2, b2] = split(bytes);
  m2["dtype"] = "f16";
  expect_format_error(join(m2, b2), "dtype");
  EXPECT_THROW(load_network("/nonexistent/net.enorm"), Error);
}

std::vector<std::uint8_t> fixture_pixels(std::size_t n) {
  std::vector<std::uint8_t> pixels(n * 28 * 28);
  for (std::size_t i = 0; i < pixels.size(); ++i) pixels[i] = static_cast<std::uint8_t>((i * 37) % 251);
  return pixels;
}

TEST(Idx, LoadsFixture) {
  TempDir dir;
  write_idx_images(dir.path() / "img", 4, 28, 28, fixture_pixels(4));
  write_idx_labels(dir.path() / "lbl", {3, 1, 4, 1});
  const Dataset data = load_idx_dataset(dir.path() / "img", dir.path() / "lbl");
  EXPECT_EQ(data.size(), 4u);
  EXPECT_EQ(data.inputs.shape, (Shape{4, 1, 28, 28}));
  EXPECT_EQ(data.labels, (std::vector<std::size_t>{3, 1, 4, 1}));
  EXPECT_EQ(data.num_classes, 5u);
}

TEST(Idx, NormalizesToZeroMeanUnitStd) {
  TempDir dir;
  write_idx_images(dir.path() / "img", 4, 28, 28, fixture_pixels(4));
  write_idx_labels(dir.path() / "lbl", {0, 1, 2, 3});
  const Dataset data = load_idx_dataset(dir.path() / "img", dir.path() / "lbl");
  const auto& v = data.inputs.data;
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  EXPECT_NEAR(mean, 0.0, 1e-6);
  EXPECT_NEAR(std::sqrt(var / n), 1.0, 1e-6);
}

TEST(Idx, CountMismatch) {
  TempDir dir;
  write_idx_images(dir.path() / "img", 4, 28, 28, fixture_pixels(4));
  write_idx_labels(dir.path() / "lbl", {0, 1, 2});
  EXPECT_THROW(load_idx_dataset(dir.path() / "img", dir.path() / "lbl"), FormatError);
}

TEST(Idx, MagicMismatch) {
  TempDir dir;
  write_idx_images(dir.path() / "img", 4, 28, 28, fixture_pixels(4));
  write_idx_labels(dir.path() / "lbl", {0, 1, 2, 3});
  EXPECT_THROW(load_idx_dataset(dir.path() / "lbl", dir.path() / "img"), FormatError);
}

TEST(Synth, SameSeedSameData) {
  EXPECT_EQ(synth_dataset(SynthKind::kRegression, 50, {6}, 4),
            synth_dataset(SynthKind::kRegression, 50, {6}, 4));
  EXPECT_EQ(synth_dataset(SynthKind::kClassification, 50, {2, 3, 3}, 4, 5),
            synth_dataset(SynthKind::kClassification, 50, {2, 3, 3}, 4, 5));
  EXPECT_NE(synth_dataset(SynthKind::kRegression, 50, {6}, 4),
            synth_dataset(SynthKind::kRegression, 50, {6}, 5));
}

TEST(Synth, TargetsComeFromTeacher) {
  const Dataset data = synth_dataset(SynthKind::kClassification, 40, {5}, 8, 4);
  const Activation y = forward(synth_teacher({5}, 4, 8), data.inputs);
  for (std::size_t s = 0; s < 40; ++s) {
    const auto first = y.data.begin() + static_cast<std::ptrdiff_t>(4 * s);
    EXPECT_EQ(data.labels[s], static_cast<std::size_t>(std::max_element(first, first + 4) - first));
  }
}

TEST(Synth, WideStudentFitsTeacher) {
  const Dataset data = synth_dataset(SynthKind::kRegression, 1000, {4}, 1);
  const std::vector<std::size_t> widths{4, 64, 64, 1};
  Network net = make_fc(widths, true, Init::kHe, 2);
  TrainConfig cfg;
  cfg.learning_rate = 0.02;
  cfg.schedule = ScheduleKind::kLinear;
  cfg.momentum = 0.9;
  cfg.epochs = 300;
  train_loop(net, data, cfg);
  EXPECT_LT(compute_loss(LossKind::kMse, forward(net, data.inputs), data).loss, 1e-3);
}

TEST(Synth, DimensionMismatchSurfacesDownstream) {
  const Dataset data = synth_dataset(SynthKind::kRegression, 10, {3}, 1);
  const std::vector<std::size_t> widths{4, 2, 1};
  const Network net = make_fc(widths, true, Init::kHe, 1);
  EXPECT_THROW(forward(net, data.inputs), ShapeError);
  TrainConfig cfg;
  Network copy = net;
  EXPECT_THROW(train_loop(copy, data, cfg), ShapeError);
}

TEST(RunConfigTest, ParsesFullDocument) {
  const RunConfig c = parse_run_config(R"({
    "dataset": "synthetic_classification", "samples": 200, "outputs": 4,
    "architecture": "8-16-4", "epochs": 3, "learning_rate": 0.05,
    "schedule": "quadratic", "lr_end": 1e-5, "momentum": 0.9, "weight_decay": 1e-4,
    "batch_size": 16, "enorm_cycles": 1, "asymmetric": "uniform", "c": 1.2,
    "seed": 7, "data_seed": 3, "dtype": "f32", "init": "xavier", "bias": false })");
  EXPECT_EQ(c.dataset, DatasetKind::kSyntheticClassification);
  EXPECT_EQ(c.architecture, (std::vector<std::size_t>{8, 16, 4}));
  EXPECT_EQ(c.train.schedule, ScheduleKind::kQuadratic);
  EXPECT_EQ(c.train.loss, LossKind::kCrossEntropy);
  EXPECT_EQ(c.train.asymmetric.kind, AsymmetricMode::Kind::kUniform);
  EXPECT_EQ(c.train.asymmetric.c, 1.2);
  EXPECT_EQ(c.train.enorm_cycles_per_step, 1u);
  EXPECT_EQ(c.dtype, ScalarType::kF32);
  EXPECT_FALSE(c.bias);
  const Dataset data = make_dataset(c);
  EXPECT_EQ(data.inputs.shape, (Shape{200, 8}));
  EXPECT_EQ(make_network(c, data).dtype, ScalarType::kF32);
}

TEST(RunConfigTest, RejectsBadDocuments) {
  const std::string base = R"("dataset": "synthetic_regression", "architecture": [4, 1], "epochs": 1, "learning_rate": 0.1)";
  EXPECT_NO_THROW(parse_run_config("{" + base + "}"));
  EXPECT_THROW(parse_run_config("{" + base + R"(, "learning_rat": 0.1})"), FormatError);
  EXPECT_THROW(parse_run_config(R"({"dataset": "synthetic_regression", "architecture": [4, 1], "epochs": 1})"),
               FormatError);
  EXPECT_THROW(parse_run_config("{" + base + R"(, "net": "x.enorm"})"), FormatError);
  EXPECT_THROW(parse_run_config("{" + base + R"(, "momentum": {"value": 0.9}})"), FormatError);
  EXPECT_THROW(parse_run_config("{" + base + R"(, "momentum": 1.5})"), FormatError);
  EXPECT_THROW(parse_run_config("{" + base + R"(, "schedule": "cosine"})"), FormatError);
  EXPECT_THROW(parse_run_config("{" + base + R"(, "epochs": "many"})"), FormatError);
  EXPECT_THROW(parse_run_config("[1, 2]"), FormatError);
  EXPECT_THROW(parse_run_config("{"), FormatError);
}

}  // namespace
}  // namespace enorm
