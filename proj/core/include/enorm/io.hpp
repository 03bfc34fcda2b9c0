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

#ifndef ENORM_IO_HPP_
#define ENORM_IO_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "enorm/architectures.hpp"
#include "enorm/dataset.hpp"
#include "enorm/model.hpp"
#include "enorm/trainer.hpp"

namespace enorm {

// Container layout: 8-byte magic "ENORMNET", u64 little-endian manifest
// length, JSON manifest, parameter blob.
inline constexpr std::uint32_t kContainerVersion = 1;

std::string encode_network(const Network& net);
Network decode_network(std::string_view bytes);

void save_network(const Network& net, const std::filesystem::path& path);
Network load_network(const std::filesystem::path& path);

// Images come back as (n, 1, rows, cols), normalized with the global mean and
// standard deviation of the loaded pixels.
Dataset load_idx_dataset(const std::filesystem::path& images,
                         const std::filesystem::path& labels);

void write_idx_images(const std::filesystem::path& path, std::size_t count,
                      std::size_t rows, std::size_t cols,
                      const std::vector<std::uint8_t>& pixels);
void write_idx_labels(const std::filesystem::path& path,
                      const std::vector<std::uint8_t>& labels);

enum class SynthKind { kRegression, kClassification };

// Inputs are standard normal; targets come from a fixed teacher network
// drawn from `seed`. `outputs` is the regression width or the class count.
Dataset synth_dataset(SynthKind kind, std::size_t n, const Shape& sample_shape,
                      std::uint64_t seed, std::size_t outputs = 1);

// Teacher used by synth_dataset, exposed so tests can reproduce targets.
Network synth_teacher(const Shape& sample_shape, std::size_t outputs,
                      std::uint64_t seed);

enum class DatasetKind { kSyntheticRegression, kSyntheticClassification, kIdx };

struct RunConfig {
  TrainConfig train;
  DatasetKind dataset = DatasetKind::kSyntheticRegression;
  std::filesystem::path idx_images;
  std::filesystem::path idx_labels;
  std::size_t samples = 1000;
  std::size_t outputs = 1;
  std::uint64_t data_seed = 0;
  Shape input_shape;  // synthetic data; empty derives it from the network
  std::optional<std::filesystem::path> net;  // start from a saved network
  std::vector<std::size_t> architecture;     // or build an FC net
  bool bias = true;
  Init init = Init::kHe;
  ScalarType dtype = ScalarType::kF64;
  std::optional<std::filesystem::path> output_dir;
};

// Flat JSON object. Unknown keys and missing required keys raise FormatError.
RunConfig parse_run_config(std::string_view json_text);
RunConfig load_run_config(const std::filesystem::path& path);

// Dataset and initial network described by a run configuration. Relative
// paths resolve against `base_dir`.
Dataset make_dataset(const RunConfig& config, const std::filesystem::path& base_dir = {});
Network make_network(const RunConfig& config, const Dataset& data,
                     const std::filesystem::path& base_dir = {});

}  // namespace enorm

#endif  // ENORM_IO_HPP_
