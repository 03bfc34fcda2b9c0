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

#ifndef ENORM_DATASET_HPP_
#define ENORM_DATASET_HPP_

#include <cstddef>
#include <vector>

#include "enorm/model.hpp"

namespace enorm {

// In-memory supervised dataset. Regression targets live in `targets`
// (batch-leading like the network output); class indices live in `labels`.
struct Dataset {
  Activation inputs;
  Activation targets;
  std::vector<std::size_t> labels;
  std::size_t num_classes = 0;  // 0 for regression

  bool classification() const noexcept { return num_classes > 0; }
  std::size_t size() const noexcept { return inputs.batch(); }

  // Rows `indices` gathered into a new dataset.
  Dataset gather(const std::vector<std::size_t>& indices) const;

  bool operator==(const Dataset&) const = default;
};

}  // namespace enorm

#endif  // ENORM_DATASET_HPP_
