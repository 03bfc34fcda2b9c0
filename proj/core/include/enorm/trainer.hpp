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

// SGD with momentum interleaved with balancing cycles, plus the implicit
// variant that learns the rescaling coefficients by gradient descent.

#ifndef ENORM_TRAINER_HPP_
#define ENORM_TRAINER_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <vector>

#include "enorm/balancer.hpp"
#include "enorm/dataset.hpp"
#include "enorm/diagnostics.hpp"
#include "enorm/model.hpp"

namespace enorm {

enum class ScheduleKind { kConstant, kLinear, kQuadratic };

// constant:  lr0
// linear:    lr0 + (lr_end - lr0) * step / total
// quadratic: lr_end + (lr0 - lr_end) * (1 - step / total)^2
double lr_at(ScheduleKind schedule, std::size_t step, std::size_t total_steps,
             double lr0, double lr_end);

enum class LossKind { kMse, kCrossEntropy };

struct TrainConfig {
  double learning_rate = 0.01;
  ScheduleKind schedule = ScheduleKind::kConstant;
  double lr_end = 0.0;
  double momentum = 0.0;
  double weight_decay = 0.0;
  std::size_t batch_size = 32;
  std::size_t epochs = 1;
  std::size_t enorm_cycles_per_step = 0;
  double p = 2.0;
  AsymmetricMode asymmetric;
  std::uint64_t seed = 0;
  double implicit_lambda = 0.0;
  std::optional<double> implicit_lr;  // defaults to learning_rate
  LossKind loss = LossKind::kMse;
  bool record_wall_time = false;  // wall_ms is written as 0 otherwise

  // Throws std::invalid_argument on an inconsistent configuration.
  void validate() const;
};

struct OptimizerState {
  Network momentum;                   // one buffer per parameter tensor
  std::vector<Vector> delta;          // implicit mode: one entry per boundary
  std::vector<Vector> delta_momentum;

  static OptimizerState for_network(const Network& net, bool implicit);
};

struct LossValue {
  double loss = 0.0;
  Activation grad;  // d loss / d output
  std::size_t correct = 0;
};

// Mean squared error over all output elements, or mean softmax cross-entropy.
LossValue compute_loss(LossKind kind, const Activation& output, const Dataset& batch);

// v <- momentum * v + grad + weight_decay * w;  w <- w - lr * v
// with lr = lr_at(config.schedule, step_index, total_steps, ...).
// Throws DivergenceError if a gradient or updated parameter is non-finite.
void sgd_step(Network& net, const Network& grads, OptimizerState& state,
              const TrainConfig& config, std::size_t step_index,
              std::size_t total_steps);

struct ImplicitGradients {
  Network weights;            // lambda * d l_p(theta, delta) / d theta
  std::vector<Vector> delta;  // lambda * d l_p(theta, delta) / d delta
};

// Gradients of lambda * sum_k ||D_{k-1}^-1 W_k D_k||_p^p with one delta entry
// per boundary (see find_boundaries). Throws std::invalid_argument on a
// non-positive delta entry.
ImplicitGradients implicit_enorm_gradients(const Network& net,
                                           const std::vector<Vector>& delta,
                                           double lambda, double p = 2.0);

struct StepMetrics {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double global_l2_norm = 0.0;
  double wall_ms = 0.0;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  std::optional<double> accuracy;  // classification only
  double global_l2_norm = 0.0;
  EnergyProfile energy;
};

struct TrainResult {
  std::vector<StepMetrics> steps;
  std::vector<EpochMetrics> epochs;
  OptimizerState state;
};

using StepCallback = std::function<void(const StepMetrics&)>;

// Per step: learning rate, forward, backward, SGD step, ENorm cycles, and
// momentum rescaling with the same coefficients.
TrainResult train_loop(Network& net, const Dataset& data, const TrainConfig& config,
                       const StepCallback& on_step = {});

// CSV columns: step,epoch,lr,train_loss,global_l2_norm,wall_ms
void write_metrics_csv(std::ostream& out, const std::vector<StepMetrics>& steps);
// CSV columns: epoch,mean_loss,accuracy,global_l2_norm
void write_epoch_csv(std::ostream& out, const std::vector<EpochMetrics>& epochs);

}  // namespace enorm

#endif  // ENORM_TRAINER_HPP_
