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

#include "enorm/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "enorm/errors.hpp"

namespace enorm {

double lr_at(ScheduleKind schedule, std::size_t step, std::size_t total_steps,
             double lr0, double lr_end) {
  if (step > total_steps) throw std::invalid_argument("step beyond total_steps");
  const double t = total_steps == 0
                       ? 0.0
                       : static_cast<double>(step) / static_cast<double>(total_steps);
  switch (schedule) {
    case ScheduleKind::kConstant: return lr0;
    case ScheduleKind::kLinear: return lr0 * (1.0 - t) + lr_end * t;
    case ScheduleKind::kQuadratic: return lr_end + (lr0 - lr_end) * (1.0 - t) * (1.0 - t);
  }
  return lr0;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw std::invalid_argument("momentum must lie in [0, 1)");
  }
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("weight_decay must be >= 0");
  if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
  if (!(p > 0.0)) throw std::invalid_argument("p must be positive");
  if (!(implicit_lambda >= 0.0)) throw std::invalid_argument("implicit_lambda must be >= 0");
  if (enorm_cycles_per_step > 0 && implicit_lambda > 0.0) {
    throw std::invalid_argument(
        "explicit cycles and implicit_lambda are alternatives; set one to zero");
  }
  if (implicit_lr && !(*implicit_lr > 0.0)) {
    throw std::invalid_argument("implicit_lr must be > 0");
  }
  if (asymmetric.kind == AsymmetricMode::Kind::kUniform && !(asymmetric.c > 0.0)) {
    throw std::invalid_argument("uniform scaling needs c > 0");
  }
}

OptimizerState OptimizerState::for_network(const Network& net, bool implicit) {
  OptimizerState state;
  state.momentum = zeros_like(net);
  if (implicit) {
    for (const Boundary& b : find_boundaries(net)) {
      state.delta.emplace_back(b.channels, 1.0);
      state.delta_momentum.emplace_back(b.channels, 0.0);
    }
  }
  return state;
}

LossValue compute_loss(LossKind kind, const Activation& output, const Dataset& batch) {
  const std::size_t n = output.batch();
  const std::size_t width = output.sample_size();
  if (n == 0 || n != batch.size()) throw ShapeError("loss: batch size mismatch");
  LossValue value{0.0, Activation(output.shape), 0};
  if (kind == LossKind::kMse) {
    if (batch.targets.data.size() != output.data.size()) {
      throw ShapeError("loss: regression targets do not match the output");
    }
    const double scale = 1.0 / static_cast<double>(output.data.size());
    for (std::size_t i = 0; i < output.data.size(); ++i) {
      const double r = output.data[i] - batch.targets.data[i];
      value.loss += r * r * scale;
      value.grad.data[i] = 2.0 * r * scale;
    }
    return value;
  }
  if (batch.labels.size() != n) throw ShapeError("loss: labels do not match the batch");
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t s = 0; s < n; ++s) {
    const double* logits = &output.data[s * width];
    double* g = &value.grad.data[s * width];
    const std::size_t label = batch.labels[s];
    if (label >= width) throw ShapeError("loss: label outside the output range");
    const double top = *std::max_element(logits, logits + width);
    double z = 0.0;
    for (std::size_t j = 0; j < width; ++j) z += std::exp(logits[j] - top);
    const double log_z = std::log(z) + top;
    value.loss += (log_z - logits[label]) * inv_n;
    for (std::size_t j = 0; j < width; ++j) {
      g[j] = std::exp(logits[j] - log_z) * inv_n;
    }
    g[label] -= inv_n;
    if (static_cast<std::size_t>(std::max_element(logits, logits + width) - logits) ==
        label) {
      ++value.correct;
    }
  }
  return value;
}

void sgd_step(Network& net, const Network& grads, OptimizerState& state,
              const TrainConfig& config, std::size_t step_index,
              std::size_t total_steps) {
  const double lr = lr_at(config.schedule, step_index, total_steps,
                          config.learning_rate, config.lr_end);
  std::vector<std::span<double>> params;
  std::vector<std::span<const double>> gs;
  std::vector<std::span<double>> vs;
  for_each_parameter(net, [&](std::span<double> s) { params.push_back(s); });
  for_each_parameter(grads, [&](std::span<const double> s) { gs.push_back(s); });
  for_each_parameter(state.momentum, [&](std::span<double> s) { vs.push_back(s); });
  if (params.size() != gs.size() || params.size() != vs.size()) {
    throw ShapeError("gradients or momentum buffers do not match the network");
  }
  for (std::size_t t = 0; t < params.size(); ++t) {
    if (params[t].size() != gs[t].size() || params[t].size() != vs[t].size()) {
      throw ShapeError("gradient tensor shape does not match its parameter");
    }
    if (!all_finite(gs[t])) {
      throw DivergenceError(fmt::format("non-finite gradient at step {}", step_index),
                            step_index);
    }
    for (std::size_t i = 0; i < params[t].size(); ++i) {
      vs[t][i] = config.momentum * vs[t][i] + gs[t][i] +
                 config.weight_decay * params[t][i];
      params[t][i] -= lr * vs[t][i];
    }
    if (!all_finite(params[t])) {
      throw DivergenceError(fmt::format("non-finite parameter at step {}", step_index),
                            step_index);
    }
  }
  round_to_dtype(net);
}

namespace {

struct UnitScaling {
  std::optional<std::size_t> out_boundary;
  std::optional<std::size_t> in_boundary;
  std::size_t in_group = 1;
};

std::vector<UnitScaling> unit_scalings(const std::vector<UnitRef>& units,
                                       const std::vector<Boundary>& boundaries) {
  std::vector<UnitScaling> out(units.size());
  for (std::size_t u = 0; u < units.size(); ++u) {
    for (std::size_t b = 0; b < boundaries.size(); ++b) {
      for (const UnitRef& p : boundaries[b].producers) {
        if (p == units[u]) out[u].out_boundary = b;
      }
      for (const Consumer& c : boundaries[b].consumers) {
        if (c.unit == units[u]) {
          out[u].in_boundary = b;
          out[u].in_group = c.group;
        }
      }
    }
  }
  return out;
}

std::span<double> mutable_unit_data(Network& net, UnitRef ref) {
  auto data = unit_data(net, ref);
  return {const_cast<double*>(data.data()), data.size()};
}

}  // namespace

ImplicitGradients implicit_enorm_gradients(const Network& net,
                                           const std::vector<Vector>& delta,
                                           double lambda, double p) {
  const auto boundaries = find_boundaries(net);
  if (delta.size() != boundaries.size()) {
    throw ShapeError(fmt::format("{} delta vectors for {} boundaries", delta.size(),
                                 boundaries.size()));
  }
  for (std::size_t b = 0; b < delta.size(); ++b) {
    if (delta[b].size() != boundaries[b].channels) {
      throw ShapeError(fmt::format("delta {} has {} entries for {} channels", b,
                                   delta[b].size(), boundaries[b].channels));
    }
    for (double v : delta[b]) {
      if (!(v > 0.0)) {
        throw std::invalid_argument(
            fmt::format("rescaling coefficient {} in boundary {} is not positive", v, b));
      }
    }
  }
  ImplicitGradients out{zeros_like(net), {}};
  for (const Vector& d : delta) out.delta.emplace_back(d.size(), 0.0);

  const auto units = weight_units(net);
  const auto scalings = unit_scalings(units, boundaries);
  for (std::size_t u = 0; u < units.size(); ++u) {
    const UnitScaling& sc = scalings[u];
    const Matrix w = unit_left_matrix(net, units[u]);  // (input rows) x (out channels)
    Matrix gw(w.rows(), w.cols());
    for (std::size_t r = 0; r < w.rows(); ++r) {
      // Conv left matrices enumerate (in channel, kh, kw) along the rows.
      const std::size_t in_ch =
          sc.in_boundary ? (r / (w.rows() / delta[*sc.in_boundary].size())) : 0;
      const double din = sc.in_boundary ? delta[*sc.in_boundary][in_ch] : 1.0;
      for (std::size_t j = 0; j < w.cols(); ++j) {
        const double dout = sc.out_boundary ? delta[*sc.out_boundary][j] : 1.0;
        const double s = dout / din;
        const double a = std::fabs(w(r, j));
        const double term = abs_pow(a * s, p);  // |w s|^p
        const double sign = w(r, j) < 0.0 ? -1.0 : 1.0;
        gw(r, j) = a == 0.0 ? 0.0 : lambda * p * term / a * sign;
        if (sc.out_boundary) out.delta[*sc.out_boundary][j] += lambda * p * term / dout;
        if (sc.in_boundary) out.delta[*sc.in_boundary][in_ch] -= lambda * p * term / din;
      }
    }
    auto dst = mutable_unit_data(out.weights, units[u]);
    if (kind_of(net.layers[units[u].layer]) == LayerKind::kLinear) {
      std::copy(gw.data().begin(), gw.data().end(), dst.begin());
    } else {
      // Left-matrix rows enumerate (in, kh, kw); columns are filters.
      const std::size_t fs = gw.rows();
      for (std::size_t o = 0; o < gw.cols(); ++o) {
        for (std::size_t k = 0; k < fs; ++k) dst[o * fs + k] = gw(k, o);
      }
    }
  }
  return out;
}

namespace {

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                   start)
      .count();
}

}  // namespace

TrainResult train_loop(Network& net, const Dataset& data, const TrainConfig& config,
                       const StepCallback& on_step) {
  config.validate();
  validate_shapes(net);
  if (data.size() == 0) throw std::invalid_argument("empty dataset");
  const bool implicit = config.implicit_lambda > 0.0;
  TrainResult result;
  result.state = OptimizerState::for_network(net, implicit);
  OptimizerState& state = result.state;

  const std::size_t n = data.size();
  const std::size_t batches = (n + config.batch_size - 1) / config.batch_size;
  const std::size_t total_steps = batches * config.epochs;
  const double delta_lr = config.implicit_lr.value_or(config.learning_rate);
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(n);
  const auto start = std::chrono::steady_clock::now();
  std::size_t step = 0;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t first = b * config.batch_size;
      const std::size_t last = std::min(n, first + config.batch_size);
      const Dataset batch = data.gather(
          std::vector<std::size_t>(order.begin() + static_cast<std::ptrdiff_t>(first),
                                   order.begin() + static_cast<std::ptrdiff_t>(last)));
      const double lr = lr_at(config.schedule, step, total_steps, config.learning_rate,
                              config.lr_end);
      const ActivationTrace trace = forward_trace(net, batch.inputs);
      const LossValue loss = compute_loss(config.loss, trace.outputs.back(), batch);
      if (!std::isfinite(loss.loss)) {
        throw DivergenceError(fmt::format("non-finite loss at step {}", step), step);
      }
      BackwardResult grads = backward(net, trace, loss.grad);

      if (implicit) {
        ImplicitGradients reg =
            implicit_enorm_gradients(net, state.delta, config.implicit_lambda, config.p);
        std::vector<std::span<double>> gs;
        std::vector<std::span<const double>> rs;
        for_each_parameter(grads.param_grads, [&](std::span<double> s) { gs.push_back(s); });
        for_each_parameter(reg.weights, [&](std::span<const double> s) { rs.push_back(s); });
        for (std::size_t t = 0; t < gs.size(); ++t) {
          for (std::size_t i = 0; i < gs[t].size(); ++i) gs[t][i] += rs[t][i];
        }
        const double dlr = lr * delta_lr / config.learning_rate;
        for (std::size_t d = 0; d < state.delta.size(); ++d) {
          for (std::size_t i = 0; i < state.delta[d].size(); ++i) {
            double& v = state.delta_momentum[d][i];
            v = config.momentum * v + reg.delta[d][i];
            state.delta[d][i] -= dlr * v;
            if (!(state.delta[d][i] > 0.0) || !std::isfinite(state.delta[d][i])) {
              throw DivergenceError(
                  fmt::format("rescaling coefficient left (0, inf) at step {}", step),
                  step);
            }
          }
        }
      }

      sgd_step(net, grads.param_grads, state, config, step, total_steps);

      for (std::size_t c = 0; c < config.enorm_cycles_per_step; ++c) {
        const CycleResult cycle = enorm_cycle(net, config.p, config.asymmetric);
        rescale_momentum(state.momentum, cycle.coefficients);
      }

      StepMetrics m;
      m.step = step;
      m.epoch = epoch;
      m.lr = lr;
      m.train_loss = loss.loss;
      m.global_l2_norm = global_lp_norm(net, 2.0);
      m.wall_ms = config.record_wall_time ? elapsed_ms(start) : 0.0;
      result.steps.push_back(m);
      if (on_step) on_step(m);

      loss_sum += loss.loss * static_cast<double>(last - first);
      correct += loss.correct;
      ++step;
    }
    EpochMetrics em;
    em.epoch = epoch;
    em.mean_loss = loss_sum / static_cast<double>(n);
    if (data.classification()) {
      em.accuracy = static_cast<double>(correct) / static_cast<double>(n);
    }
    em.global_l2_norm = global_lp_norm(net, 2.0);
    em.energy = energy_profile(net);
    result.epochs.push_back(std::move(em));
  }
  return result;
}

void write_metrics_csv(std::ostream& out, const std::vector<StepMetrics>& steps) {
  fmt::print(out, "step,epoch,lr,train_loss,global_l2_norm,wall_ms\n");
  for (const StepMetrics& m : steps) {
    fmt::print(out, "{},{},{:.17g},{:.17g},{:.17g},{:.3f}\n", m.step, m.epoch, m.lr,
               m.train_loss, m.global_l2_norm, m.wall_ms);
  }
}

void write_epoch_csv(std::ostream& out, const std::vector<EpochMetrics>& epochs) {
  fmt::print(out, "epoch,mean_loss,accuracy,global_l2_norm\n");
  for (const EpochMetrics& e : epochs) {
    fmt::print(out, "{},{:.17g},{},{:.17g}\n", e.epoch, e.mean_loss,
               e.accuracy ? fmt::format("{:.17g}", *e.accuracy) : std::string(),
               e.global_l2_norm);
  }
}

}  // namespace enorm
