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

#include "enorm/balancer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

#include <fmt/format.h>

#include "enorm/diagnostics.hpp"
#include "enorm/errors.hpp"

namespace enorm {

RescalingVector::RescalingVector(std::vector<double> values)
    : values_(std::move(values)) {
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!(values_[i] > 0.0) || !std::isfinite(values_[i])) {
      throw std::invalid_argument(fmt::format(
          "rescaling coefficient {} is {}, must be finite and positive", i,
          values_[i]));
    }
  }
}

RescalingVector RescalingVector::ones(std::size_t n) {
  return RescalingVector(std::vector<double>(n, 1.0));
}

RescalingVector RescalingVector::inverse() const {
  std::vector<double> inv(values_.size());
  for (std::size_t i = 0; i < inv.size(); ++i) inv[i] = 1.0 / values_[i];
  return RescalingVector(std::move(inv));
}

double RescalingVector::max_deviation() const noexcept {
  double dev = 0.0;
  for (double v : values_) dev = std::max(dev, std::fabs(v - 1.0));
  return dev;
}

AsymmetricMode AsymmetricMode::uniform(double c) {
  if (!(c > 0.0)) throw std::invalid_argument("uniform scaling needs c > 0");
  return {Kind::kUniform, c};
}

std::vector<double> asymmetric_coefficients(const AsymmetricMode& mode, double p,
                                            std::span<const std::size_t> layer_sizes) {
  if (layer_sizes.size() < 3) {
    throw std::invalid_argument("asymmetric coefficients need at least two layers");
  }
  const std::size_t q = layer_sizes.size() - 1;
  std::vector<double> c(q, 1.0);
  for (std::size_t k = 1; k <= q; ++k) {
    switch (mode.kind) {
      case AsymmetricMode::Kind::kOff:
        break;
      case AsymmetricMode::Kind::kUniform:
        c[k - 1] = std::pow(mode.c, p * static_cast<double>(q - k));
        break;
      case AsymmetricMode::Kind::kAdaptive:
        c[k - 1] = 1.0 / (static_cast<double>(layer_sizes[k - 1]) *
                          static_cast<double>(layer_sizes[k]));
        break;
    }
  }
  return c;
}

namespace {

double root(double sum, double p) {
  if (p == 2.0) return std::sqrt(sum);
  if (p == 1.0) return sum;
  return std::pow(sum, 1.0 / p);
}

void check_p(double p) {
  if (!(p > 0.0) || !std::isfinite(p)) {
    throw std::invalid_argument("norm order p must be positive");
  }
}

// d[i] = sqrt(R[i] / L[i]) * c_ratio^(1/(2p)); `where` names the boundary in
// error messages.
RescalingVector coefficients_from_norms(const Vector& left_norms,
                                        const Vector& right_norms, double p,
                                        double c_ratio, std::size_t boundary,
                                        const std::string& where) {
  const double factor = c_ratio == 1.0 ? 1.0 : std::pow(c_ratio, 1.0 / (2.0 * p));
  std::vector<double> d(left_norms.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!(left_norms[i] > 0.0)) {
      throw DisconnectedNeuronError(
          fmt::format("{}: hidden neuron {} has no nonzero incoming weight", where, i),
          boundary, i);
    }
    if (!(right_norms[i] > 0.0)) {
      throw DisconnectedNeuronError(
          fmt::format("{}: hidden neuron {} has no nonzero outgoing weight", where, i),
          boundary, i);
    }
    d[i] = std::sqrt(right_norms[i] / left_norms[i]) * factor;
  }
  return RescalingVector(std::move(d));
}

}  // namespace

RescalingVector pair_coefficients(const Matrix& left, const Matrix& right, double p,
                                  double c_ratio) {
  check_p(p);
  if (left.cols() != right.rows()) {
    throw ShapeError(fmt::format("pair shapes do not compose: {}x{} then {}x{}",
                                 left.rows(), left.cols(), right.rows(), right.cols()));
  }
  if (!(c_ratio > 0.0)) throw std::invalid_argument("c_ratio must be positive");
  return coefficients_from_norms(pnorm_cols(left, p), pnorm_rows(right, p), p,
                                 c_ratio, 0, "pair");
}

PairRescaling apply_pair_rescaling(const Matrix& left, const Matrix& right,
                                   const std::optional<Vector>& bias_left,
                                   const RescalingVector& d) {
  if (left.cols() != right.rows() || d.size() != left.cols()) {
    throw ShapeError(fmt::format(
        "pair rescaling: {}x{} then {}x{} with {} coefficients", left.rows(),
        left.cols(), right.rows(), right.cols(), d.size()));
  }
  PairRescaling out{scale_cols(left, d.values()),
                    scale_rows(right, d.inverse().values()), std::nullopt};
  if (bias_left) {
    if (bias_left->size() != d.size()) throw ShapeError("bias length mismatch");
    Vector b = *bias_left;
    for (std::size_t i = 0; i < b.size(); ++i) b[i] *= d[i];
    out.bias_left = std::move(b);
  }
  return out;
}

ConvPairRescaling conv_pair_update(const Tensor4& conv_k, const Tensor4& conv_k1,
                                   const std::optional<Vector>& bias_k, double p,
                                   double c_ratio) {
  if (conv_k.out_channels() != conv_k1.in_channels()) {
    throw ShapeError(fmt::format("conv pair: {} filters feed {} input channels",
                                 conv_k.out_channels(), conv_k1.in_channels()));
  }
  const Matrix left = conv_to_left_matrix(conv_k);
  const Matrix right = conv_to_right_matrix(conv_k1);
  RescalingVector d = pair_coefficients(left, right, p, c_ratio);
  PairRescaling scaled = apply_pair_rescaling(left, right, bias_k, d);
  return {conv_from_left_matrix(scaled.left, conv_k.in_channels(), conv_k.kernel_h(),
                                conv_k.kernel_w()),
          conv_from_right_matrix(scaled.right, conv_k1.out_channels(),
                                 conv_k1.kernel_h(), conv_k1.kernel_w()),
          std::move(scaled.bias_left), std::move(d)};
}

Tensor4 block_equivalent_weight(const ResBlockC& block, double p) {
  check_p(p);
  const Tensor4& c1 = block.conv1.weight;
  const Tensor4& sk = block.skip.weight;
  if (sk.kernel_h() != 1 || sk.kernel_w() != 1) {
    throw ShapeError("shortcut must be a 1x1 convolution");
  }
  if (c1.out_channels() != sk.out_channels() || c1.in_channels() != sk.in_channels()) {
    throw ShapeError(fmt::format(
        "equivalent weight needs conv1 ({}->{}) and shortcut ({}->{}) to agree",
        c1.in_channels(), c1.out_channels(), sk.in_channels(), sk.out_channels()));
  }
  if (c1.kernel_h() % 2 == 0 || c1.kernel_w() % 2 == 0) {
    throw ShapeError("equivalent weight needs an odd conv1 kernel");
  }
  const std::size_t ch = c1.kernel_h() / 2;
  const std::size_t cw = c1.kernel_w() / 2;
  Tensor4 eq(c1.out_channels(), c1.in_channels(), c1.kernel_h(), c1.kernel_w());
  for (std::size_t o = 0; o < eq.out_channels(); ++o) {
    for (std::size_t i = 0; i < eq.in_channels(); ++i) {
      for (std::size_t h = 0; h < eq.kernel_h(); ++h) {
        for (std::size_t w = 0; w < eq.kernel_w(); ++w) {
          const double a = c1(o, i, h, w);
          const double b = (h == ch && w == cw) ? sk(o, i, 0, 0) : 0.0;
          if (a == 0.0) {
            eq(o, i, h, w) = b;
          } else if (b == 0.0) {
            eq(o, i, h, w) = a;
          } else {
            const double mag = root(abs_pow(a, p) + abs_pow(b, p), p);
            eq(o, i, h, w) = std::copysign(mag, b);
          }
        }
      }
    }
  }
  return eq;
}

namespace {

Tensor4 scale_in_channels(const Tensor4& t, const RescalingVector& d, bool invert) {
  Tensor4 out = t;
  for (std::size_t o = 0; o < t.out_channels(); ++o) {
    for (std::size_t i = 0; i < t.in_channels(); ++i) {
      const double f = invert ? 1.0 / d[i] : d[i];
      for (std::size_t h = 0; h < t.kernel_h(); ++h) {
        for (std::size_t w = 0; w < t.kernel_w(); ++w) out(o, i, h, w) *= f;
      }
    }
  }
  return out;
}

void scale_out_channels(Conv2d& conv, const RescalingVector& d) {
  Tensor4& t = conv.weight;
  for (std::size_t o = 0; o < t.out_channels(); ++o) {
    for (std::size_t i = 0; i < t.in_channels(); ++i) {
      for (std::size_t h = 0; h < t.kernel_h(); ++h) {
        for (std::size_t w = 0; w < t.kernel_w(); ++w) t(o, i, h, w) *= d[o];
      }
    }
  }
  if (conv.bias) {
    for (std::size_t o = 0; o < conv.bias->size(); ++o) (*conv.bias)[o] *= d[o];
  }
}

}  // namespace

ResBlockRescaling balance_resblock(const RescalingVector& prev_d,
                                   const ResBlockC& block,
                                   const RescalingVector& next_d, double p) {
  if (prev_d.size() != block.conv1.weight.in_channels() ||
      prev_d.size() != block.skip.weight.in_channels()) {
    throw ShapeError("prev_d does not match the block input channels");
  }
  if (next_d.size() != block.conv2.weight.out_channels() ||
      next_d.size() != block.skip.weight.out_channels()) {
    throw ShapeError("next_d does not match the block output channels");
  }
  ResBlockC out = block;
  // Both boundary scalings go first so the returned internal pair sits at
  // its optimum for the final conv2.
  out.conv1.weight = scale_in_channels(out.conv1.weight, prev_d, true);
  out.skip.weight = scale_in_channels(out.skip.weight, prev_d, true);
  scale_out_channels(out.conv2, next_d);
  scale_out_channels(out.skip, next_d);
  ConvPairRescaling inner =
      conv_pair_update(out.conv1.weight, out.conv2.weight, out.conv1.bias, p);
  out.conv1.weight = std::move(inner.left);
  out.conv2.weight = std::move(inner.right);
  out.conv1.bias = std::move(inner.bias_left);
  return {std::move(out), std::move(inner.coefficients)};
}

// ---------------------------------------------------------------------------

namespace {

const Conv2d& conv_part(const ResBlockC& b, UnitPart part) {
  switch (part) {
    case UnitPart::kConv1: return b.conv1;
    case UnitPart::kConv2: return b.conv2;
    case UnitPart::kSkip: return b.skip;
    case UnitPart::kMain: break;
  }
  throw std::logic_error("residual block has no main unit");
}

// Uniform view of a weight tensor as (out channels) x (input rows).
struct UnitView {
  Matrix* linear = nullptr;
  Tensor4* conv = nullptr;
  std::optional<Vector>* bias = nullptr;
};

UnitView view(Network& net, UnitRef ref) {
  LayerSpec& layer = net.layers.at(ref.layer);
  if (auto* l = std::get_if<Linear>(&layer)) return {&l->weight, nullptr, &l->bias};
  if (auto* c = std::get_if<Conv2d>(&layer)) return {nullptr, &c->weight, &c->bias};
  if (auto* b = std::get_if<ResBlockC>(&layer)) {
    auto& conv = const_cast<Conv2d&>(conv_part(*b, ref.part));
    return {nullptr, &conv.weight, &conv.bias};
  }
  throw std::logic_error("unit reference does not point at a weight tensor");
}

const UnitView view(const Network& net, UnitRef ref) {
  return view(const_cast<Network&>(net), ref);
}

std::size_t out_channels(const UnitView& u) {
  return u.linear ? u.linear->cols() : u.conv->out_channels();
}

std::size_t in_rows(const UnitView& u) {
  return u.linear ? u.linear->rows() : u.conv->in_channels();
}

// Adds sum |w|^p over each output channel's coefficients.
void add_producer_sums(const UnitView& u, double p, Vector& sums) {
  if (u.linear) {
    const Matrix& m = *u.linear;
    for (std::size_t i = 0; i < m.rows(); ++i) {
      for (std::size_t j = 0; j < m.cols(); ++j) sums[j] += abs_pow(m(i, j), p);
    }
  } else {
    const Tensor4& t = *u.conv;
    const std::size_t fs = t.filter_size();
    auto data = t.data();
    for (std::size_t o = 0; o < t.out_channels(); ++o) {
      double acc = 0.0;
      for (std::size_t k = 0; k < fs; ++k) acc += abs_pow(data[o * fs + k], p);
      sums[o] += acc;
    }
  }
}

// Adds sum |w|^p over the coefficients reading each input channel.
void add_consumer_sums(const UnitView& u, std::size_t group, double p, Vector& sums) {
  if (u.linear) {
    const Matrix& m = *u.linear;
    for (std::size_t i = 0; i < m.rows(); ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < m.cols(); ++j) acc += abs_pow(m(i, j), p);
      sums[i / group] += acc;
    }
  } else {
    const Tensor4& t = *u.conv;
    const std::size_t kk = t.kernel_h() * t.kernel_w();
    auto data = t.data();
    for (std::size_t o = 0; o < t.out_channels(); ++o) {
      for (std::size_t i = 0; i < t.in_channels(); ++i) {
        const double* f = &data[(o * t.in_channels() + i) * kk];
        double acc = 0.0;
        for (std::size_t k = 0; k < kk; ++k) acc += abs_pow(f[k], p);
        sums[i] += acc;
      }
    }
  }
}

void scale_producer(UnitView u, std::span<const double> d) {
  if (u.linear) {
    Matrix& m = *u.linear;
    for (std::size_t i = 0; i < m.rows(); ++i) {
      for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) *= d[j];
    }
  } else {
    Tensor4& t = *u.conv;
    const std::size_t fs = t.filter_size();
    auto data = t.data();
    for (std::size_t o = 0; o < t.out_channels(); ++o) {
      for (std::size_t k = 0; k < fs; ++k) data[o * fs + k] *= d[o];
    }
  }
  if (*u.bias) {
    Vector& b = **u.bias;
    for (std::size_t j = 0; j < b.size(); ++j) b[j] *= d[j];
  }
}

void scale_consumer(UnitView u, std::size_t group, std::span<const double> d,
                    bool invert) {
  if (u.linear) {
    Matrix& m = *u.linear;
    for (std::size_t i = 0; i < m.rows(); ++i) {
      const double f = invert ? 1.0 / d[i / group] : d[i / group];
      for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) *= f;
    }
  } else {
    Tensor4& t = *u.conv;
    const std::size_t kk = t.kernel_h() * t.kernel_w();
    auto data = t.data();
    for (std::size_t o = 0; o < t.out_channels(); ++o) {
      for (std::size_t i = 0; i < t.in_channels(); ++i) {
        const double f = invert ? 1.0 / d[i] : d[i];
        double* filt = &data[(o * t.in_channels() + i) * kk];
        for (std::size_t k = 0; k < kk; ++k) filt[k] *= f;
      }
    }
  }
}

}  // namespace

std::string unit_name(const Network& net, UnitRef ref) {
  std::string name = fmt::format("layer {} ({})", ref.layer,
                                 kind_name(kind_of(net.layers[ref.layer])));
  switch (ref.part) {
    case UnitPart::kConv1: return name + " conv1";
    case UnitPart::kConv2: return name + " conv2";
    case UnitPart::kSkip: return name + " skip";
    case UnitPart::kMain: break;
  }
  return name;
}

std::span<const double> unit_data(const Network& net, UnitRef unit) {
  const UnitView v = view(net, unit);
  return v.linear ? std::span<const double>(v.linear->data())
                  : std::span<const double>(v.conv->data());
}

Matrix unit_left_matrix(const Network& net, UnitRef unit) {
  const UnitView v = view(net, unit);
  return v.linear ? *v.linear : conv_to_left_matrix(*v.conv);
}

namespace {

// Per-channel incoming (producer) and outgoing (consumer) l_p norms.
std::pair<Vector, Vector> boundary_norms(const Network& net, const Boundary& b,
                                         double p) {
  Vector left(b.channels, 0.0);
  Vector right(b.channels, 0.0);
  for (const UnitRef& u : b.producers) add_producer_sums(view(net, u), p, left);
  for (const Consumer& c : b.consumers) {
    add_consumer_sums(view(net, c.unit), c.group, p, right);
  }
  for (double& v : left) v = root(v, p);
  for (double& v : right) v = root(v, p);
  return {std::move(left), std::move(right)};
}

void check_finite_units(const Network& net, const Boundary& b) {
  auto check = [&](UnitRef u) {
    UnitView v = view(net, u);
    auto data = v.linear ? v.linear->data() : v.conv->data();
    if (!all_finite(data)) {
      throw NumericError(fmt::format("{} has non-finite weights", unit_name(net, u)));
    }
  };
  for (const UnitRef& u : b.producers) check(u);
  for (const Consumer& c : b.consumers) check(c.unit);
}

void apply_boundary(Network& net, const Boundary& b, const RescalingVector& d,
                    bool gradient_law) {
  if (d.size() != b.channels) {
    throw ShapeError(fmt::format("boundary has {} channels, plan gives {}", b.channels,
                                 d.size()));
  }
  const RescalingVector inv = d.inverse();
  const RescalingVector& prod = gradient_law ? inv : d;
  for (const UnitRef& u : b.producers) scale_producer(view(net, u), prod.values());
  for (const Consumer& c : b.consumers) {
    scale_consumer(view(net, c.unit), c.group, d.values(), !gradient_law);
  }
}

}  // namespace

std::vector<UnitRef> weight_units(const Network& net) {
  std::vector<UnitRef> units;
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    switch (kind_of(net.layers[k])) {
      case LayerKind::kLinear:
      case LayerKind::kConv2d:
        units.push_back({k, UnitPart::kMain});
        break;
      case LayerKind::kResBlockC:
        units.push_back({k, UnitPart::kConv1});
        units.push_back({k, UnitPart::kConv2});
        units.push_back({k, UnitPart::kSkip});
        break;
      default:
        break;
    }
  }
  return units;
}

std::vector<Boundary> find_boundaries(const Network& net) {
  validate_shapes(net);
  std::vector<Boundary> boundaries;
  std::vector<UnitRef> open;  // producers feeding the current activations
  std::size_t channels = 0;
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    const LayerSpec& layer = net.layers[k];
    auto consume = [&](std::vector<Consumer> consumers) {
      if (open.empty()) return;
      for (Consumer& c : consumers) {
        const std::size_t rows = in_rows(view(net, c.unit));
        if (rows % channels != 0) {
          throw ShapeError(fmt::format("{} reads {} inputs from {} channels",
                                       unit_name(net, c.unit), rows, channels));
        }
        c.group = rows / channels;
      }
      boundaries.push_back({open, std::move(consumers), channels});
    };
    switch (kind_of(layer)) {
      case LayerKind::kLinear:
      case LayerKind::kConv2d: {
        const UnitRef u{k, UnitPart::kMain};
        consume({Consumer{u, 1}});
        open = {u};
        channels = out_channels(view(net, u));
        break;
      }
      case LayerKind::kResBlockC: {
        const UnitRef c1{k, UnitPart::kConv1};
        const UnitRef c2{k, UnitPart::kConv2};
        const UnitRef sk{k, UnitPart::kSkip};
        consume({Consumer{c1, 1}, Consumer{sk, 1}});
        boundaries.push_back(
            {{c1}, {Consumer{c2, 1}}, out_channels(view(net, c1))});
        open = {c2, sk};
        channels = out_channels(view(net, c2));
        break;
      }
      default:
        break;
    }
  }
  return boundaries;
}

RescalingPlan RescalingPlan::identity(const Network& net) {
  RescalingPlan plan;
  for (const Boundary& b : find_boundaries(net)) {
    plan.boundaries.push_back(RescalingVector::ones(b.channels));
  }
  return plan;
}

RescalingPlan RescalingPlan::then(const RescalingPlan& next) const {
  if (next.boundaries.size() != boundaries.size()) {
    throw ShapeError("rescaling plans cover different boundaries");
  }
  RescalingPlan out;
  for (std::size_t b = 0; b < boundaries.size(); ++b) {
    if (boundaries[b].size() != next.boundaries[b].size()) {
      throw ShapeError("rescaling plans disagree on boundary width");
    }
    std::vector<double> v(boundaries[b].size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      v[i] = boundaries[b][i] * next.boundaries[b][i];
    }
    out.boundaries.emplace_back(std::move(v));
  }
  return out;
}

double RescalingPlan::max_deviation() const noexcept {
  double dev = 0.0;
  for (const auto& d : boundaries) dev = std::max(dev, d.max_deviation());
  return dev;
}

void apply_rescaling(Network& net, const RescalingPlan& plan) {
  const auto boundaries = find_boundaries(net);
  if (plan.boundaries.size() != boundaries.size()) {
    throw ShapeError(fmt::format("plan has {} boundaries, network has {}",
                                 plan.boundaries.size(), boundaries.size()));
  }
  for (std::size_t b = 0; b < boundaries.size(); ++b) {
    apply_boundary(net, boundaries[b], plan.boundaries[b], false);
  }
}

void rescale_momentum(Network& buffers, const RescalingPlan& plan) {
  const auto boundaries = find_boundaries(buffers);
  if (plan.boundaries.size() != boundaries.size()) {
    throw ShapeError(fmt::format("plan has {} boundaries, buffers have {}",
                                 plan.boundaries.size(), boundaries.size()));
  }
  for (std::size_t b = 0; b < boundaries.size(); ++b) {
    apply_boundary(buffers, boundaries[b], plan.boundaries[b], true);
  }
}

void validate_connectivity(const Network& net, double p) {
  check_p(p);
  const auto boundaries = find_boundaries(net);
  for (std::size_t b = 0; b < boundaries.size(); ++b) {
    auto [left, right] = boundary_norms(net, boundaries[b], p);
    (void)coefficients_from_norms(
        left, right, p, 1.0, b,
        fmt::format("boundary {} after {}", b,
                    unit_name(net, boundaries[b].producers.front())));
  }
}

std::vector<double> unit_weights(const Network& net, const AsymmetricMode& mode,
                                 double p) {
  const auto units = weight_units(net);
  if (mode.kind == AsymmetricMode::Kind::kOff) return std::vector<double>(units.size(), 1.0);
  for (const auto& layer : net.layers) {
    if (kind_of(layer) == LayerKind::kResBlockC) {
      throw std::invalid_argument(
          "asymmetric scaling is only supported on networks without residual blocks");
    }
  }
  const std::size_t q = units.size();
  std::vector<double> c(q, 1.0);
  for (std::size_t k = 1; k <= q; ++k) {
    if (mode.kind == AsymmetricMode::Kind::kUniform) {
      c[k - 1] = std::pow(mode.c, p * static_cast<double>(q - k));
    } else {
      const UnitView v = view(net, units[k - 1]);
      const std::size_t n = v.linear ? v.linear->size() : v.conv->size();
      c[k - 1] = 1.0 / static_cast<double>(n);
    }
  }
  return c;
}

std::vector<Vector> activation_scalings(const Network& net, const RescalingPlan& plan) {
  const auto boundaries = find_boundaries(net);
  if (plan.boundaries.size() != boundaries.size()) {
    throw ShapeError("plan does not match the network boundaries");
  }
  const std::vector<Shape> shapes = layer_output_shapes(net);
  std::vector<Vector> out(net.layers.size());
  // Boundary index for which a given unit is the (first) producer.
  auto boundary_of = [&](UnitRef u) -> std::optional<std::size_t> {
    for (std::size_t b = 0; b < boundaries.size(); ++b) {
      for (const UnitRef& p : boundaries[b].producers) {
        if (p == u) return b;
      }
    }
    return std::nullopt;
  };
  Vector current;  // per-channel factor of the current activation, empty = 1
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    switch (kind_of(net.layers[k])) {
      case LayerKind::kLinear:
      case LayerKind::kConv2d: {
        auto b = boundary_of({k, UnitPart::kMain});
        current = b ? Vector(plan.boundaries[*b].values().begin(),
                             plan.boundaries[*b].values().end())
                    : Vector{};
        break;
      }
      case LayerKind::kResBlockC: {
        auto b = boundary_of({k, UnitPart::kConv2});
        current = b ? Vector(plan.boundaries[*b].values().begin(),
                             plan.boundaries[*b].values().end())
                    : Vector{};
        break;
      }
      case LayerKind::kFlatten: {
        if (!current.empty()) {
          const Shape& in = k == 0 ? net.input_shape : shapes[k - 1];
          if (in.size() == 3) {
            const std::size_t spatial = in[1] * in[2];
            Vector expanded(current.size() * spatial);
            for (std::size_t i = 0; i < expanded.size(); ++i) {
              expanded[i] = current[i / spatial];
            }
            current = std::move(expanded);
          }
        }
        break;
      }
      default:
        break;
    }
    out[k] = current;
  }
  return out;
}

namespace {

// One sweep without dtype rounding.
CycleResult run_cycle(Network& net, const std::vector<Boundary>& boundaries,
                      const std::vector<double>& unit_c, double p,
                      const AsymmetricMode& mode) {
  CycleResult result;
  const bool weighted = mode.kind != AsymmetricMode::Kind::kOff;
  for (std::size_t b = 0; b < boundaries.size(); ++b) {
    const Boundary& bd = boundaries[b];
    check_finite_units(net, bd);
    auto [left, right] = boundary_norms(net, bd, p);
    // Sequential networks only: boundary b sits between units b and b + 1.
    const double ratio = weighted ? unit_c[b + 1] / unit_c[b] : 1.0;
    RescalingVector d = coefficients_from_norms(
        left, right, p, ratio, b,
        fmt::format("boundary {} after {}", b, unit_name(net, bd.producers.front())));
    apply_boundary(net, bd, d, false);
    result.max_deviation = std::max(result.max_deviation, d.max_deviation());
    result.coefficients.boundaries.push_back(std::move(d));
  }
  result.lp_norm = global_lp_norm(net, p, mode);
  return result;
}

}  // namespace

CycleResult enorm_cycle(Network& net, double p, const AsymmetricMode& mode) {
  check_p(p);
  const auto boundaries = find_boundaries(net);
  const auto unit_c = unit_weights(net, mode, p);
  CycleResult result = run_cycle(net, boundaries, unit_c, p, mode);
  if (net.dtype == ScalarType::kF32) {
    round_to_dtype(net);
    result.lp_norm = global_lp_norm(net, p, mode);
  }
  return result;
}

BalanceReport balance(Network& net, const BalanceOptions& options) {
  check_p(options.p);
  const auto boundaries = find_boundaries(net);
  const auto unit_c = unit_weights(net, options.mode, options.p);
  BalanceReport report;
  report.initial_lp_norm = global_lp_norm(net, options.p, options.mode);
  report.total = RescalingPlan::identity(net);
  for (std::size_t cycle = 0; cycle < options.max_cycles; ++cycle) {
    CycleResult r = run_cycle(net, boundaries, unit_c, options.p, options.mode);
    report.total = report.total.then(r.coefficients);
    report.cycles_run = cycle + 1;
    report.lp_norm_per_cycle.push_back(r.lp_norm);
    report.max_dev_per_cycle.push_back(r.max_deviation);
    report.max_coeff_deviation = r.max_deviation;
    if (r.max_deviation < options.tol) {
      report.converged = true;
      break;
    }
  }
  if (net.dtype == ScalarType::kF32) round_to_dtype(net);
  return report;
}

}  // namespace enorm
