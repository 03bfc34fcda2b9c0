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

#include "enorm/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <nlohmann/json.hpp>

#include "enorm/diagnostics.hpp"
#include "enorm/errors.hpp"

namespace enorm {

using json = nlohmann::json;

Dataset Dataset::gather(const std::vector<std::size_t>& indices) const {
  Dataset out;
  out.num_classes = num_classes;
  auto pick = [&](const Activation& src) {
    if (src.shape.empty()) return Activation();
    Shape shape = src.shape;
    shape[0] = indices.size();
    Activation dst(shape);
    const std::size_t width = src.sample_size();
    for (std::size_t r = 0; r < indices.size(); ++r) {
      if (indices[r] >= src.batch()) throw ShapeError("gather index out of range");
      std::copy_n(src.data.begin() + static_cast<std::ptrdiff_t>(indices[r] * width),
                  width, dst.data.begin() + static_cast<std::ptrdiff_t>(r * width));
    }
    return dst;
  };
  out.inputs = pick(inputs);
  out.targets = pick(targets);
  if (!labels.empty()) {
    out.labels.reserve(indices.size());
    for (std::size_t i : indices) {
      if (i >= labels.size()) throw ShapeError("gather index out of range");
      out.labels.push_back(labels[i]);
    }
  }
  return out;
}

namespace {

constexpr std::string_view kMagic = "ENORMNET";
constexpr std::string_view kFormatName = "enorm-network";

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(fmt::format("cannot open '{}'", path.string()));
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(fmt::format("cannot write '{}'", path.string()));
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(fmt::format("write to '{}' failed", path.string()));
}

template <typename U>
void put_le(std::string& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out.push_back(static_cast<char>((value >> (8 * i)) & 0xFFu));
  }
}

template <typename U>
U get_le(const char* p) {
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    value |= static_cast<U>(static_cast<unsigned char>(p[i])) << (8 * i);
  }
  return value;
}

std::size_t dtype_width(ScalarType t) { return t == ScalarType::kF32 ? 4 : 8; }

std::string dtype_name(ScalarType t) { return t == ScalarType::kF32 ? "f32" : "f64"; }

class BlobWriter {
 public:
  explicit BlobWriter(ScalarType dtype) : dtype_(dtype) {}

  json add(std::string_view name, const Shape& shape, std::span<const double> values) {
    json t{{"name", name}, {"shape", shape}, {"offset", blob_.size()}};
    for (double v : values) {
      if (dtype_ == ScalarType::kF32) {
        put_le(blob_, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
      } else {
        put_le(blob_, std::bit_cast<std::uint64_t>(v));
      }
    }
    return t;
  }

  const std::string& blob() const { return blob_; }

 private:
  ScalarType dtype_;
  std::string blob_;
};

json encode_conv(BlobWriter& w, const Conv2d& conv) {
  const Tensor4& k = conv.weight;
  json out{{"stride", conv.stride}, {"padding", conv.padding}};
  json tensors = json::array();
  tensors.push_back(w.add("weight",
                          {k.out_channels(), k.in_channels(), k.kernel_h(), k.kernel_w()},
                          k.data()));
  if (conv.bias) tensors.push_back(w.add("bias", {conv.bias->size()}, *conv.bias));
  out["tensors"] = std::move(tensors);
  return out;
}

// Reads tensors back in manifest order while checking offsets and bounds.
class BlobReader {
 public:
  BlobReader(std::string_view blob, ScalarType dtype) : blob_(blob), dtype_(dtype) {}

  std::vector<double> take(const json& t, std::string_view expected_name,
                           const Shape& expected_shape, const std::string& where) {
    const auto name = t.at("name").get<std::string>();
    if (name != expected_name) {
      throw FormatError(fmt::format("{}: expected tensor '{}', found '{}'", where,
                                    expected_name, name));
    }
    const auto shape = t.at("shape").get<Shape>();
    if (shape != expected_shape) {
      throw FormatError(fmt::format("{}: tensor '{}' has inconsistent shape", where, name));
    }
    const auto offset = t.at("offset").get<std::size_t>();
    if (offset < cursor_) {
      throw FormatError(
          fmt::format("{}: tensor '{}' at offset {} overlaps the previous tensor", where,
                      name, offset));
    }
    if (offset > cursor_) {
      throw FormatError(fmt::format(
          "{}: tensor '{}' at offset {} leaves a gap after byte {}", where, name, offset,
          cursor_));
    }
    const std::size_t count = std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                                              std::multiplies<>());
    const std::size_t bytes = count * dtype_width(dtype_);
    if (offset + bytes > blob_.size()) {
      throw FormatError(fmt::format(
          "{}: tensor '{}' needs bytes [{}, {}) but the blob is truncated at {}", where,
          name, offset, offset + bytes, blob_.size()));
    }
    std::vector<double> values(count);
    const char* p = blob_.data() + offset;
    for (std::size_t i = 0; i < count; ++i) {
      if (dtype_ == ScalarType::kF32) {
        values[i] = std::bit_cast<float>(get_le<std::uint32_t>(p + 4 * i));
      } else {
        values[i] = std::bit_cast<double>(get_le<std::uint64_t>(p + 8 * i));
      }
    }
    cursor_ = offset + bytes;
    return values;
  }

  std::size_t consumed() const { return cursor_; }

 private:
  std::string_view blob_;
  ScalarType dtype_;
  std::size_t cursor_ = 0;
};

Conv2d decode_conv(BlobReader& r, const json& j, const std::string& where) {
  const json& tensors = j.at("tensors");
  if (tensors.empty() || tensors.size() > 2) {
    throw FormatError(fmt::format("{}: expected weight and optional bias", where));
  }
  const auto shape = tensors[0].at("shape").get<Shape>();
  if (shape.size() != 4) {
    throw FormatError(fmt::format("{}: convolution weight must be rank 4", where));
  }
  Conv2d conv;
  conv.weight = Tensor4(shape[0], shape[1], shape[2], shape[3],
                        r.take(tensors[0], "weight", shape, where));
  if (tensors.size() == 2) conv.bias = r.take(tensors[1], "bias", {shape[0]}, where);
  conv.stride = j.at("stride").get<std::size_t>();
  conv.padding = j.at("padding").get<std::size_t>();
  return conv;
}

}  // namespace

std::string encode_network(const Network& net) {
  BlobWriter w(net.dtype);
  json layers = json::array();
  for (const LayerSpec& layer : net.layers) {
    json l{{"kind", kind_name(kind_of(layer))}};
    std::visit(
        [&](const auto& x) {
          using L = std::decay_t<decltype(x)>;
          if constexpr (std::is_same_v<L, Linear>) {
            json tensors = json::array();
            tensors.push_back(
                w.add("weight", {x.weight.rows(), x.weight.cols()}, x.weight.data()));
            if (x.bias) tensors.push_back(w.add("bias", {x.bias->size()}, *x.bias));
            l["tensors"] = std::move(tensors);
          } else if constexpr (std::is_same_v<L, Conv2d>) {
            l.update(encode_conv(w, x));
          } else if constexpr (std::is_same_v<L, MaxPool2d>) {
            l["kernel"] = x.kernel;
            l["stride"] = x.stride;
          } else if constexpr (std::is_same_v<L, ResBlockC>) {
            l["conv1"] = encode_conv(w, x.conv1);
            l["conv2"] = encode_conv(w, x.conv2);
            l["skip"] = encode_conv(w, x.skip);
          }
        },
        layer);
    layers.push_back(std::move(l));
  }
  const json manifest{{"format", kFormatName},
                      {"version", kContainerVersion},
                      {"dtype", dtype_name(net.dtype)},
                      {"input_shape", net.input_shape},
                      {"blob_bytes", w.blob().size()},
                      {"layers", std::move(layers)}};
  const std::string text = manifest.dump();
  std::string out(kMagic);
  put_le<std::uint64_t>(out, text.size());
  out += text;
  out += w.blob();
  return out;
}

Network decode_network(std::string_view bytes) {
  if (bytes.size() < kMagic.size() + 8 || bytes.substr(0, kMagic.size()) != kMagic) {
    throw FormatError("not a network container (bad magic)");
  }
  const auto manifest_len = get_le<std::uint64_t>(bytes.data() + kMagic.size());
  const std::size_t header = kMagic.size() + 8;
  if (manifest_len > bytes.size() - header) throw FormatError("truncated manifest");
  json manifest;
  try {
    manifest = json::parse(bytes.substr(header, manifest_len));
  } catch (const json::exception& e) {
    throw FormatError(fmt::format("malformed manifest: {}", e.what()));
  }
  const std::string_view blob = bytes.substr(header + manifest_len);

  try {
    if (manifest.at("format").get<std::string>() != kFormatName) {
      throw FormatError("manifest format tag is not " + std::string(kFormatName));
    }
    const auto version = manifest.at("version").get<std::int64_t>();
    if (version != kContainerVersion) {
      throw FormatError(fmt::format("unsupported container version {} (expected {})",
                                    version, kContainerVersion));
    }
    Network net;
    const auto dtype = manifest.at("dtype").get<std::string>();
    if (dtype == "f32") {
      net.dtype = ScalarType::kF32;
    } else if (dtype == "f64") {
      net.dtype = ScalarType::kF64;
    } else {
      throw FormatError(fmt::format("unknown dtype '{}'", dtype));
    }
    net.input_shape = manifest.at("input_shape").get<Shape>();
    const auto declared = manifest.at("blob_bytes").get<std::size_t>();
    BlobReader r(blob, net.dtype);

    const json& layers = manifest.at("layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const json& l = layers[i];
      const auto kind = l.at("kind").get<std::string>();
      const std::string where = fmt::format("layer {} ({})", i, kind);
      if (kind == "linear") {
        const json& tensors = l.at("tensors");
        if (tensors.empty() || tensors.size() > 2) {
          throw FormatError(where + ": expected weight and optional bias");
        }
        const auto shape = tensors[0].at("shape").get<Shape>();
        if (shape.size() != 2) throw FormatError(where + ": weight must be rank 2");
        Matrix weight(shape[0], shape[1], r.take(tensors[0], "weight", shape, where));
        std::optional<Vector> bias;
        if (tensors.size() == 2) bias = r.take(tensors[1], "bias", {shape[1]}, where);
        net.layers.emplace_back(Linear{std::move(weight), std::move(bias)});
      } else if (kind == "conv2d") {
        net.layers.emplace_back(decode_conv(r, l, where));
      } else if (kind == "relu") {
        net.layers.emplace_back(ReLU{});
      } else if (kind == "maxpool2d") {
        net.layers.emplace_back(MaxPool2d{l.at("kernel").get<std::size_t>(),
                                          l.at("stride").get<std::size_t>()});
      } else if (kind == "flatten") {
        net.layers.emplace_back(Flatten{});
      } else if (kind == "resblock_c") {
        ResBlockC block;
        block.conv1 = decode_conv(r, l.at("conv1"), where + " conv1");
        block.conv2 = decode_conv(r, l.at("conv2"), where + " conv2");
        block.skip = decode_conv(r, l.at("skip"), where + " skip");
        net.layers.emplace_back(std::move(block));
      } else {
        throw FormatError(fmt::format("{}: unknown layer kind", where));
      }
    }
    if (r.consumed() != declared) {
      throw FormatError(fmt::format(
          "declared tensors cover {} bytes but blob_bytes is {}", r.consumed(), declared));
    }
    if (blob.size() < declared) {
      throw FormatError(fmt::format(
          "truncated blob: manifest declares {} bytes, container holds {}", declared,
          blob.size()));
    }
    if (blob.size() > declared) {
      throw FormatError(fmt::format("{} trailing bytes after the blob",
                                    blob.size() - declared));
    }
    try {
      validate_shapes(net);
    } catch (const ShapeError& e) {
      throw FormatError(fmt::format("inconsistent architecture: {}", e.what()));
    }
    return net;
  } catch (const json::exception& e) {
    throw FormatError(fmt::format("malformed manifest: {}", e.what()));
  }
}

void save_network(const Network& net, const std::filesystem::path& path) {
  write_file(path, encode_network(net));
}

Network load_network(const std::filesystem::path& path) {
  return decode_network(read_file(path));
}

namespace {

std::uint32_t get_be32(const std::string& bytes, std::size_t at) {
  std::uint32_t v = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    v = (v << 8) | static_cast<unsigned char>(bytes[at + i]);
  }
  return v;
}

void put_be32(std::string& out, std::uint32_t v) {
  for (int i = 3; i >= 0; --i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

constexpr std::uint32_t kIdxImages = 0x00000803;
constexpr std::uint32_t kIdxLabels = 0x00000801;

}  // namespace

Dataset load_idx_dataset(const std::filesystem::path& images,
                         const std::filesystem::path& labels) {
  const std::string img = read_file(images);
  const std::string lab = read_file(labels);
  if (img.size() < 16 || get_be32(img, 0) != kIdxImages) {
    throw FormatError(fmt::format("'{}' is not an IDX image file", images.string()));
  }
  if (lab.size() < 8 || get_be32(lab, 0) != kIdxLabels) {
    throw FormatError(fmt::format("'{}' is not an IDX label file", labels.string()));
  }
  const std::size_t n = get_be32(img, 4);
  const std::size_t rows = get_be32(img, 8);
  const std::size_t cols = get_be32(img, 12);
  const std::size_t n_labels = get_be32(lab, 4);
  if (n != n_labels) {
    throw FormatError(fmt::format("{} images but {} labels", n, n_labels));
  }
  if (img.size() != 16 + n * rows * cols) {
    throw FormatError(fmt::format("image file holds {} pixel bytes, header implies {}",
                                  img.size() - 16, n * rows * cols));
  }
  if (lab.size() != 8 + n) {
    throw FormatError(fmt::format("label file holds {} bytes, header implies {}",
                                  lab.size() - 8, n));
  }
  if (n == 0) throw FormatError("IDX files contain no samples");

  Dataset data;
  data.inputs = Activation({n, 1, rows, cols});
  for (std::size_t i = 0; i < data.inputs.data.size(); ++i) {
    data.inputs.data[i] = static_cast<unsigned char>(img[16 + i]);
  }
  const double count = static_cast<double>(data.inputs.data.size());
  const double mean =
      std::accumulate(data.inputs.data.begin(), data.inputs.data.end(), 0.0) / count;
  double var = 0.0;
  for (double v : data.inputs.data) var += (v - mean) * (v - mean);
  double sd = std::sqrt(var / count);
  if (sd == 0.0) sd = 1.0;
  for (double& v : data.inputs.data) v = (v - mean) / sd;

  data.labels.resize(n);
  std::size_t top = 0;
  for (std::size_t i = 0; i < n; ++i) {
    data.labels[i] = static_cast<unsigned char>(lab[8 + i]);
    top = std::max(top, data.labels[i]);
  }
  data.num_classes = top + 1;
  return data;
}

void write_idx_images(const std::filesystem::path& path, std::size_t count,
                      std::size_t rows, std::size_t cols,
                      const std::vector<std::uint8_t>& pixels) {
  if (pixels.size() != count * rows * cols) {
    throw ShapeError("pixel buffer does not match the declared image count and size");
  }
  std::string out;
  put_be32(out, kIdxImages);
  put_be32(out, static_cast<std::uint32_t>(count));
  put_be32(out, static_cast<std::uint32_t>(rows));
  put_be32(out, static_cast<std::uint32_t>(cols));
  out.append(pixels.begin(), pixels.end());
  write_file(path, out);
}

void write_idx_labels(const std::filesystem::path& path,
                      const std::vector<std::uint8_t>& labels) {
  std::string out;
  put_be32(out, kIdxLabels);
  put_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.append(labels.begin(), labels.end());
  write_file(path, out);
}

Network synth_teacher(const Shape& sample_shape, std::size_t outputs,
                      std::uint64_t seed) {
  if (sample_shape.empty() || outputs == 0) {
    throw std::invalid_argument("teacher needs a non-empty input shape and outputs");
  }
  const std::size_t d = std::accumulate(sample_shape.begin(), sample_shape.end(),
                                        std::size_t{1}, std::multiplies<>());
  if (d == 0) throw std::invalid_argument("teacher input has zero size");
  const std::array<std::size_t, 3> widths{d, 32, outputs};
  Network teacher = make_fc(widths, true, Init::kHe, seed ^ 0x7eac4e5ull);
  if (sample_shape.size() > 1) {
    teacher.layers.insert(teacher.layers.begin(), Flatten{});
    teacher.input_shape = sample_shape;
  }
  return teacher;
}

Dataset synth_dataset(SynthKind kind, std::size_t n, const Shape& sample_shape,
                      std::uint64_t seed, std::size_t outputs) {
  if (n == 0) throw std::invalid_argument("synthetic dataset needs n > 0");
  if (kind == SynthKind::kClassification && outputs < 2) {
    throw std::invalid_argument("classification needs at least two classes");
  }
  const Network teacher = synth_teacher(sample_shape, outputs, seed);
  Dataset data;
  data.inputs = random_batch(sample_shape, n, seed);
  const Activation y = forward(teacher, data.inputs);
  if (kind == SynthKind::kRegression) {
    data.targets = y;
    return data;
  }
  data.num_classes = outputs;
  data.labels.resize(n);
  for (std::size_t s = 0; s < n; ++s) {
    const auto first = y.data.begin() + static_cast<std::ptrdiff_t>(s * outputs);
    data.labels[s] = static_cast<std::size_t>(
        std::max_element(first, first + static_cast<std::ptrdiff_t>(outputs)) - first);
  }
  return data;
}

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      "dataset",     "idx_images",      "idx_labels",   "samples",
      "outputs",     "input_shape",     "data_seed",    "net",
      "architecture", "bias",           "init",         "dtype",
      "output_dir",  "learning_rate",   "schedule",     "lr_end",
      "momentum",    "weight_decay",    "batch_size",   "epochs",
      "enorm_cycles", "p",              "asymmetric",   "c",
      "seed",        "implicit_lambda", "implicit_lr",  "loss",
      "record_wall_time"};
  return keys;
}

template <typename T>
T get_key(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw FormatError(fmt::format("config key '{}' has the wrong type", key));
  }
}

template <typename T>
void read_opt(const json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = get_key<T>(j, key);
}

template <typename E>
E lookup(const json& j, const char* key, const std::map<std::string, E>& table) {
  const auto text = get_key<std::string>(j, key);
  const auto it = table.find(text);
  if (it == table.end()) {
    throw FormatError(fmt::format("config key '{}': unknown value '{}'", key, text));
  }
  return it->second;
}

}  // namespace

RunConfig parse_run_config(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw FormatError(fmt::format("malformed config: {}", e.what()));
  }
  if (!j.is_object()) throw FormatError("config must be a flat JSON object");
  for (const auto& item : j.items()) {
    if (!known_keys().contains(item.key())) {
      throw FormatError(fmt::format("unknown config key '{}'", item.key()));
    }
    if (item.value().is_object()) {
      throw FormatError(fmt::format("config key '{}' must not be nested", item.key()));
    }
  }
  for (const char* key : {"dataset", "epochs", "learning_rate"}) {
    if (!j.contains(key)) throw FormatError(fmt::format("missing config key '{}'", key));
  }
  if (j.contains("net") == j.contains("architecture")) {
    throw FormatError("config needs exactly one of 'net' and 'architecture'");
  }

  RunConfig c;
  c.dataset = lookup<DatasetKind>(j, "dataset",
                                  {{"synthetic_regression", DatasetKind::kSyntheticRegression},
                                   {"synthetic_classification",
                                    DatasetKind::kSyntheticClassification},
                                   {"idx", DatasetKind::kIdx}});
  if (c.dataset == DatasetKind::kIdx) {
    if (!j.contains("idx_images") || !j.contains("idx_labels")) {
      throw FormatError("idx datasets need 'idx_images' and 'idx_labels'");
    }
    c.idx_images = get_key<std::string>(j, "idx_images");
    c.idx_labels = get_key<std::string>(j, "idx_labels");
  }
  read_opt(j, "samples", c.samples);
  read_opt(j, "outputs", c.outputs);
  read_opt(j, "input_shape", c.input_shape);
  read_opt(j, "data_seed", c.data_seed);
  if (j.contains("net")) c.net = get_key<std::string>(j, "net");
  if (j.contains("architecture")) {
    const json& a = j.at("architecture");
    c.architecture = a.is_string() ? parse_widths(a.get<std::string>())
                                   : get_key<std::vector<std::size_t>>(j, "architecture");
    if (c.architecture.size() < 2) throw FormatError("architecture needs two widths");
  }
  read_opt(j, "bias", c.bias);
  if (j.contains("init")) {
    c.init = lookup<Init>(j, "init", {{"he", Init::kHe}, {"xavier", Init::kXavier}});
  }
  if (j.contains("dtype")) {
    c.dtype = lookup<ScalarType>(j, "dtype",
                                 {{"f32", ScalarType::kF32}, {"f64", ScalarType::kF64}});
  }
  if (j.contains("output_dir")) c.output_dir = get_key<std::string>(j, "output_dir");

  TrainConfig& t = c.train;
  read_opt(j, "learning_rate", t.learning_rate);
  if (j.contains("schedule")) {
    t.schedule = lookup<ScheduleKind>(j, "schedule",
                                      {{"constant", ScheduleKind::kConstant},
                                       {"linear", ScheduleKind::kLinear},
                                       {"quadratic", ScheduleKind::kQuadratic}});
  }
  read_opt(j, "lr_end", t.lr_end);
  read_opt(j, "momentum", t.momentum);
  read_opt(j, "weight_decay", t.weight_decay);
  read_opt(j, "batch_size", t.batch_size);
  read_opt(j, "epochs", t.epochs);
  read_opt(j, "enorm_cycles", t.enorm_cycles_per_step);
  read_opt(j, "p", t.p);
  read_opt(j, "seed", t.seed);
  read_opt(j, "implicit_lambda", t.implicit_lambda);
  if (j.contains("implicit_lr")) t.implicit_lr = get_key<double>(j, "implicit_lr");
  read_opt(j, "record_wall_time", t.record_wall_time);
  const std::string asym =
      j.contains("asymmetric") ? get_key<std::string>(j, "asymmetric") : "off";
  if (asym == "off") {
    if (j.contains("c")) throw FormatError("'c' is only meaningful with uniform scaling");
  } else if (asym == "uniform") {
    if (!j.contains("c")) throw FormatError("uniform scaling needs 'c'");
    t.asymmetric = AsymmetricMode::uniform(get_key<double>(j, "c"));
  } else if (asym == "adaptive") {
    t.asymmetric = AsymmetricMode::adaptive();
  } else {
    throw FormatError(fmt::format("config key 'asymmetric': unknown value '{}'", asym));
  }
  if (j.contains("loss")) {
    t.loss = lookup<LossKind>(j, "loss", {{"mse", LossKind::kMse},
                                          {"cross_entropy", LossKind::kCrossEntropy}});
  } else {
    t.loss = c.dataset == DatasetKind::kSyntheticRegression ? LossKind::kMse
                                                            : LossKind::kCrossEntropy;
  }
  try {
    t.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(fmt::format("invalid config: {}", e.what()));
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(read_file(path));
}

namespace {

std::filesystem::path resolve(const std::filesystem::path& p,
                              const std::filesystem::path& base) {
  return p.is_absolute() || base.empty() ? p : base / p;
}

}  // namespace

Dataset make_dataset(const RunConfig& config, const std::filesystem::path& base_dir) {
  if (config.dataset == DatasetKind::kIdx) {
    Dataset data = load_idx_dataset(resolve(config.idx_images, base_dir),
                                    resolve(config.idx_labels, base_dir));
    if (!config.architecture.empty()) {
      // Fully connected nets take flat samples.
      data.inputs.shape = {data.size(), data.inputs.sample_size()};
    }
    return data;
  }
  Shape sample = config.input_shape;
  if (sample.empty()) {
    sample = config.net ? load_network(resolve(*config.net, base_dir)).input_shape
                        : Shape{config.architecture.front()};
  }
  const SynthKind kind = config.dataset == DatasetKind::kSyntheticRegression
                             ? SynthKind::kRegression
                             : SynthKind::kClassification;
  return synth_dataset(kind, config.samples, sample, config.data_seed, config.outputs);
}

Network make_network(const RunConfig& config, const Dataset& data,
                     const std::filesystem::path& base_dir) {
  Network net = config.net ? load_network(resolve(*config.net, base_dir))
                           : make_fc(config.architecture, config.bias, config.init,
                                     config.train.seed, config.dtype);
  Shape sample(data.inputs.shape.begin() + 1, data.inputs.shape.end());
  if (sample != net.input_shape) {
    throw ShapeError(fmt::format("dataset samples [{}] do not match network input [{}]",
                                 fmt::join(sample, ", "), fmt::join(net.input_shape, ", ")));
  }
  return net;
}

}  // namespace enorm
