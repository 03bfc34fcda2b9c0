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

#include "enorm/tensor.hpp"

#include <cmath>
#include <utility>

#include <fmt/format.h>

#include "enorm/errors.hpp"

namespace enorm {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw ShapeError(fmt::format("matrix {}x{} given {} values", rows_, cols_,
                                 data_.size()));
  }
}

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.front().size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("ragged matrix rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Matrix(r, c, std::move(data));
}

Tensor4::Tensor4(std::size_t out_channels, std::size_t in_channels,
                 std::size_t kernel_h, std::size_t kernel_w, double fill)
    : out_(out_channels),
      in_(in_channels),
      kh_(kernel_h),
      kw_(kernel_w),
      data_(out_channels * in_channels * kernel_h * kernel_w, fill) {}

Tensor4::Tensor4(std::size_t out_channels, std::size_t in_channels,
                 std::size_t kernel_h, std::size_t kernel_w,
                 std::vector<double> data)
    : out_(out_channels),
      in_(in_channels),
      kh_(kernel_h),
      kw_(kernel_w),
      data_(std::move(data)) {
  if (data_.size() != out_ * in_ * kh_ * kw_) {
    throw ShapeError(fmt::format("tensor {}x{}x{}x{} given {} values", out_, in_,
                                 kh_, kw_, data_.size()));
  }
}

double abs_pow(double x, double p) {
  const double a = std::fabs(x);
  if (p == 2.0) return a * a;
  if (p == 1.0) return a;
  return std::pow(a, p);
}

namespace {

double root(double sum, double p) {
  if (p == 2.0) return std::sqrt(sum);
  if (p == 1.0) return sum;
  return std::pow(sum, 1.0 / p);
}

void check_norm_args(const Matrix& m, double p) {
  if (!(p > 0.0)) throw std::invalid_argument("norm order p must be positive");
  if (m.empty()) throw ShapeError("p-norm of an empty matrix");
  if (!all_finite(m.data())) {
    throw NumericError("p-norm of a matrix with non-finite entries");
  }
}

}  // namespace

Vector pnorm_cols(const Matrix& m, double p) {
  check_norm_args(m, p);
  Vector sums(m.cols(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) sums[j] += abs_pow(m(i, j), p);
  }
  for (double& s : sums) s = root(s, p);
  return sums;
}

Vector pnorm_rows(const Matrix& m, double p) {
  check_norm_args(m, p);
  Vector sums(m.rows(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) sums[i] += abs_pow(m(i, j), p);
  }
  for (double& s : sums) s = root(s, p);
  return sums;
}

Matrix scale_cols(const Matrix& m, std::span<const double> d) {
  if (d.size() != m.cols()) {
    throw ShapeError(fmt::format("scale_cols: {} factors for {} columns",
                                 d.size(), m.cols()));
  }
  Matrix out = m;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) *= d[j];
  }
  return out;
}

Matrix scale_rows(const Matrix& m, std::span<const double> d) {
  if (d.size() != m.rows()) {
    throw ShapeError(fmt::format("scale_rows: {} factors for {} rows", d.size(),
                                 m.rows()));
  }
  Matrix out = m;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) *= d[i];
  }
  return out;
}

Matrix conv_to_left_matrix(const Tensor4& t) {
  const std::size_t kk = t.kernel_h() * t.kernel_w();
  Matrix m(t.filter_size(), t.out_channels());
  for (std::size_t o = 0; o < t.out_channels(); ++o) {
    for (std::size_t i = 0; i < t.in_channels(); ++i) {
      for (std::size_t h = 0; h < t.kernel_h(); ++h) {
        for (std::size_t w = 0; w < t.kernel_w(); ++w) {
          m(i * kk + h * t.kernel_w() + w, o) = t(o, i, h, w);
        }
      }
    }
  }
  return m;
}

Tensor4 conv_from_left_matrix(const Matrix& m, std::size_t in_channels,
                              std::size_t kernel_h, std::size_t kernel_w) {
  const std::size_t kk = kernel_h * kernel_w;
  if (m.rows() != in_channels * kk) {
    throw ShapeError(fmt::format(
        "left matrix has {} rows, expected {}x{}x{}", m.rows(), in_channels,
        kernel_h, kernel_w));
  }
  Tensor4 t(m.cols(), in_channels, kernel_h, kernel_w);
  for (std::size_t o = 0; o < t.out_channels(); ++o) {
    for (std::size_t i = 0; i < in_channels; ++i) {
      for (std::size_t h = 0; h < kernel_h; ++h) {
        for (std::size_t w = 0; w < kernel_w; ++w) {
          t(o, i, h, w) = m(i * kk + h * kernel_w + w, o);
        }
      }
    }
  }
  return t;
}

Matrix conv_to_right_matrix(const Tensor4& t) {
  const std::size_t kk = t.kernel_h() * t.kernel_w();
  Matrix m(t.in_channels(), t.out_channels() * kk);
  for (std::size_t o = 0; o < t.out_channels(); ++o) {
    for (std::size_t i = 0; i < t.in_channels(); ++i) {
      for (std::size_t h = 0; h < t.kernel_h(); ++h) {
        for (std::size_t w = 0; w < t.kernel_w(); ++w) {
          m(i, o * kk + h * t.kernel_w() + w) = t(o, i, h, w);
        }
      }
    }
  }
  return m;
}

Tensor4 conv_from_right_matrix(const Matrix& m, std::size_t out_channels,
                               std::size_t kernel_h, std::size_t kernel_w) {
  const std::size_t kk = kernel_h * kernel_w;
  if (m.cols() != out_channels * kk) {
    throw ShapeError(fmt::format(
        "right matrix has {} columns, expected {}x{}x{}", m.cols(),
        out_channels, kernel_h, kernel_w));
  }
  Tensor4 t(out_channels, m.rows(), kernel_h, kernel_w);
  for (std::size_t o = 0; o < out_channels; ++o) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
      for (std::size_t h = 0; h < kernel_h; ++h) {
        for (std::size_t w = 0; w < kernel_w; ++w) {
          t(o, i, h, w) = m(i, o * kk + h * kernel_w + w);
        }
      }
    }
  }
  return t;
}

bool all_finite(std::span<const double> values) noexcept {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace enorm
