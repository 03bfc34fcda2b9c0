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

// Dense row-major storage and the row/column p-norm primitives used by the
// balancer. Reshapes are defined by index arithmetic only.

#ifndef ENORM_TENSOR_HPP_
#define ENORM_TENSOR_HPP_

#include <cstddef>
#include <span>
#include <vector>

namespace enorm {

using Vector = std::vector<double>;

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  // Throws ShapeError unless data.size() == rows * cols.
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  // Nested initializer, one inner list per row.
  static Matrix from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const {
    return data_[i * cols_ + j];
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Convolution weights laid out as (out_channels, in_channels, kernel_h, kernel_w).
class Tensor4 {
 public:
  Tensor4() = default;
  Tensor4(std::size_t out_channels, std::size_t in_channels,
          std::size_t kernel_h, std::size_t kernel_w, double fill = 0.0);
  Tensor4(std::size_t out_channels, std::size_t in_channels,
          std::size_t kernel_h, std::size_t kernel_w, std::vector<double> data);

  std::size_t out_channels() const noexcept { return out_; }
  std::size_t in_channels() const noexcept { return in_; }
  std::size_t kernel_h() const noexcept { return kh_; }
  std::size_t kernel_w() const noexcept { return kw_; }
  std::size_t size() const noexcept { return data_.size(); }
  // Number of coefficients in one output filter.
  std::size_t filter_size() const noexcept { return in_ * kh_ * kw_; }

  double& operator()(std::size_t o, std::size_t i, std::size_t h, std::size_t w) {
    return data_[((o * in_ + i) * kh_ + h) * kw_ + w];
  }
  double operator()(std::size_t o, std::size_t i, std::size_t h,
                    std::size_t w) const {
    return data_[((o * in_ + i) * kh_ + h) * kw_ + w];
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  bool operator==(const Tensor4&) const = default;

 private:
  std::size_t out_ = 0;
  std::size_t in_ = 0;
  std::size_t kh_ = 0;
  std::size_t kw_ = 0;
  std::vector<double> data_;
};

// v[j] = (sum_i |m[i,j]|^p)^(1/p). Throws NumericError on a non-finite entry.
Vector pnorm_cols(const Matrix& m, double p);
// v[i] = (sum_j |m[i,j]|^p)^(1/p).
Vector pnorm_rows(const Matrix& m, double p);

// |x|^p, exact for p == 1 and p == 2.
double abs_pow(double x, double p);

Matrix scale_cols(const Matrix& m, std::span<const double> d);
Matrix scale_rows(const Matrix& m, std::span<const double> d);

// (C_in * S * S) x C_out: column j holds every coefficient of filter j.
Matrix conv_to_left_matrix(const Tensor4& t);
Tensor4 conv_from_left_matrix(const Matrix& m, std::size_t in_channels,
                              std::size_t kernel_h, std::size_t kernel_w);

// C_in x (C_out * S * S): row i holds every coefficient reading input channel i.
Matrix conv_to_right_matrix(const Tensor4& t);
Tensor4 conv_from_right_matrix(const Matrix& m, std::size_t out_channels,
                               std::size_t kernel_h, std::size_t kernel_w);

bool all_finite(std::span<const double> values) noexcept;

}  // namespace enorm

#endif  // ENORM_TENSOR_HPP_
