// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "rtdnet/common.hpp"

namespace rtdnet {

// Dense row-major matrix of doubles. A row vector is 1 x c, a column vector
// r x 1, a scalar 1 x 1.
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols) { resize(rows, cols); }
  Matrix(int rows, int cols, std::vector<double> values)
      : rows_(rows), cols_(cols), data_(std::move(values)) {
    if (static_cast<std::size_t>(rows_) * cols_ != data_.size())
      throw ContractError("Matrix: data size does not match shape");
  }

  static Matrix scalar(double v) {
    Matrix m(1, 1);
    m.data_[0] = v;
    return m;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  long size() const { return static_cast<long>(rows_) * cols_; }
  bool empty() const { return size() == 0; }

  double& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  double operator()(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  double& operator[](long i) { return data_[i]; }
  double operator[](long i) const { return data_[i]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double* row(int r) { return data_.data() + static_cast<std::size_t>(r) * cols_; }
  const double* row(int r) const { return data_.data() + static_cast<std::size_t>(r) * cols_; }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  // Reshapes and zeroes. Keeps the underlying capacity so tapes can recycle
  // node storage across steps.
  void resize(int rows, int cols) {
    rows_ = rows;
    cols_ = cols;
    data_.assign(static_cast<std::size_t>(rows) * cols, 0.0);
  }

  // Reshape without clearing surviving elements; contents are unspecified.
  void reshape(int rows, int cols) {
    rows_ = rows;
    cols_ = cols;
    data_.resize(static_cast<std::size_t>(rows) * cols);
  }

  const std::vector<double>& values() const { return data_; }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

// A trainable tensor: value plus a persistent gradient accumulator. The
// optimizer owns zeroing grad between steps; backward passes only add to it.
struct Param {
  std::string name;
  Matrix value;
  Matrix grad;

  Param() = default;
  Param(std::string n, Matrix v) : name(std::move(n)), value(std::move(v)) {
    grad.resize(value.rows(), value.cols());
  }

  void zero_grad() { grad.fill(0.0); }
};

}  // namespace rtdnet
