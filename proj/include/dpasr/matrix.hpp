// Copyright 2026 The dpasr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef DPASR_MATRIX_HPP_
#define DPASR_MATRIX_HPP_

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace dpasr {

/// Dense row-major matrix of doubles. Every tensor in the system (features,
/// embeddings, parameters, gradients) is one of these; vectors are 1xN.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix FromRows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  bool SameShape(const Matrix &o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  double *data() { return data_.data(); }
  const double *data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  double &operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double &operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> Row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> Row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  void SetZero();
  void Resize(std::size_t rows, std::size_t cols);
  Matrix Transpose() const;
  bool AllFinite() const;

  // this += alpha * o
  void AddScaled(const Matrix &o, double alpha = 1.0);
  void Scale(double alpha);

  double Sum() const;
  double SquaredNorm() const;
  double MaxAbs() const;

  bool operator==(const Matrix &o) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

}  // namespace dpasr

#endif  // DPASR_MATRIX_HPP_
