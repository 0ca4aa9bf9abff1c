#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "core/errors.hpp"

namespace msa::num {

// Dense row-major matrix of doubles. Rows are time steps, columns are
// feature dimensions. Zero-row matrices are legal and propagate as empty.
class Matrix {
 public:
  Matrix() : rows_(0), cols_(0) {}
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_)
      throw DimensionError("matrix data length " + std::to_string(data_.size()) +
                           " does not match shape " + shape_str());
  }

  static Matrix from_rows(const std::vector<std::vector<double>>& rows);
  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  double& operator[](std::size_t k) { return data_[k]; }
  double operator[](std::size_t k) const { return data_[k]; }

  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(data_.data() + i * cols_, cols_);
  }
  std::span<double> row(std::size_t i) {
    return std::span<double>(data_.data() + i * cols_, cols_);
  }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
  bool operator==(const Matrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
  }

  std::string shape_str() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
  }

  bool all_finite() const;

 private:
  std::size_t rows_, cols_;
  std::vector<double> data_;
};

// --- forward kernels ---

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
Matrix softmax_rows(const Matrix& a);
Matrix sigmoid(const Matrix& a);
Matrix tanh_m(const Matrix& a);
Matrix relu(const Matrix& a);
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix mul(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double c);
Matrix layer_norm(const Matrix& x, const Matrix& gain, const Matrix& bias,
                  double eps = 1e-5);
Matrix concat_cols(std::span<const Matrix> parts);
Matrix concat_cols(const Matrix& a, const Matrix& b);
Matrix slice_cols(const Matrix& a, std::size_t begin, std::size_t end);
Matrix mean_pool_rows(const Matrix& a);
double sum(const Matrix& a);

}  // namespace msa::num
