#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace ocl {

/// Dense row-major float64 matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  std::string shape_string() const;
  bool all_finite() const;

  Matrix& operator+=(const Matrix& other);
  Matrix& operator*=(double scale);

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix transpose(const Matrix& m);

// Products dispatch to the OpenMP kernels in kernels.hpp.
Matrix matmul(const Matrix& a, const Matrix& b);
// a * b^T
Matrix matmul_transposed_b(const Matrix& a, const Matrix& b);
// a^T * b
Matrix matmul_transposed_a(const Matrix& a, const Matrix& b);

/// input * weight + bias, with bias broadcast over rows.
Matrix affine(const Matrix& input, const Matrix& weight, const Matrix& bias);
Matrix relu(const Matrix& input);

/// Scales every row to unit Euclidean norm. Throws DegenerateEmbeddingError
/// when a row norm is below kMinRowNorm.
Matrix l2_normalize_rows(const Matrix& input);
inline constexpr double kMinRowNorm = 1e-12;

Matrix concat_cols(const Matrix& left, const Matrix& right);
Matrix one_hot(std::span<const std::size_t> ids, std::size_t width);

double frobenius_norm(const Matrix& m);

}  // namespace ocl
