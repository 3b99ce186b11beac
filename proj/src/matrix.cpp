#include "ocl/matrix.hpp"

#include <fmt/format.h>

#include <cmath>
#include <utility>

#include "ocl/errors.hpp"
#include "ocl/kernels.hpp"

namespace ocl {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw DimensionError(fmt::format("matrix data length {} does not match shape {}x{}",
                                     data_.size(), rows_, cols_));
  }
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("ragged initializer for Matrix");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Matrix(r, c, std::move(data));
}

std::string Matrix::shape_string() const { return fmt::format("{}x{}", rows_, cols_); }

bool Matrix::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Matrix& Matrix::operator+=(const Matrix& other) {
  if (rows_ != other.rows_ || cols_ != other.cols_) {
    throw DimensionError(
        fmt::format("cannot add {} to {}", other.shape_string(), shape_string()));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Matrix& Matrix::operator*=(double scale) {
  for (double& v : data_) v *= scale;
  return *this;
}

Matrix transpose(const Matrix& m) {
  Matrix out(m.cols(), m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) out(c, r) = m(r, c);
  }
  return out;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError(
        fmt::format("matmul shape mismatch: {} * {}", a.shape_string(), b.shape_string()));
  }
  Matrix out(a.rows(), b.cols());
  kernels::parallel::matmul(a.data(), b.data(), out.data(), a.rows(), a.cols(), b.cols());
  return out;
}

Matrix matmul_transposed_b(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw DimensionError(fmt::format("matmul shape mismatch: {} * ({})^T", a.shape_string(),
                                     b.shape_string()));
  }
  Matrix out(a.rows(), b.rows());
  kernels::parallel::matmul_transposed_b(a.data(), b.data(), out.data(), a.rows(), a.cols(),
                                         b.rows());
  return out;
}

Matrix matmul_transposed_a(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw DimensionError(fmt::format("matmul shape mismatch: ({})^T * {}", a.shape_string(),
                                     b.shape_string()));
  }
  return matmul(transpose(a), b);
}

Matrix affine(const Matrix& input, const Matrix& weight, const Matrix& bias) {
  if (input.cols() != weight.rows() || bias.rows() != 1 || bias.cols() != weight.cols()) {
    throw DimensionError(fmt::format("affine shape mismatch: input {} weight {} bias {}",
                                     input.shape_string(), weight.shape_string(),
                                     bias.shape_string()));
  }
  Matrix out = matmul(input, weight);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < out.cols(); ++c) row[c] += bias(0, c);
  }
  return out;
}

Matrix relu(const Matrix& input) {
  Matrix out = input;
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return out;
}

Matrix l2_normalize_rows(const Matrix& input) {
  Matrix out = input;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    double sq = 0.0;
    for (double v : row) sq += v * v;
    const double norm = std::sqrt(sq);
    if (!(norm >= kMinRowNorm)) {
      throw DegenerateEmbeddingError(
          fmt::format("row {} has norm {} and cannot be normalized", r, norm));
    }
    for (double& v : row) v /= norm;
  }
  return out;
}

Matrix concat_cols(const Matrix& left, const Matrix& right) {
  if (left.rows() != right.rows()) {
    throw DimensionError(fmt::format("cannot concatenate {} with {}", left.shape_string(),
                                     right.shape_string()));
  }
  Matrix out(left.rows(), left.cols() + right.cols());
  for (std::size_t r = 0; r < left.rows(); ++r) {
    auto dst = out.row(r);
    auto a = left.row(r);
    auto b = right.row(r);
    std::copy(a.begin(), a.end(), dst.begin());
    std::copy(b.begin(), b.end(), dst.begin() + static_cast<std::ptrdiff_t>(a.size()));
  }
  return out;
}

Matrix one_hot(std::span<const std::size_t> ids, std::size_t width) {
  Matrix out(ids.size(), width);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] >= width) {
      throw LabelError(fmt::format("id {} outside one-hot width {}", ids[r], width));
    }
    out(r, ids[r]) = 1.0;
  }
  return out;
}

double frobenius_norm(const Matrix& m) {
  double sq = 0.0;
  for (double v : m.values()) sq += v * v;
  return std::sqrt(sq);
}

}  // namespace ocl
