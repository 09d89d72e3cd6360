#include "plbench/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "plbench/error.hpp"
#include "plbench/kernels.hpp"

namespace plbench {

namespace {

std::string shape_of(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw ShapeError("matrix data length " + std::to_string(data_.size()) + " does not match " +
                     std::to_string(rows_) + "x" + std::to_string(cols_));
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

bool Matrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Matrix::fill(double v) noexcept { std::fill(data_.begin(), data_.end(), v); }

Matrix Matrix::slice_rows(std::size_t first, std::size_t count) const {
  if (first + count > rows_) {
    throw ShapeError("row slice [" + std::to_string(first) + ", " + std::to_string(first + count) +
                     ") out of range for " + shape_of(*this));
  }
  const auto begin = data_.begin() + static_cast<std::ptrdiff_t>(first * cols_);
  return Matrix(count, cols_,
                std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(count * cols_)));
}

Matrix add(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError("add: " + shape_of(a) + " vs " + shape_of(b));
  }
  Matrix out = a;
  auto dst = out.values();
  auto src = b.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  return out;
}

Matrix scale(const Matrix& a, double s) {
  Matrix out = a;
  for (double& v : out.values()) v *= s;
  return out;
}

Matrix transpose(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) out(c, r) = a(r, c);
  return out;
}

Matrix matmul(const Matrix& a, const Matrix& b) { return kernels::gemm_nn(a, b); }

void add_row_bias(Matrix& m, const Matrix& bias) {
  if (bias.rows() != 1 || bias.cols() != m.cols()) {
    throw ShapeError("bias " + shape_of(bias) + " does not broadcast over " + shape_of(m));
  }
  const auto b = bias.row(0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += b[c];
  }
}

Matrix column_sums(const Matrix& m) {
  Matrix out(1, m.cols());
  auto acc = out.row(0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) acc[c] += row[c];
  }
  return out;
}

}  // namespace plbench
