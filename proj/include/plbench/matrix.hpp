#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace plbench {

/// Dense row-major matrix of doubles. Vectors are 1 x n matrices.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  bool all_finite() const noexcept;
  void fill(double v) noexcept;

  /// Rows [first, first + count) as a new matrix.
  Matrix slice_rows(std::size_t first, std::size_t count) const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix add(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double s);
Matrix transpose(const Matrix& a);

/// a * b. Dispatches to the OpenMP kernel.
Matrix matmul(const Matrix& a, const Matrix& b);

/// Broadcast-add a 1 x cols bias row to every row of `m`.
void add_row_bias(Matrix& m, const Matrix& bias);

/// Column sums as a 1 x cols matrix.
Matrix column_sums(const Matrix& m);

}  // namespace plbench
