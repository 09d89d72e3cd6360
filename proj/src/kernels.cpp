#include "plbench/kernels.hpp"

#include <cstdint>
#include <string>

#include "plbench/error.hpp"

namespace plbench::kernels {

namespace {

void require(bool ok, const char* op, const Matrix& a, const Matrix& b) {
  if (!ok) {
    throw ShapeError(std::string(op) + ": incompatible shapes " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " and " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()));
  }
}

}  // namespace

Matrix gemm_nn(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.rows(), "gemm_nn", a, b);
  const std::int64_t m = static_cast<std::int64_t>(a.rows());
  const std::size_t inner = a.cols();
  const std::size_t n = b.cols();
  Matrix c(a.rows(), n);
  const bool big = a.rows() * inner * n >= kParallelThreshold;

#pragma omp parallel for schedule(static) if (big)
  for (std::int64_t i = 0; i < m; ++i) {
    double* crow = c.row(static_cast<std::size_t>(i)).data();
    const double* arow = a.row(static_cast<std::size_t>(i)).data();
    for (std::size_t k = 0; k < inner; ++k) {
      const double aik = arow[k];
      const double* brow = b.row(k).data();
      for (std::size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

Matrix gemm_tn(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows(), "gemm_tn", a, b);
  const std::int64_t m = static_cast<std::int64_t>(a.cols());
  const std::size_t inner = a.rows();
  const std::size_t n = b.cols();
  Matrix c(a.cols(), n);
  const bool big = a.cols() * inner * n >= kParallelThreshold;

#pragma omp parallel for schedule(static) if (big)
  for (std::int64_t k = 0; k < m; ++k) {
    double* crow = c.row(static_cast<std::size_t>(k)).data();
    for (std::size_t i = 0; i < inner; ++i) {
      const double aik = a(i, static_cast<std::size_t>(k));
      const double* brow = b.row(i).data();
      for (std::size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

Matrix gemm_nt(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.cols(), "gemm_nt", a, b);
  return gemm_nn(a, transpose(b));
}

}  // namespace plbench::kernels

namespace plbench::kernels::reference {

Matrix gemm_nn(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.rows(), "reference::gemm_nn", a, b);
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

Matrix gemm_tn(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows(), "reference::gemm_tn", a, b);
  Matrix c(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.cols(); ++k)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < a.rows(); ++i) s += a(i, k) * b(i, j);
      c(k, j) = s;
    }
  return c;
}

Matrix gemm_nt(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.cols(), "reference::gemm_nt", a, b);
  Matrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(j, k);
      c(i, j) = s;
    }
  return c;
}

}  // namespace plbench::kernels::reference
