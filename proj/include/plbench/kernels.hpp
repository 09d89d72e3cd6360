#pragma once

#include "plbench/matrix.hpp"

// Dense products used by the forward and backward passes.
//
// The OpenMP kernels split work over output rows only. Every output element is
// accumulated by one thread in ascending index order, so results are bit-identical
// for any thread count and equal to the serial reference loops below.

namespace plbench::kernels {

/// c = a * b
Matrix gemm_nn(const Matrix& a, const Matrix& b);

/// c = a^T * b (weight gradients: inputs^T * upstream).
Matrix gemm_tn(const Matrix& a, const Matrix& b);

/// c = a * b^T (input gradients: upstream * weights^T).
Matrix gemm_nt(const Matrix& a, const Matrix& b);

/// Products below this many multiply-adds stay on the calling thread.
inline constexpr std::size_t kParallelThreshold = 1u << 16;

}  // namespace plbench::kernels

namespace plbench::kernels::reference {

// Textbook triple loops with a scalar accumulator per output element. Kept for
// testing the parallel kernels and as the baseline in the benchmark.
Matrix gemm_nn(const Matrix& a, const Matrix& b);
Matrix gemm_tn(const Matrix& a, const Matrix& b);
Matrix gemm_nt(const Matrix& a, const Matrix& b);

}  // namespace plbench::kernels::reference
