#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include <omp.h>

#include "plbench/error.hpp"
#include "plbench/kernels.hpp"
#include "plbench/matrix.hpp"
#include "plbench/numerics.hpp"
#include "plbench/random.hpp"
#include "support.hpp"

using namespace plbench;
using plbench::testing::random_matrix;

TEST_CASE("softmax of equal logits is uniform") {
  const std::vector<double> logits{0, 0, 0};
  const ProbVector p = softmax(logits);
  for (std::size_t i = 0; i < 3; ++i) CHECK(p[i] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("softmax survives huge logits") {
  const std::vector<double> logits{1000, 0};
  const ProbVector p = softmax(logits);
  CHECK(std::isfinite(p[0]));
  CHECK(p[0] == doctest::Approx(1.0));
  CHECK(p[1] < 1e-300);
}

TEST_CASE("softmax of [1, 2]") {
  const std::vector<double> logits{1, 2};
  const ProbVector p = softmax(logits);
  const double e = std::exp(1.0);
  CHECK(std::abs(p[0] - 1.0 / (1.0 + e)) < 1e-15);
  CHECK(std::abs(p[1] - e / (1.0 + e)) < 1e-15);
  CHECK(std::abs(p[0] - 0.2689) < 1e-4);
  CHECK(std::abs(p[1] - 0.7311) < 1e-4);
}

TEST_CASE("softmax sums to one and keeps the argmax") {
  RandomSource rng(11);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> logits(2 + rng.uniform_index(20));
    for (double& v : logits) v = 30.0 * rng.normal();
    const ProbVector p = softmax(logits);
    const auto v = p.values();
    CHECK(std::abs(std::accumulate(v.begin(), v.end(), 0.0) - 1.0) < 1e-9);
    CHECK(argmax(v) == argmax(logits));
  }
}

TEST_CASE("softmax rejects bad input") {
  CHECK_THROWS_AS(softmax(std::vector<double>{1.0, std::nan("")}), InvalidInput);
  CHECK_THROWS_AS(softmax(std::vector<double>{1.0, INFINITY}), InvalidInput);
  CHECK_THROWS_AS(softmax(std::vector<double>{1.0}), InvalidInput);
}

TEST_CASE("ProbVector validates its invariant") {
  CHECK_NOTHROW(ProbVector({0.25, 0.75}));
  CHECK_THROWS_AS(ProbVector({1.0}), InvalidInput);
  CHECK_THROWS_AS(ProbVector({0.5, 0.6}), InvalidInput);
  CHECK_THROWS_AS(ProbVector({1.2, -0.2}), InvalidInput);
}

TEST_CASE("normalized entropy examples") {
  CHECK(normalized_entropy(std::vector<double>(6, 1.0 / 6.0)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(normalized_entropy(std::vector<double>{1, 0, 0, 0, 0, 0}) <= 1e-10);
  CHECK(std::abs(normalized_entropy(std::vector<double>{0.5, 0.5, 0, 0}) - 0.5) < 1e-9);
  CHECK_THROWS_AS(normalized_entropy(std::vector<double>{1.0}), InvalidInput);
}

TEST_CASE("normalized entropy is permutation invariant") {
  RandomSource rng(5);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> logits(6);
    for (double& v : logits) v = 2.0 * rng.normal();
    const auto p = softmax(logits);
    std::vector<double> q(p.values().begin(), p.values().end());
    const double before = normalized_entropy(q);
    rng.shuffle(std::span<double>(q));
    CHECK(std::abs(normalized_entropy(q) - before) < 1e-12);
  }
}

TEST_CASE("normalized entropy reaches one only at the uniform vector") {
  RandomSource rng(6);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> logits(5);
    for (double& v : logits) v = 0.5 * rng.normal();
    const double h = normalized_entropy(softmax(logits));
    CHECK(h < 1.0);
    CHECK(h <= 1.0 + 1e-9);
  }
  CHECK(normalized_entropy(std::vector<double>(5, 0.2)) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("entropy of softmax is continuous in the logits") {
  RandomSource rng(7);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> logits(6);
    for (double& v : logits) v = 3.0 * rng.normal();
    std::vector<double> nudged = logits;
    for (double& v : nudged) v += 1e-8 * (2.0 * rng.uniform() - 1.0);
    CHECK(std::abs(normalized_entropy(softmax(logits)) - normalized_entropy(softmax(nudged))) <= 1e-6);
  }
}

TEST_CASE("argmax ties go to the lowest index") {
  CHECK(argmax(std::vector<double>{0.2, 0.4, 0.4}) == 1);
  CHECK(argmax(std::vector<double>{0.5, 0.5}) == 0);
}

TEST_CASE("identity times A is A") {
  RandomSource rng(1);
  const Matrix a = random_matrix(4, 3, rng);
  CHECK(matmul(Matrix::identity(4), a) == a);
}

TEST_CASE("transpose of a product, element by element") {
  RandomSource rng(2);
  const Matrix a = random_matrix(3, 4, rng);
  const Matrix b = random_matrix(4, 2, rng);
  const Matrix lhs = transpose(matmul(a, b));
  const Matrix rhs = matmul(transpose(b), transpose(a));
  REQUIRE(lhs.rows() == 2);
  REQUIRE(lhs.cols() == 3);
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      double brute = 0.0;
      for (std::size_t k = 0; k < 4; ++k) brute += a(j, k) * b(k, i);
      CHECK(std::abs(lhs(i, j) - brute) < 1e-12);
      CHECK(std::abs(rhs(i, j) - brute) < 1e-12);
    }
  }
}

TEST_CASE("adding zero is the identity") {
  RandomSource rng(3);
  const Matrix a = random_matrix(3, 5, rng);
  CHECK(add(a, Matrix(3, 5)) == a);
  CHECK(scale(a, 1.0) == a);
}

TEST_CASE("shape mismatches throw") {
  CHECK_THROWS_AS(matmul(Matrix(2, 3), Matrix(2, 3)), ShapeError);
  CHECK_THROWS_AS(add(Matrix(2, 3), Matrix(3, 2)), ShapeError);
  CHECK_THROWS_AS(Matrix(2, 2, std::vector<double>{1, 2, 3}), ShapeError);
  Matrix m(2, 3);
  CHECK_THROWS_AS(add_row_bias(m, Matrix(1, 2)), ShapeError);
}

TEST_CASE("parallel kernels equal the serial reference bit for bit") {
  RandomSource rng(4);
  // Large enough to cross the parallel threshold.
  const Matrix a = random_matrix(150, 90, rng);
  const Matrix b = random_matrix(90, 70, rng);
  const Matrix at = random_matrix(90, 150, rng);
  const Matrix bt = random_matrix(70, 90, rng);
  REQUIRE(150u * 90u * 70u >= kernels::kParallelThreshold);

  const int saved = omp_get_max_threads();
  for (int threads : {1, 2, 8}) {
    omp_set_num_threads(threads);
    CHECK(kernels::gemm_nn(a, b) == kernels::reference::gemm_nn(a, b));
    CHECK(kernels::gemm_tn(at, b) == kernels::reference::gemm_tn(at, b));
    CHECK(kernels::gemm_nt(a, bt) == kernels::reference::gemm_nt(a, bt));
  }
  omp_set_num_threads(saved);
}

TEST_CASE("kernels agree on small and degenerate shapes") {
  RandomSource rng(8);
  for (auto [m, k, n] : {std::tuple{1, 1, 1}, {1, 5, 3}, {4, 1, 2}, {3, 4, 1}, {0, 3, 2}}) {
    const Matrix a = random_matrix(m, k, rng);
    const Matrix b = random_matrix(k, n, rng);
    CHECK(kernels::gemm_nn(a, b) == kernels::reference::gemm_nn(a, b));
    CHECK(kernels::gemm_tn(transpose(a), b) == kernels::reference::gemm_tn(transpose(a), b));
    CHECK(kernels::gemm_nt(a, transpose(b)) == kernels::reference::gemm_nt(a, transpose(b)));
  }
}

TEST_CASE("random source reproduces its sequence") {
  RandomSource a(42);
  RandomSource b(42);
  for (int i = 0; i < 1000; ++i) {
    CHECK(a.next_u64() == b.next_u64());
    CHECK(a.normal() == b.normal());
  }
}

TEST_CASE("random source matches frozen values") {
  // The engine's 10000th output for seed 5489 is fixed by the C++ standard.
  RandomSource engine(5489);
  for (int i = 0; i < 9999; ++i) engine.next_u64();
  CHECK(engine.next_u64() == 9981545732273789042ull);

  // Distribution outputs frozen from a reference run.
  RandomSource rng(42);
  CHECK(rng.uniform() == 0x1.82a3befaddcbcp-1);
  CHECK(rng.normal() == 0x1.a1f7aa90cb86dp-7);
  CHECK(rng.uniform_index(1000) == 662u);
}

TEST_CASE("uniform_index stays in range and covers it") {
  RandomSource rng(9);
  std::vector<int> seen(7, 0);
  for (int i = 0; i < 7000; ++i) {
    const auto k = rng.uniform_index(7);
    REQUIRE(k < 7);
    ++seen[k];
  }
  for (int c : seen) CHECK(c > 800);
}

TEST_CASE("normal draws have unit variance") {
  RandomSource rng(10);
  double sum = 0.0;
  double sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sq += x * x;
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(std::abs(sq / n - 1.0) < 0.02);
}

TEST_CASE("derived seeds differ per stream and are stable") {
  CHECK(derive_seed(0, 1) != derive_seed(0, 2));
  CHECK(derive_seed(1, 1) != derive_seed(0, 1));
  CHECK(derive_seed(5, 3) == derive_seed(5, 3));
}
