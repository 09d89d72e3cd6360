// Serial reference vs OpenMP kernels at the shapes of one training step
// (batch 64, 32 -> 64 -> 64 -> {6, 128}), plus one full adaptation step.

#include <benchmark/benchmark.h>
#include <omp.h>

#include "plbench/kernels.hpp"
#include "plbench/losses.hpp"
#include "plbench/model.hpp"
#include "plbench/random.hpp"

namespace {

using plbench::Matrix;

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  plbench::RandomSource rng(seed);
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.normal();
  return m;
}

template <Matrix (*Gemm)(const Matrix&, const Matrix&)>
void BM_gemm_nn(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix a = random_matrix(n, n, 1);
  const Matrix b = random_matrix(n, n, 2);
  omp_set_num_threads(static_cast<int>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(Gemm(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}

template <Matrix (*Gemm)(const Matrix&, const Matrix&)>
void BM_gemm_tn(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix a = random_matrix(n, n, 3);
  const Matrix b = random_matrix(n, n, 4);
  omp_set_num_threads(static_cast<int>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(Gemm(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}

void square_args(benchmark::internal::Benchmark* b) {
  for (int n : {64, 128, 256}) {
    for (int threads : {1, 2, 4}) b->Args({n, threads});
  }
  b->UseRealTime();
}

void BM_adaptation_step(benchmark::State& state) {
  plbench::RandomSource rng(5);
  plbench::ModelConfig cfg;
  plbench::ModelState model = plbench::init_model(cfg, rng);
  const Matrix x = random_matrix(64, cfg.input_dim, 6);
  std::vector<plbench::PseudoLabelAssignment> assign(64);
  for (std::size_t i = 0; i < 64; ++i) {
    assign[i] = {i, true, static_cast<plbench::Label>(i % cfg.num_known_classes), true};
  }
  plbench::PrototypeBank bank(cfg.num_known_classes, cfg.projection_dim);
  omp_set_num_threads(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    const auto rec = plbench::forward(model, x);
    const auto obj = plbench::adaptation_objective(rec.probs, rec.projections, assign, bank,
                                                   plbench::LossConfig{});
    const auto grads = plbench::backward(model, rec, obj.grad_logits, obj.grad_projections);
    plbench::sgd_step(model, grads, plbench::OptimConfig{});
    plbench::update_prototypes(bank, rec.projections, assign, 0.9);
  }
}

}  // namespace

BENCHMARK(BM_gemm_nn<plbench::kernels::reference::gemm_nn>)->Name("gemm_nn/serial")->Apply(square_args);
BENCHMARK(BM_gemm_nn<plbench::kernels::gemm_nn>)->Name("gemm_nn/openmp")->Apply(square_args);
BENCHMARK(BM_gemm_tn<plbench::kernels::reference::gemm_tn>)->Name("gemm_tn/serial")->Apply(square_args);
BENCHMARK(BM_gemm_tn<plbench::kernels::gemm_tn>)->Name("gemm_tn/openmp")->Apply(square_args);
BENCHMARK(BM_adaptation_step)->Arg(1)->Arg(2)->Arg(4)->UseRealTime();

BENCHMARK_MAIN();
