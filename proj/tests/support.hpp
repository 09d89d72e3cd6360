#pragma once

// Shared helpers for the unit tests and the acceptance binary: random instances
// and central finite differences.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "plbench/losses.hpp"
#include "plbench/matrix.hpp"
#include "plbench/model.hpp"
#include "plbench/random.hpp"

namespace plbench::testing {

inline Matrix random_matrix(std::size_t rows, std::size_t cols, RandomSource& rng,
                            double scale = 1.0) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = scale * rng.normal();
  return m;
}

/// Small model with nonzero biases so every parameter has a visible gradient.
inline ModelState random_small_model(RandomSource& rng, std::size_t classes = 4,
                                     std::size_t input_dim = 5, std::size_t projection_dim = 6) {
  ModelConfig cfg;
  cfg.input_dim = input_dim;
  cfg.hidden_dim = 7;
  cfg.feature_dim = 6;
  cfg.num_known_classes = classes;
  cfg.projection_dim = projection_dim;
  ModelState state = init_model(cfg, rng);
  for_each_tensor(state.params, [&](std::string_view name, Matrix& t) {
    if (name.front() == 'b') {
      for (double& v : t.values()) v = 0.3 * rng.normal();
    }
  });
  return state;
}

/// ||a - b|| / max(||a|| + ||b||, floor) over all entries.
inline double relative_error(const Matrix& analytic, const Matrix& numeric, double floor = 1e-10) {
  double diff = 0.0;
  double na = 0.0;
  double nn = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double a = analytic.values()[i];
    const double n = numeric.values()[i];
    diff += (a - n) * (a - n);
    na += a * a;
    nn += n * n;
  }
  return std::sqrt(diff) / std::max(std::sqrt(na) + std::sqrt(nn), floor);
}

inline constexpr double kFiniteDifferenceStep = 1e-4;

/// Central differences of `f` with respect to every entry of `x` (restored after).
inline Matrix numeric_gradient(Matrix& x, const std::function<double()>& f,
                               double h = kFiniteDifferenceStep) {
  Matrix g(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x.values()[i];
    x.values()[i] = saved + h;
    const double up = f();
    x.values()[i] = saved - h;
    const double down = f();
    x.values()[i] = saved;
    g.values()[i] = (up - down) / (2.0 * h);
  }
  return g;
}

/// Worst per-tensor relative error between backward() and finite differences of
/// `loss(state)`.
inline double worst_parameter_error(ModelState& state, const Parameters& analytic,
                                    const std::function<double(const ModelState&)>& loss) {
  double worst = 0.0;
  std::vector<Matrix*> tensors;
  for_each_tensor(state.params, [&](std::string_view, Matrix& t) { tensors.push_back(&t); });
  std::vector<const Matrix*> grads;
  for_each_tensor(analytic, [&](std::string_view, const Matrix& t) { grads.push_back(&t); });
  for (std::size_t k = 0; k < tensors.size(); ++k) {
    const Matrix numeric = numeric_gradient(*tensors[k], [&] { return loss(state); });
    worst = std::max(worst, relative_error(*grads[k], numeric));
  }
  return worst;
}

/// Random pseudo-labels: each sample selected with probability 3/4, label uniform
/// over known classes plus UNKNOWN.
inline std::vector<PseudoLabelAssignment> random_assignments(std::size_t n, std::size_t classes,
                                                             RandomSource& rng) {
  std::vector<PseudoLabelAssignment> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].sample_index = i;
    out[i].selected = rng.uniform() < 0.75;
    const std::size_t pick = rng.uniform_index(classes + 1);
    out[i].label = pick == classes ? kUnknown : static_cast<Label>(pick);
  }
  out[0].selected = true;
  out[0].label = 0;
  return out;
}

/// Bank with every slot initialized to a random unit vector.
inline PrototypeBank random_bank(std::size_t classes, std::size_t dim, RandomSource& rng) {
  PrototypeBank bank(classes, dim, true);
  for (std::size_t s = 0; s < bank.slots(); ++s) {
    std::vector<double> v(dim);
    for (double& x : v) x = rng.normal();
    bank.set(s, v);
  }
  return bank;
}

}  // namespace plbench::testing
