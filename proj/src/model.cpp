#include "plbench/model.hpp"

#include <cmath>
#include <string>

#include "plbench/error.hpp"
#include "plbench/kernels.hpp"
#include "plbench/numerics.hpp"

namespace plbench {

void ModelConfig::validate() const {
  if (input_dim < 1 || hidden_dim < 1 || feature_dim < 1 || projection_dim < 1) {
    throw InvalidInput("model dimensions must be >= 1");
  }
  if (num_known_classes < 2) throw InvalidInput("model needs at least 2 known classes");
}

void OptimConfig::validate() const {
  if (!(learning_rate > 0.0)) throw InvalidInput("learning rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw InvalidInput("momentum must lie in [0, 1)");
}

Parameters Parameters::zeros(const ModelConfig& c) {
  Parameters p;
  p.w1 = Matrix(c.input_dim, c.hidden_dim);
  p.b1 = Matrix(1, c.hidden_dim);
  p.w2 = Matrix(c.hidden_dim, c.feature_dim);
  p.b2 = Matrix(1, c.feature_dim);
  p.wc = Matrix(c.feature_dim, c.num_known_classes);
  p.bc = Matrix(1, c.num_known_classes);
  p.wp = Matrix(c.feature_dim, c.projection_dim);
  p.bp = Matrix(1, c.projection_dim);
  return p;
}

ModelState init_model(const ModelConfig& config, RandomSource& rng) {
  config.validate();
  ModelState state{config, Parameters::zeros(config), Parameters::zeros(config)};
  for_each_tensor(state.params, [&](std::string_view name, Matrix& t) {
    if (name.front() != 'w') return;
    const double stddev = 1.0 / std::sqrt(static_cast<double>(t.rows()));
    for (double& v : t.values()) v = stddev * rng.normal();
  });
  return state;
}

ForwardRecord forward(const ModelState& state, const Matrix& batch) {
  const Parameters& p = state.params;
  if (batch.cols() != state.config.input_dim) {
    throw ShapeError("forward: batch has " + std::to_string(batch.cols()) +
                     " features, model expects " + std::to_string(state.config.input_dim));
  }
  ForwardRecord rec;
  rec.inputs = batch;

  rec.hidden_pre = kernels::gemm_nn(batch, p.w1);
  add_row_bias(rec.hidden_pre, p.b1);
  rec.hidden = rec.hidden_pre;
  for (double& v : rec.hidden.values()) v = v > 0.0 ? v : 0.0;

  rec.features = kernels::gemm_nn(rec.hidden, p.w2);
  add_row_bias(rec.features, p.b2);

  rec.logits = kernels::gemm_nn(rec.features, p.wc);
  add_row_bias(rec.logits, p.bc);
  rec.probs = softmax_rows(rec.logits);

  rec.projection_raw = kernels::gemm_nn(rec.features, p.wp);
  add_row_bias(rec.projection_raw, p.bp);
  rec.projections = Matrix(batch.rows(), state.config.projection_dim);
  rec.projection_norms.assign(batch.rows(), 0.0);
  for (std::size_t i = 0; i < batch.rows(); ++i) {
    const auto raw = rec.projection_raw.row(i);
    double sq = 0.0;
    for (double v : raw) sq += v * v;
    const double norm = std::sqrt(sq);
    rec.projection_norms[i] = norm;
    auto out = rec.projections.row(i);
    if (norm < kProjectionNormGuard) {
      out[0] = 1.0;
      continue;
    }
    for (std::size_t j = 0; j < raw.size(); ++j) out[j] = raw[j] / norm;
  }
  return rec;
}

namespace {

void require_shape(const Matrix& m, std::size_t rows, std::size_t cols, const char* what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw ShapeError(std::string("backward: ") + what + " is " + std::to_string(m.rows()) + "x" +
                     std::to_string(m.cols()) + ", expected " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  }
}

}  // namespace

Parameters backward(const ModelState& state, const ForwardRecord& rec, const Matrix& grad_logits,
                    const Matrix& grad_projections) {
  const Parameters& p = state.params;
  const std::size_t n = rec.batch_size();
  require_shape(grad_logits, n, state.config.num_known_classes, "grad_logits");
  require_shape(grad_projections, n, state.config.projection_dim, "grad_projections");

  // d/du of u/|u| applied to g: (g - z (z.g)) / |u|
  Matrix grad_raw(n, state.config.projection_dim);
  for (std::size_t i = 0; i < n; ++i) {
    const double norm = rec.projection_norms[i];
    if (norm < kProjectionNormGuard) continue;
    const auto z = rec.projections.row(i);
    const auto g = grad_projections.row(i);
    double dot = 0.0;
    for (std::size_t j = 0; j < z.size(); ++j) dot += z[j] * g[j];
    auto out = grad_raw.row(i);
    for (std::size_t j = 0; j < z.size(); ++j) out[j] = (g[j] - z[j] * dot) / norm;
  }

  Parameters grads;
  grads.wp = kernels::gemm_tn(rec.features, grad_raw);
  grads.bp = column_sums(grad_raw);
  grads.wc = kernels::gemm_tn(rec.features, grad_logits);
  grads.bc = column_sums(grad_logits);

  Matrix grad_features =
      add(kernels::gemm_nt(grad_raw, p.wp), kernels::gemm_nt(grad_logits, p.wc));
  grads.w2 = kernels::gemm_tn(rec.hidden, grad_features);
  grads.b2 = column_sums(grad_features);

  Matrix grad_hidden = kernels::gemm_nt(grad_features, p.w2);
  auto gh = grad_hidden.values();
  const auto pre = rec.hidden_pre.values();
  for (std::size_t i = 0; i < gh.size(); ++i) {
    if (!(pre[i] > 0.0)) gh[i] = 0.0;
  }
  grads.w1 = kernels::gemm_tn(rec.inputs, grad_hidden);
  grads.b1 = column_sums(grad_hidden);
  return grads;
}

void sgd_step(ModelState& state, const Parameters& grads, const OptimConfig& optim) {
  optim.validate();
  for_each_tensor(grads, [&](std::string_view name, const Matrix& g) {
    if (!g.all_finite()) throw NumericError(std::string(name), "non-finite gradient");
  });

  // Visit params, velocity and grads in lockstep.
  std::vector<Matrix*> params;
  std::vector<Matrix*> velocity;
  std::vector<const Matrix*> gradients;
  for_each_tensor(state.params, [&](std::string_view, Matrix& t) { params.push_back(&t); });
  for_each_tensor(state.velocity, [&](std::string_view, Matrix& t) { velocity.push_back(&t); });
  for_each_tensor(grads, [&](std::string_view, const Matrix& t) { gradients.push_back(&t); });

  for (std::size_t t = 0; t < params.size(); ++t) {
    if (gradients[t]->rows() != params[t]->rows() || gradients[t]->cols() != params[t]->cols()) {
      throw ShapeError("sgd_step: gradient shape does not match parameter " + std::to_string(t));
    }
  }
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto theta = params[t]->values();
    auto v = velocity[t]->values();
    const auto g = gradients[t]->values();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      v[i] = optim.momentum * v[i] + g[i];
      theta[i] -= optim.learning_rate * v[i];
    }
  }
}

void reset_velocity(ModelState& state) { state.velocity = Parameters::zeros(state.config); }

void round_to_float32(Parameters& params) {
  for_each_tensor(params, [](std::string_view, Matrix& t) {
    for (double& v : t.values()) v = static_cast<double>(static_cast<float>(v));
  });
}

}  // namespace plbench
