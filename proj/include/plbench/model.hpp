#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "plbench/matrix.hpp"
#include "plbench/random.hpp"

namespace plbench {

struct ModelConfig {
  std::size_t input_dim = 32;
  std::size_t hidden_dim = 64;
  std::size_t feature_dim = 64;
  std::size_t num_known_classes = 6;
  std::size_t projection_dim = 128;

  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct OptimConfig {
  double learning_rate = 0.001;
  double momentum = 0.9;

  void validate() const;
};

/// All trainable tensors. Weights are stored fan_in x fan_out so a layer is
/// `inputs * w + b`; biases are 1 x fan_out.
///
///   hidden   = relu(x * w1 + b1)
///   features = hidden * w2 + b2
///   logits   = features * wc + bc
///   proj     = normalize(features * wp + bp)
struct Parameters {
  Matrix w1, b1;
  Matrix w2, b2;
  Matrix wc, bc;
  Matrix wp, bp;

  static Parameters zeros(const ModelConfig& config);
  friend bool operator==(const Parameters&, const Parameters&) = default;
};

/// Calls f(name, tensor) for every tensor in a fixed order. Works for const and
/// non-const Parameters.
template <class P, class F>
void for_each_tensor(P& p, F&& f) {
  f(std::string_view{"w1"}, p.w1);
  f(std::string_view{"b1"}, p.b1);
  f(std::string_view{"w2"}, p.w2);
  f(std::string_view{"b2"}, p.b2);
  f(std::string_view{"wc"}, p.wc);
  f(std::string_view{"bc"}, p.bc);
  f(std::string_view{"wp"}, p.wp);
  f(std::string_view{"bp"}, p.bp);
}

/// Parameters plus the optimizer's velocity (same shapes).
struct ModelState {
  ModelConfig config;
  Parameters params;
  Parameters velocity;
};

/// Everything the backward pass needs, one row per sample.
struct ForwardRecord {
  Matrix inputs;
  Matrix hidden_pre;
  Matrix hidden;
  Matrix features;
  Matrix logits;
  Matrix probs;
  Matrix projection_raw;
  Matrix projections;
  std::vector<double> projection_norms;

  std::size_t batch_size() const noexcept { return inputs.rows(); }
};

/// Projections with a smaller raw norm are replaced by e1 and get zero gradient.
inline constexpr double kProjectionNormGuard = 1e-8;

/// Weights ~ N(0, 1/fan_in); biases and velocity zero.
ModelState init_model(const ModelConfig& config, RandomSource& rng);

ForwardRecord forward(const ModelState& state, const Matrix& batch);

/// Parameter gradients of a scalar loss whose gradients w.r.t. the logits and the
/// unit-norm projections are given. The normalization Jacobian is applied here.
Parameters backward(const ModelState& state, const ForwardRecord& record,
                    const Matrix& grad_logits, const Matrix& grad_projections);

/// Heavy-ball momentum: v <- momentum * v + g; theta <- theta - lr * v.
/// Throws NumericError naming the tensor if a gradient is not finite; the state is
/// left untouched in that case.
void sgd_step(ModelState& state, const Parameters& grads, const OptimConfig& optim);

/// Zeroes the optimizer velocity (fresh optimizer on the same weights).
void reset_velocity(ModelState& state);

/// Rounds every parameter to the nearest float so the state survives a float32
/// checkpoint bit-exactly.
void round_to_float32(Parameters& params);

}  // namespace plbench
