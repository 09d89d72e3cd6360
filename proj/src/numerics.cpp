#include "plbench/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "plbench/error.hpp"

namespace plbench {

ProbVector::ProbVector(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.size() < 2) throw InvalidInput("probability vector needs at least 2 entries");
  double total = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw InvalidInput("probability entry " + std::to_string(p) + " outside [0, 1]");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-6) {
    throw InvalidInput("probabilities sum to " + std::to_string(total));
  }
}

namespace {

void softmax_into(std::span<const double> logits, std::span<double> out) {
  double peak = logits[0];
  for (double v : logits) peak = std::max(peak, v);
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - peak);
    total += out[i];
  }
  for (double& v : out) v /= total;
}

void check_logits(std::span<const double> logits) {
  if (logits.size() < 2) throw InvalidInput("softmax needs at least 2 logits");
  for (double v : logits) {
    if (!std::isfinite(v)) throw InvalidInput("softmax: non-finite logit");
  }
}

}  // namespace

ProbVector softmax(std::span<const double> logits) {
  check_logits(logits);
  std::vector<double> out(logits.size());
  softmax_into(logits, out);
  return ProbVector(std::move(out));
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    check_logits(logits.row(r));
    softmax_into(logits.row(r), out.row(r));
  }
  return out;
}

double normalized_entropy(std::span<const double> probs) {
  if (probs.size() < 2) throw InvalidInput("normalized entropy needs at least 2 classes");
  double h = 0.0;
  for (double p : probs) {
    const double c = std::max(p, kProbFloor);
    h -= c * std::log(c);
  }
  return h / std::log(static_cast<double>(probs.size()));
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

}  // namespace plbench
