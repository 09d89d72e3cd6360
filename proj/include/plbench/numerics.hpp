#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "plbench/matrix.hpp"

namespace plbench {

/// Probabilities are clamped to this floor before taking logarithms.
inline constexpr double kProbFloor = 1e-12;

/// Class-probability vector over the source label space.
/// Invariant: length >= 2, entries in [0, 1], sum within 1e-6 of one.
class ProbVector {
 public:
  /// Validates the invariant; throws InvalidInput otherwise.
  explicit ProbVector(std::vector<double> probs);

  std::span<const double> values() const noexcept { return probs_; }
  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::size_t i) const noexcept { return probs_[i]; }

 private:
  std::vector<double> probs_;
};

/// Max-subtracted softmax. Throws InvalidInput on non-finite input or fewer than 2 logits.
ProbVector softmax(std::span<const double> logits);

/// Row-wise softmax of a logits matrix.
Matrix softmax_rows(const Matrix& logits);

/// Shannon entropy divided by log(number of classes), natural log, entries clamped
/// to kProbFloor. Result lies in [0, 1 + 1e-9]. Throws InvalidInput for length < 2.
double normalized_entropy(std::span<const double> probs);
inline double normalized_entropy(const ProbVector& p) { return normalized_entropy(p.values()); }

/// Index of the largest entry, lowest index on ties.
std::size_t argmax(std::span<const double> values);

}  // namespace plbench
