#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "plbench/labels.hpp"
#include "plbench/matrix.hpp"
#include "plbench/numerics.hpp"

// Pseudo-label simulation with exactly controlled quantity and quality.
//
// Per batch, from the predictions of a forward pass made before the batch's update:
//   1. entropy I_i = normalized_entropy(p_i), distance d_i = min(I_i, 1 - I_i)
//   2. the k = round(q% * B) samples with the smallest d_i are selected
//   3. the m = round(a% * k) selected samples with the smallest d_i get their true
//      pseudo-label, the other k - m get a deliberately wrong one
//      (assign_incorrect_label).
// Ties on d_i go to the lower sample index. Rounding is half-up.

namespace plbench {

struct PseudoLabelConfig {
  double quantity = 100.0;  ///< q, percent of the batch used for adaptation
  double quality = 100.0;   ///< a, percent of the selected samples labeled correctly
  double alpha = 1.0;       ///< scale of the adaptive UNKNOWN threshold tau = alpha * I(p)

  void validate() const;
};

struct PseudoLabelAssignment {
  std::size_t sample_index = 0;
  bool selected = false;
  Label label = kUnknown;  ///< meaningful only when selected
  bool intended_correct = false;
};

/// min(I, 1 - I) with I clamped to [0, 1].
double confidence_distance(double entropy);

/// round(percent / 100 * n), halves rounded up.
std::size_t percent_count(double percent, std::size_t n);

/// Indices of the round(q% * B) smallest distances, ordered by (distance, index).
std::vector<std::size_t> select_for_adaptation(std::span<const double> distances, double quantity);

struct QualitySplit {
  std::vector<std::size_t> correct;
  std::vector<std::size_t> incorrect;
};

/// Splits `selected` so the round(a% * k) smallest-distance members are correct.
QualitySplit split_by_quality(std::span<const std::size_t> selected,
                              std::span<const double> distances, double quality);

/// Wrong pseudo-label for a sample. True UNKNOWN -> most probable known class.
/// True class c -> runner-up c' (argmax excluding c), or UNKNOWN when
/// p[c'] < alpha * I(p). Throws InvalidInput when a known label is out of range.
Label assign_incorrect_label(std::span<const double> probs, Label true_label, double alpha);
inline Label assign_incorrect_label(const ProbVector& p, Label true_label, double alpha) {
  return assign_incorrect_label(p.values(), true_label, alpha);
}

/// One assignment per batch row, in row order. `probs` rows are the batch's
/// predictions before any update on it.
std::vector<PseudoLabelAssignment> simulate_pseudo_labels(const Matrix& probs,
                                                          std::span<const Label> truth,
                                                          const PseudoLabelConfig& cfg);

/// CSV debug dump: index,entropy,distance,selected,label,correct
void write_pseudo_label_dump(std::ostream& out, const Matrix& probs,
                             std::span<const PseudoLabelAssignment> assignments,
                             bool with_header = true);

}  // namespace plbench
