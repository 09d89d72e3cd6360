#include "plbench/pseudo_label.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <string>

#include "plbench/error.hpp"

namespace plbench {

void PseudoLabelConfig::validate() const {
  if (!(quantity >= 0.0 && quantity <= 100.0)) throw InvalidInput("quantity must lie in [0, 100]");
  if (!(quality >= 0.0 && quality <= 100.0)) throw InvalidInput("quality must lie in [0, 100]");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw InvalidInput("alpha must be >= 0");
}

double confidence_distance(double entropy) {
  const double i = std::clamp(entropy, 0.0, 1.0);
  return std::min(i, 1.0 - i);
}

std::size_t percent_count(double percent, std::size_t n) {
  // For integral percent and n, percent * n / 100 is exact at .5 boundaries.
  return static_cast<std::size_t>(std::floor(percent * static_cast<double>(n) / 100.0 + 0.5));
}

namespace {

void sort_by_distance(std::vector<std::size_t>& idx, std::span<const double> distances) {
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (distances[a] != distances[b]) return distances[a] < distances[b];
    return a < b;
  });
}

}  // namespace

std::vector<std::size_t> select_for_adaptation(std::span<const double> distances,
                                               double quantity) {
  for (double d : distances) {
    if (!std::isfinite(d)) throw InvalidInput("select_for_adaptation: non-finite distance");
  }
  std::vector<std::size_t> order(distances.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  sort_by_distance(order, distances);
  order.resize(std::min(order.size(), percent_count(quantity, distances.size())));
  return order;
}

QualitySplit split_by_quality(std::span<const std::size_t> selected,
                              std::span<const double> distances, double quality) {
  std::vector<std::size_t> order(selected.begin(), selected.end());
  for (std::size_t i : order) {
    if (i >= distances.size()) throw InvalidInput("split_by_quality: index outside the batch");
  }
  sort_by_distance(order, distances);
  const std::size_t m = std::min(order.size(), percent_count(quality, order.size()));
  QualitySplit split;
  split.correct.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m));
  split.incorrect.assign(order.begin() + static_cast<std::ptrdiff_t>(m), order.end());
  return split;
}

Label assign_incorrect_label(std::span<const double> probs, Label true_label, double alpha) {
  const auto classes = static_cast<Label>(probs.size());
  if (true_label == kUnknown) return static_cast<Label>(argmax(probs));
  if (true_label < 0 || true_label >= classes) {
    throw InvalidInput("assign_incorrect_label: label " + std::to_string(true_label) +
                       " outside the source label space");
  }
  if (classes < 2) throw InvalidInput("assign_incorrect_label: no other known class exists");

  Label runner_up = true_label == 0 ? 1 : 0;
  for (Label c = 0; c < classes; ++c) {
    if (c != true_label && probs[c] > probs[runner_up]) runner_up = c;
  }
  const double threshold = alpha * normalized_entropy(probs);
  return probs[runner_up] < threshold ? kUnknown : runner_up;
}

std::vector<PseudoLabelAssignment> simulate_pseudo_labels(const Matrix& probs,
                                                          std::span<const Label> truth,
                                                          const PseudoLabelConfig& cfg) {
  cfg.validate();
  const std::size_t n = probs.rows();
  if (truth.size() != n) {
    throw ShapeError("simulate_pseudo_labels: " + std::to_string(truth.size()) +
                     " labels for a batch of " + std::to_string(n));
  }
  std::vector<double> distances(n);
  for (std::size_t i = 0; i < n; ++i) {
    distances[i] = confidence_distance(normalized_entropy(probs.row(i)));
  }

  const auto selected = select_for_adaptation(distances, cfg.quantity);
  const auto split = split_by_quality(selected, distances, cfg.quality);

  std::vector<PseudoLabelAssignment> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i].sample_index = i;
  for (std::size_t i : split.correct) {
    out[i].selected = true;
    out[i].intended_correct = true;
    out[i].label = truth[i];
  }
  for (std::size_t i : split.incorrect) {
    out[i].selected = true;
    out[i].label = assign_incorrect_label(probs.row(i), truth[i], cfg.alpha);
  }
  return out;
}

void write_pseudo_label_dump(std::ostream& out, const Matrix& probs,
                             std::span<const PseudoLabelAssignment> assignments,
                             bool with_header) {
  if (with_header) out << "index,entropy,distance,selected,label,correct\n";
  for (const auto& a : assignments) {
    const double entropy = normalized_entropy(probs.row(a.sample_index));
    out << a.sample_index << ',' << entropy << ',' << confidence_distance(entropy) << ','
        << (a.selected ? 1 : 0) << ',' << (a.selected ? label_to_string(a.label) : "") << ','
        << (a.selected ? (a.intended_correct ? "1" : "0") : "") << '\n';
  }
}

}  // namespace plbench
