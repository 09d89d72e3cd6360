#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "plbench/labels.hpp"
#include "plbench/losses.hpp"
#include "plbench/model.hpp"
#include "plbench/pseudo_label.hpp"
#include "plbench/scenario.hpp"

namespace plbench {

enum class EvalTiming { pre_update, post_update };

std::string_view to_string(EvalTiming timing);
EvalTiming parse_eval_timing(std::string_view text);

struct RunConfig {
  std::size_t batch_size = 64;
  EvalTiming eval_timing = EvalTiming::pre_update;
  double rejection_threshold = 0.5;  ///< normalized-entropy cut for UNKNOWN predictions
  LossConfig loss;
  PseudoLabelConfig pseudo;
  OptimConfig optim;
  bool adapt = true;                  ///< false: predictions only (source-only baseline)
  std::ostream* pseudo_label_dump = nullptr;

  void validate() const;
};

struct BatchStats {
  std::size_t size = 0;
  std::size_t selected = 0;
  std::size_t correct = 0;     ///< selected samples that received their true pseudo-label
  std::size_t unknown_labeled = 0;

  friend bool operator==(const BatchStats&, const BatchStats&) = default;
};

struct ClassTally {
  std::size_t total = 0;
  std::size_t correct = 0;

  double accuracy() const noexcept {
    return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
  }
  friend bool operator==(const ClassTally&, const ClassTally&) = default;
};

struct StreamMetrics {
  std::size_t samples = 0;
  std::size_t known_samples = 0;
  std::size_t unknown_samples = 0;
  double accuracy = 0.0;        ///< all samples; UNKNOWN is correct only for unknown samples
  double acc_known = 0.0;       ///< known samples predicted as their exact class
  double acc_unknown = 0.0;     ///< unknown samples predicted UNKNOWN
  double h_score = 0.0;
  std::vector<ClassTally> per_class;  ///< known classes, then UNKNOWN
  std::vector<BatchStats> batches;

  friend bool operator==(const StreamMetrics&, const StreamMetrics&) = default;
};

/// UNKNOWN when normalized_entropy(p) >= threshold, else argmax (lowest index on ties).
Label predict(std::span<const double> probs, double threshold);

/// 2 a_k a_u / (a_k + a_u); 0 when both are 0.
double h_score(double acc_known, double acc_unknown);

/// Accuracy for PDA, H-score for ODA and OPDA.
double primary_metric(const StreamMetrics& m, ShiftKind kind);

/// Tallies predictions against ground truth. `num_known` sizes per-class accuracy.
class MetricsAccumulator {
 public:
  explicit MetricsAccumulator(std::size_t num_known);
  void add(Label truth, Label predicted);
  void add_batch(const BatchStats& stats) { batches_.push_back(stats); }
  StreamMetrics finish() const;

 private:
  std::size_t num_known_;
  std::vector<std::size_t> hits_;
  std::vector<std::size_t> totals_;
  std::vector<BatchStats> batches_;
};

/// Online adaptation over `target` in row order: each batch is seen exactly once.
/// Per batch: forward without update, predictions (pre_update), pseudo-labels from
/// the same probabilities, loss on the selected samples, SGD step, prototype update
/// (contrastive), and re-forward for post_update predictions. The final partial batch
/// is processed as-is. The model is adapted in place; optimizer velocity starts at zero.
StreamMetrics run_stream(ModelState& model, const LabeledDataset& target, const RunConfig& cfg);

/// run_stream on a copy of `model` with adaptation disabled.
StreamMetrics evaluate_source_only(const ModelState& model, const LabeledDataset& target,
                                   const RunConfig& cfg);

struct PretrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 64;
  OptimConfig optim;
};

/// Supervised cross-entropy on labeled source data, reshuffled every epoch. Ends
/// with velocity reset and parameters rounded to float precision.
void pretrain_source(ModelState& model, const LabeledDataset& source, const PretrainConfig& cfg,
                     RandomSource& rng);

}  // namespace plbench
