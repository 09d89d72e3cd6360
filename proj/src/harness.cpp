#include "plbench/harness.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>
#include <string>

#include "plbench/error.hpp"
#include "plbench/numerics.hpp"

namespace plbench {

std::string_view to_string(EvalTiming timing) {
  return timing == EvalTiming::pre_update ? "pre_update" : "post_update";
}

EvalTiming parse_eval_timing(std::string_view text) {
  if (text == "pre_update" || text == "pre") return EvalTiming::pre_update;
  if (text == "post_update" || text == "post") return EvalTiming::post_update;
  throw InvalidInput("unknown eval timing '" + std::string(text) + "'");
}

void RunConfig::validate() const {
  if (batch_size < 1) throw InvalidInput("batch size must be >= 1");
  if (!(rejection_threshold >= 0.0 && rejection_threshold <= 1.0)) {
    throw InvalidInput("rejection threshold must lie in [0, 1]");
  }
  loss.validate();
  pseudo.validate();
  optim.validate();
}

Label predict(std::span<const double> probs, double threshold) {
  if (normalized_entropy(probs) >= threshold) return kUnknown;
  return static_cast<Label>(argmax(probs));
}

double h_score(double acc_known, double acc_unknown) {
  const double denom = acc_known + acc_unknown;
  return denom > 0.0 ? 2.0 * acc_known * acc_unknown / denom : 0.0;
}

double primary_metric(const StreamMetrics& m, ShiftKind kind) {
  return kind == ShiftKind::PDA ? m.accuracy : m.h_score;
}

MetricsAccumulator::MetricsAccumulator(std::size_t num_known)
    : num_known_(num_known), hits_(num_known + 1, 0), totals_(num_known + 1, 0) {}

void MetricsAccumulator::add(Label truth, Label predicted) {
  const std::size_t slot = truth == kUnknown ? num_known_ : static_cast<std::size_t>(truth);
  ++totals_[slot];
  if (truth == predicted) ++hits_[slot];
}

StreamMetrics MetricsAccumulator::finish() const {
  StreamMetrics m;
  std::size_t known_hits = 0;
  for (std::size_t c = 0; c < num_known_; ++c) {
    m.known_samples += totals_[c];
    known_hits += hits_[c];
  }
  m.unknown_samples = totals_[num_known_];
  m.samples = m.known_samples + m.unknown_samples;
  const std::size_t unknown_hits = hits_[num_known_];

  auto rate = [](std::size_t hits, std::size_t total) {
    return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
  };
  m.accuracy = rate(known_hits + unknown_hits, m.samples);
  m.acc_known = rate(known_hits, m.known_samples);
  m.acc_unknown = rate(unknown_hits, m.unknown_samples);
  m.h_score = h_score(m.acc_known, m.acc_unknown);
  m.per_class.resize(num_known_ + 1);
  for (std::size_t c = 0; c <= num_known_; ++c) m.per_class[c] = {totals_[c], hits_[c]};
  m.batches = batches_;
  return m;
}

namespace {

void check_stream(const ModelState& model, const LabeledDataset& target) {
  if (target.size() == 0) throw InvalidInput("target stream is empty");
  if (target.features.rows() != target.size()) {
    throw ShapeError("target features and labels disagree on the sample count");
  }
  if (target.features.cols() != model.config.input_dim) {
    throw ShapeError("target features have dimension " + std::to_string(target.features.cols()) +
                     ", model expects " + std::to_string(model.config.input_dim));
  }
  for (Label l : target.labels) {
    if (l != kUnknown && (l < 0 || static_cast<std::size_t>(l) >= model.config.num_known_classes)) {
      throw InvalidInput("target label " + std::to_string(l) + " outside the source label space");
    }
  }
}

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = m.row(rows[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

}  // namespace

StreamMetrics run_stream(ModelState& model, const LabeledDataset& target, const RunConfig& cfg) {
  cfg.validate();
  check_stream(model, target);

  const std::size_t num_known = model.config.num_known_classes;
  reset_velocity(model);
  PrototypeBank bank(num_known, model.config.projection_dim, cfg.loss.unknown_prototype);
  MetricsAccumulator tally(num_known);
  const std::span<const Label> labels(target.labels);
  bool dump_header = true;

  for (std::size_t start = 0; start < target.size(); start += cfg.batch_size) {
    const std::size_t n = std::min(cfg.batch_size, target.size() - start);
    const Matrix batch = target.features.slice_rows(start, n);
    const auto truth = labels.subspan(start, n);
    const ForwardRecord rec = forward(model, batch);

    BatchStats stats;
    stats.size = n;
    if (cfg.adapt) {
      const auto assignments = simulate_pseudo_labels(rec.probs, truth, cfg.pseudo);
      if (cfg.pseudo_label_dump != nullptr) {
        write_pseudo_label_dump(*cfg.pseudo_label_dump, rec.probs, assignments, dump_header);
        dump_header = false;
      }
      for (const auto& a : assignments) {
        if (!a.selected) continue;
        ++stats.selected;
        stats.correct += a.label == truth[a.sample_index] ? 1 : 0;
        stats.unknown_labeled += a.label == kUnknown ? 1 : 0;
      }

      const auto objective =
          adaptation_objective(rec.probs, rec.projections, assignments, bank, cfg.loss);
      if (objective.contributing > 0) {
        const Parameters grads =
            backward(model, rec, objective.grad_logits, objective.grad_projections);
        sgd_step(model, grads, cfg.optim);
      }
      if (cfg.loss.kind == LossKind::contrastive) {
        update_prototypes(bank, rec.projections, assignments, cfg.loss.prototype_momentum);
      }
    }

    if (cfg.adapt && cfg.eval_timing == EvalTiming::post_update) {
      const ForwardRecord after = forward(model, batch);
      for (std::size_t i = 0; i < n; ++i) {
        tally.add(truth[i], predict(after.probs.row(i), cfg.rejection_threshold));
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        tally.add(truth[i], predict(rec.probs.row(i), cfg.rejection_threshold));
      }
    }
    tally.add_batch(stats);
  }
  return tally.finish();
}

StreamMetrics evaluate_source_only(const ModelState& model, const LabeledDataset& target,
                                   const RunConfig& cfg) {
  ModelState copy = model;
  RunConfig frozen = cfg;
  frozen.adapt = false;
  frozen.pseudo_label_dump = nullptr;
  return run_stream(copy, target, frozen);
}

void pretrain_source(ModelState& model, const LabeledDataset& source, const PretrainConfig& cfg,
                     RandomSource& rng) {
  if (cfg.batch_size < 1) throw InvalidInput("pretrain batch size must be >= 1");
  check_stream(model, source);
  for (Label l : source.labels) {
    if (l == kUnknown) throw InvalidInput("source data cannot contain UNKNOWN labels");
  }

  reset_velocity(model);
  std::vector<std::size_t> order(source.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t n = std::min(cfg.batch_size, order.size() - start);
      const auto rows = std::span<const std::size_t>(order).subspan(start, n);
      const ForwardRecord rec = forward(model, gather_rows(source.features, rows));

      std::vector<PseudoLabelAssignment> targets(n);
      for (std::size_t i = 0; i < n; ++i) {
        targets[i] = {i, true, source.labels[rows[i]], true};
      }
      const LossResult ce = cross_entropy_loss(rec.probs, targets);
      const Matrix no_projection_grad(n, model.config.projection_dim);
      sgd_step(model, backward(model, rec, ce.grad, no_projection_grad), cfg.optim);
    }
  }
  reset_velocity(model);
  round_to_float32(model.params);
}

}  // namespace plbench
