#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "plbench/error.hpp"
#include "plbench/harness.hpp"
#include "plbench/numerics.hpp"
#include "support.hpp"

using namespace plbench;
using namespace plbench::testing;

namespace {

bool same_params(const Parameters& a, const Parameters& b) {
  std::vector<const Matrix*> lhs;
  std::vector<const Matrix*> rhs;
  for_each_tensor(a, [&](std::string_view, const Matrix& t) { lhs.push_back(&t); });
  for_each_tensor(b, [&](std::string_view, const Matrix& t) { rhs.push_back(&t); });
  for (std::size_t k = 0; k < lhs.size(); ++k) {
    if (!(*lhs[k] == *rhs[k])) return false;
  }
  return true;
}

LabeledDataset random_stream(std::size_t n, const ModelState& model, RandomSource& rng) {
  LabeledDataset d;
  d.features = random_matrix(n, model.config.input_dim, rng, 1.5);
  for (std::size_t i = 0; i < n; ++i) {
    const auto pick = rng.uniform_index(model.config.num_known_classes + 1);
    d.labels.push_back(pick == model.config.num_known_classes ? kUnknown : static_cast<Label>(pick));
    d.classes.push_back(static_cast<int>(pick));
  }
  return d;
}

// The adaptation loop written out step by step from the primitives, without the
// pseudo-label simulator, the metrics accumulator or sgd_step.
StreamMetrics scripted_stream(ModelState& model, const LabeledDataset& target, const RunConfig& cfg) {
  const std::size_t K = model.config.num_known_classes;
  PrototypeBank bank(K, model.config.projection_dim, cfg.loss.unknown_prototype);
  for_each_tensor(model.velocity, [](std::string_view, Matrix& t) { t = Matrix(t.rows(), t.cols()); });

  std::vector<std::size_t> total(K + 1, 0), hit(K + 1, 0);
  std::vector<BatchStats> batches;
  auto record = [&](Label truth, const Matrix& probs, std::size_t row) {
    const auto p = probs.row(row);
    const Label pred = normalized_entropy(p) >= cfg.rejection_threshold ? kUnknown
                                                                         : static_cast<Label>(argmax(p));
    const std::size_t slot = truth == kUnknown ? K : static_cast<std::size_t>(truth);
    ++total[slot];
    hit[slot] += pred == truth;
  };

  for (std::size_t start = 0; start < target.size(); start += cfg.batch_size) {
    const std::size_t n = std::min(cfg.batch_size, target.size() - start);
    const Matrix x = target.features.slice_rows(start, n);
    const ForwardRecord rec = forward(model, x);

    std::vector<std::pair<double, std::size_t>> ranked;
    for (std::size_t i = 0; i < n; ++i) {
      const double e = normalized_entropy(rec.probs.row(i));
      ranked.emplace_back(std::min(e, 1.0 - e), i);
    }
    std::sort(ranked.begin(), ranked.end());
    const auto k = static_cast<std::size_t>(std::floor(cfg.pseudo.quantity / 100.0 * n + 0.5));
    const auto m = static_cast<std::size_t>(std::floor(cfg.pseudo.quality / 100.0 * k + 0.5));

    std::vector<PseudoLabelAssignment> assign(n);
    BatchStats stats;
    stats.size = n;
    for (std::size_t i = 0; i < n; ++i) assign[i].sample_index = i;
    for (std::size_t r = 0; r < k; ++r) {
      const std::size_t i = ranked[r].second;
      const Label truth = target.labels[start + i];
      assign[i].selected = true;
      assign[i].intended_correct = r < m;
      if (r < m) {
        assign[i].label = truth;
      } else {
        const auto p = rec.probs.row(i);
        if (truth == kUnknown) {
          assign[i].label = static_cast<Label>(argmax(p));
        } else {
          std::size_t best = truth == 0 ? 1 : 0;
          for (std::size_t c = 0; c < K; ++c) {
            if (c != static_cast<std::size_t>(truth) && p[c] > p[best]) best = c;
          }
          assign[i].label = p[best] < cfg.pseudo.alpha * normalized_entropy(p) ? kUnknown
                                                                              : static_cast<Label>(best);
        }
      }
      ++stats.selected;
      stats.correct += assign[i].label == truth;
      stats.unknown_labeled += assign[i].label == kUnknown;
    }

    const auto obj = adaptation_objective(rec.probs, rec.projections, assign, bank, cfg.loss);
    if (obj.contributing > 0) {
      const Parameters g = backward(model, rec, obj.grad_logits, obj.grad_projections);
      std::vector<Matrix*> theta, vel;
      std::vector<const Matrix*> grad;
      for_each_tensor(model.params, [&](std::string_view, Matrix& t) { theta.push_back(&t); });
      for_each_tensor(model.velocity, [&](std::string_view, Matrix& t) { vel.push_back(&t); });
      for_each_tensor(g, [&](std::string_view, const Matrix& t) { grad.push_back(&t); });
      for (std::size_t t = 0; t < theta.size(); ++t) {
        for (std::size_t e = 0; e < theta[t]->size(); ++e) {
          double& v = vel[t]->values()[e];
          v = cfg.optim.momentum * v + grad[t]->values()[e];
          theta[t]->values()[e] -= cfg.optim.learning_rate * v;
        }
      }
    }
    if (cfg.loss.kind == LossKind::contrastive) {
      update_prototypes(bank, rec.projections, assign, cfg.loss.prototype_momentum);
    }

    if (cfg.eval_timing == EvalTiming::post_update) {
      const ForwardRecord after = forward(model, x);
      for (std::size_t i = 0; i < n; ++i) record(target.labels[start + i], after.probs, i);
    } else {
      for (std::size_t i = 0; i < n; ++i) record(target.labels[start + i], rec.probs, i);
    }
    batches.push_back(stats);
  }

  StreamMetrics out;
  std::size_t kh = 0;
  for (std::size_t c = 0; c < K; ++c) {
    out.known_samples += total[c];
    kh += hit[c];
  }
  out.unknown_samples = total[K];
  out.samples = out.known_samples + out.unknown_samples;
  auto rate = [](std::size_t a, std::size_t b) { return b == 0 ? 0.0 : double(a) / double(b); };
  out.accuracy = rate(kh + hit[K], out.samples);
  out.acc_known = rate(kh, out.known_samples);
  out.acc_unknown = rate(hit[K], out.unknown_samples);
  out.h_score = out.acc_known + out.acc_unknown > 0
                    ? 2 * out.acc_known * out.acc_unknown / (out.acc_known + out.acc_unknown)
                    : 0.0;
  for (std::size_t c = 0; c <= K; ++c) out.per_class.push_back({total[c], hit[c]});
  out.batches = batches;
  return out;
}

}  // namespace

TEST_CASE("predict examples") {
  CHECK(predict(std::vector<double>(4, 0.25), 0.5) == kUnknown);
  CHECK(predict(std::vector<double>{0, 0, 1, 0}, 0.5) == 2);
  CHECK(predict(std::vector<double>{0.6, 0.3, 0.1}, 0.5) == kUnknown);
  CHECK(predict(std::vector<double>{0.6, 0.3, 0.1}, 0.9) == 0);
}

TEST_CASE("h_score examples") {
  CHECK(h_score(0.5, 0.5) == 0.5);
  CHECK(h_score(0.9, 0.0) == 0.0);
  CHECK(h_score(0.0, 0.0) == 0.0);
  CHECK(std::abs(h_score(0.8, 0.6) - 0.96 / 1.4) < 1e-12);
  CHECK(std::abs(h_score(0.8, 0.6) - 0.6857) < 1e-4);
}

TEST_CASE("h_score is bounded by twice the smaller accuracy") {
  RandomSource rng(1);
  for (int t = 0; t < 1000; ++t) {
    const double a = rng.uniform();
    const double b = rng.uniform();
    const double h = h_score(a, b);
    CHECK(h >= 0.0);
    CHECK(h <= 2.0 * std::min(a, b) + 1e-15);
    CHECK(h <= std::max(a, b) + 1e-15);
  }
}

TEST_CASE("metrics count UNKNOWN predictions against known samples") {
  MetricsAccumulator acc(2);
  acc.add(0, 0);
  acc.add(0, kUnknown);
  acc.add(1, 0);
  acc.add(kUnknown, kUnknown);
  acc.add(kUnknown, 1);
  const auto m = acc.finish();
  CHECK(m.samples == 5);
  CHECK(m.known_samples == 3);
  CHECK(m.accuracy == doctest::Approx(2.0 / 5.0));
  CHECK(m.acc_known == doctest::Approx(1.0 / 3.0));
  CHECK(m.acc_unknown == 0.5);
  CHECK(m.per_class[0] == ClassTally{2, 1});
  CHECK(m.per_class[2] == ClassTally{2, 1});
  CHECK(m.h_score == doctest::Approx(h_score(1.0 / 3.0, 0.5)));
}

TEST_CASE("quantity zero leaves the model untouched") {
  RandomSource rng(2);
  for (auto kind : {LossKind::contrastive, LossKind::cross_entropy}) {
    ModelState model = random_small_model(rng);
    const ModelState before = model;
    const auto stream = random_stream(37, model, rng);
    RunConfig cfg;
    cfg.batch_size = 8;
    cfg.loss.kind = kind;
    cfg.pseudo.quantity = 0.0;
    const auto adapted = run_stream(model, stream, cfg);
    CHECK(same_params(model.params, before.params));
    CHECK(adapted == evaluate_source_only(before, stream, cfg));
  }
}

TEST_CASE("run_stream is deterministic") {
  RandomSource rng(3);
  const ModelState start = random_small_model(rng);
  const auto stream = random_stream(50, start, rng);
  RunConfig cfg;
  cfg.batch_size = 16;
  cfg.pseudo.quantity = 70;
  cfg.pseudo.quality = 60;
  cfg.optim.learning_rate = 0.05;
  ModelState a = start;
  ModelState b = start;
  CHECK(run_stream(a, stream, cfg) == run_stream(b, stream, cfg));
  CHECK(same_params(a.params, b.params));
}

TEST_CASE("tiny stream matches the scripted loop") {
  RandomSource rng(4);
  for (auto kind : {LossKind::contrastive, LossKind::cross_entropy}) {
    for (auto timing : {EvalTiming::pre_update, EvalTiming::post_update}) {
      const ModelState start = random_small_model(rng, 4);
      const auto stream = random_stream(9, start, rng);  // batches of 5 and 4
      RunConfig cfg;
      cfg.batch_size = 5;
      cfg.eval_timing = timing;
      cfg.loss.kind = kind;
      cfg.pseudo.quantity = 60;
      cfg.pseudo.quality = 50;
      cfg.optim.learning_rate = 0.2;
      cfg.rejection_threshold = 0.9;

      ModelState lib = start;
      ModelState ref = start;
      const auto got = run_stream(lib, stream, cfg);
      const auto want = scripted_stream(ref, stream, cfg);
      CHECK(got == want);
      CHECK(same_params(lib.params, ref.params));
      CHECK_FALSE(same_params(lib.params, start.params));
      REQUIRE(got.batches.size() == 2);
      CHECK(got.batches[0].selected == 3);
      CHECK(got.batches[1].selected == 2);
    }
  }
}

TEST_CASE("post-update predictions come from the adapted model") {
  RandomSource rng(5);
  const ModelState start = random_small_model(rng);
  const auto stream = random_stream(64, start, rng);
  RunConfig cfg;
  cfg.batch_size = 64;
  cfg.loss.kind = LossKind::cross_entropy;
  cfg.optim.learning_rate = 5.0;
  cfg.rejection_threshold = 1.0;

  ModelState a = start;
  const auto pre = run_stream(a, stream, cfg);
  cfg.eval_timing = EvalTiming::post_update;
  ModelState b = start;
  const auto post = run_stream(b, stream, cfg);
  const auto frozen = evaluate_source_only(start, stream, cfg);
  CHECK(pre.per_class == frozen.per_class);
  CHECK(pre.accuracy == frozen.accuracy);
  CHECK(post.accuracy != pre.accuracy);

  // Post-update predictions equal a fresh pass of the adapted model.
  MetricsAccumulator acc(start.config.num_known_classes);
  const ForwardRecord rec = forward(b, stream.features);
  for (std::size_t i = 0; i < stream.size(); ++i) {
    acc.add(stream.labels[i], predict(rec.probs.row(i), cfg.rejection_threshold));
  }
  CHECK(acc.finish().accuracy == post.accuracy);
}

TEST_CASE("rates stay within [0, 1] and batch counts add up") {
  RandomSource rng(6);
  ModelState model = random_small_model(rng);
  const auto stream = random_stream(100, model, rng);
  RunConfig cfg;
  cfg.batch_size = 30;
  cfg.pseudo.quantity = 50;
  cfg.pseudo.quality = 30;
  const auto m = run_stream(model, stream, cfg);
  for (double r : {m.accuracy, m.acc_known, m.acc_unknown, m.h_score}) {
    CHECK(r >= 0.0);
    CHECK(r <= 1.0);
  }
  REQUIRE(m.batches.size() == 4);
  std::size_t seen = 0;
  for (const auto& b : m.batches) {
    seen += b.size;
    CHECK(b.selected == percent_count(50, b.size));
    CHECK(b.correct == percent_count(30, b.selected));
  }
  CHECK(seen == 100);
}

TEST_CASE("dimension mismatch fails before any update") {
  RandomSource rng(7);
  ModelState model = random_small_model(rng);
  const ModelState before = model;
  LabeledDataset bad;
  bad.features = Matrix(4, model.config.input_dim + 1);
  bad.labels = {0, 1, 2, 3};
  CHECK_THROWS_AS(run_stream(model, bad, RunConfig{}), ShapeError);
  CHECK(same_params(model.params, before.params));
  LabeledDataset empty;
  empty.features = Matrix(0, model.config.input_dim);
  CHECK_THROWS_AS(run_stream(model, empty, RunConfig{}), InvalidInput);
}

TEST_CASE("pseudo-label dump covers the whole stream") {
  RandomSource rng(8);
  ModelState model = random_small_model(rng);
  const auto stream = random_stream(20, model, rng);
  std::ostringstream dump;
  RunConfig cfg;
  cfg.batch_size = 8;
  cfg.pseudo_label_dump = &dump;
  run_stream(model, stream, cfg);
  std::istringstream in(dump.str());
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == 21);
}

TEST_CASE("pretraining fits the source data") {
  RandomSource rng(9);
  ModelConfig mc;
  mc.input_dim = 4;
  mc.hidden_dim = 16;
  mc.feature_dim = 8;
  mc.num_known_classes = 2;
  mc.projection_dim = 4;
  ModelState model = init_model(mc, rng);
  LabeledDataset src;
  src.features = random_matrix(200, 4, rng);
  for (std::size_t i = 0; i < 200; ++i) {
    src.labels.push_back(src.features(i, 0) > 0 ? 1 : 0);
  }
  PretrainConfig pc;
  pc.epochs = 30;
  pc.optim.learning_rate = 0.05;
  pretrain_source(model, src, pc, rng);
  RunConfig cfg;
  cfg.rejection_threshold = 1.0;
  CHECK(evaluate_source_only(model, src, cfg).accuracy > 0.9);
  for (double v : model.params.w1.values()) CHECK(static_cast<double>(static_cast<float>(v)) == v);

  src.labels[3] = kUnknown;
  CHECK_THROWS_AS(pretrain_source(model, src, pc, rng), InvalidInput);
}
