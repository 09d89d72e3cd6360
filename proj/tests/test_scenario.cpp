#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "plbench/error.hpp"
#include "plbench/experiment.hpp"
#include "plbench/harness.hpp"
#include "plbench/scenario.hpp"

using namespace plbench;

namespace {

std::set<int> as_set(const std::vector<int>& v) { return {v.begin(), v.end()}; }

void check_partition(const ScenarioSpec& s) {
  std::set<int> all;
  for (const auto* part : {&s.shared, &s.source_private, &s.target_private}) {
    for (int c : *part) CHECK(all.insert(c).second);
  }
  CHECK(all.size() == s.num_classes);
}

}  // namespace

TEST_CASE("class splits per scenario") {
  RandomSource rng(1);
  const auto pda = make_splits(ShiftKind::PDA, 12, rng);
  CHECK(pda.shared.size() == 6);
  CHECK(pda.source_private.size() == 6);
  CHECK(pda.target_private.empty());
  const auto oda = make_splits(ShiftKind::ODA, 12, rng);
  CHECK(oda.shared.size() == 6);
  CHECK(oda.source_private.empty());
  CHECK(oda.target_private.size() == 6);
  const auto opda = make_splits(ShiftKind::OPDA, 12, rng);
  CHECK(opda.shared.size() == 6);
  CHECK(opda.source_private.size() == 3);
  CHECK(opda.target_private.size() == 3);
  for (const auto* s : {&pda, &oda, &opda}) check_partition(*s);
}

TEST_CASE("membership depends on the seed") {
  RandomSource a(1);
  RandomSource b(2);
  RandomSource a2(1);
  const auto sa = make_splits(ShiftKind::OPDA, 12, a);
  const auto sb = make_splits(ShiftKind::OPDA, 12, b);
  const auto sa2 = make_splits(ShiftKind::OPDA, 12, a2);
  CHECK(sa.shared == sa2.shared);
  CHECK(sa.target_private == sa2.target_private);
  CHECK((sa.shared != sb.shared || sa.target_private != sb.target_private));
}

TEST_CASE("other class counts split proportionally") {
  RandomSource rng(3);
  const auto s = make_splits(ShiftKind::OPDA, 8, rng);
  CHECK(s.shared.size() == 4);
  CHECK(s.source_private.size() == 2);
  CHECK(s.target_private.size() == 2);
  CHECK_THROWS_AS(make_splits(ShiftKind::PDA, 3, rng), InvalidInput);
}

TEST_CASE("known labels follow shared then source-private order") {
  ScenarioSpec s;
  s.kind = ShiftKind::OPDA;
  s.num_classes = 6;
  s.shared = {1, 4};
  s.source_private = {0};
  s.target_private = {2, 5};
  CHECK(s.known_classes() == std::vector<int>{1, 4, 0});
  CHECK(s.label_of(4) == 1);
  CHECK(s.label_of(0) == 2);
  CHECK(s.label_of(5) == kUnknown);
}

TEST_CASE("domains respect the class split") {
  RandomSource rng(4);
  for (auto kind : {ShiftKind::PDA, ShiftKind::ODA, ShiftKind::OPDA}) {
    const auto spec = make_splits(kind, 12, rng);
    const auto data = generate_domains(spec, DomainShiftConfig{}, DomainSizes{20, 30}, rng);
    const auto tp = as_set(spec.target_private);
    const auto sp = as_set(spec.source_private);
    CHECK(data.source.size() == 20 * spec.num_known());
    CHECK(data.target.size() == 30 * (spec.shared.size() + spec.target_private.size()));
    for (std::size_t i = 0; i < data.source.size(); ++i) {
      const int c = data.source.classes[i];
      CHECK(tp.count(c) == 0);
      CHECK(data.source.labels[i] == spec.label_of(c));
      CHECK(data.source.labels[i] != kUnknown);
    }
    for (std::size_t i = 0; i < data.target.size(); ++i) {
      const int c = data.target.classes[i];
      CHECK(sp.count(c) == 0);
      CHECK((data.target.labels[i] == kUnknown) == (tp.count(c) == 1));
    }
  }
}

TEST_CASE("null shift gives matching class-conditional distributions") {
  DomainShiftConfig shift;
  shift.rotation_strength = 0.0;
  shift.mean_offset = 0.0;
  shift.nuisance_std = 0.0;
  shift.noise_scale_ratio = 1.0;
  RandomSource rng(5);
  const auto spec = make_splits(ShiftKind::PDA, 12, rng);
  const auto data = generate_domains(spec, shift, DomainSizes{2000, 2000}, rng);

  const std::size_t d = shift.input_dim;
  for (int c : spec.shared) {
    std::vector<double> ms(d, 0.0), mt(d, 0.0), vs(d, 0.0), vt(d, 0.0);
    std::size_t ns = 0, nt = 0;
    auto accumulate = [&](const LabeledDataset& ds, std::vector<double>& m, std::vector<double>& v,
                          std::size_t& n) {
      for (std::size_t i = 0; i < ds.size(); ++i) {
        if (ds.classes[i] != c) continue;
        ++n;
        for (std::size_t j = 0; j < d; ++j) {
          m[j] += ds.features(i, j);
          v[j] += ds.features(i, j) * ds.features(i, j);
        }
      }
    };
    accumulate(data.source, ms, vs, ns);
    accumulate(data.target, mt, vt, nt);
    for (std::size_t j = 0; j < d; ++j) {
      const double a = ms[j] / ns;
      const double b = mt[j] / nt;
      // Difference of two means of 2000 unit-variance draws: std ~0.032.
      CHECK(std::abs(a - b) < 0.16);
      CHECK(std::abs((vs[j] / ns - a * a) - (vt[j] / nt - b * b)) < 0.2);
    }
  }
}

TEST_CASE("generation is deterministic") {
  auto draw = [] {
    RandomSource rng(6);
    const auto spec = make_splits(ShiftKind::OPDA, 12, rng);
    return generate_domains(spec, DomainShiftConfig{}, DomainSizes{10, 10}, rng);
  };
  const auto a = draw();
  const auto b = draw();
  CHECK(a.source.features == b.source.features);
  CHECK(a.target.features == b.target.features);
  CHECK(a.source.labels == b.source.labels);
  CHECK(a.target.classes == b.target.classes);
}

TEST_CASE("bad generation settings are rejected") {
  RandomSource rng(7);
  const auto spec = make_splits(ShiftKind::OPDA, 12, rng);
  DomainShiftConfig bad;
  bad.within_class_std = 0.0;
  CHECK_THROWS_AS(generate_domains(spec, bad, DomainSizes{}, rng), InvalidInput);
  CHECK_THROWS_AS(generate_domains(spec, DomainShiftConfig{}, DomainSizes{0, 5}, rng), InvalidInput);
}

TEST_CASE("feature file round trip is exact") {
  LabeledDataset data;
  data.features = Matrix(2, 3, std::vector<double>{0.1, -2.5e-7, 3.0 / 7.0, 1e300, -0.0, 42.0});
  data.labels = {1, kUnknown};
  data.classes = {1, -1};
  std::ostringstream out;
  write_feature_file(out, data);
  CHECK(out.str().substr(0, 4) == "2 3\n");
  std::istringstream in(out.str());
  const auto back = read_feature_file(in, 4);
  CHECK(back.features == data.features);
  CHECK(back.labels == data.labels);
}

TEST_CASE("labels at or past the known count map to UNKNOWN") {
  std::istringstream in("3 1\n12 0.5\n11 0.25\n-1 1\n");
  const auto data = read_feature_file(in, 12);
  CHECK(data.labels[0] == kUnknown);
  CHECK(data.labels[1] == 11);
  CHECK(data.labels[2] == kUnknown);
}

TEST_CASE("malformed feature files name the line") {
  auto line_of = [](const std::string& text) -> std::size_t {
    std::istringstream in(text);
    try {
      read_feature_file(in, 4);
    } catch (const ParseError& e) {
      return e.line();
    }
    return 0;
  };
  CHECK(line_of("") == 1);
  CHECK(line_of("2\n") == 1);
  CHECK(line_of("2 3\n0 1 2 3\n1 1 2\n") == 3);
  CHECK(line_of("2 3\n0 1 2 3 4\n") == 2);
  CHECK(line_of("1 2\nx 1 2\n") == 2);
  CHECK(line_of("2 2\n0 1 2\n") == 3);
  CHECK(line_of("1 2\n0 1 2\n0 1 2\n") == 3);
  CHECK(line_of("1 2\n-3 1 2\n") == 2);
}

TEST_CASE("feature dimension must match the model") {
  std::istringstream in("1 3\n0 1 2 3\n");
  CHECK_THROWS_AS(read_feature_file(in, 4, 5), ShapeError);
}

TEST_CASE("default shift leaves a weak but useful source model") {
  // Known-class accuracy of the source-only model on the target stream, averaged
  // over three seeds, stays within [0.3, 0.8] for every scenario.
  ExperimentConfig cfg;
  for (auto kind : {ShiftKind::PDA, ShiftKind::ODA, ShiftKind::OPDA}) {
    double sum = 0.0;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const auto inst = build_scenario(kind, seed, cfg);
      const auto model = pretrain_model(inst, cfg);
      sum += evaluate_source_only(model, inst.data.target, cfg.run).acc_known;
    }
    const double mean = sum / 3.0;
    INFO(to_string(kind), " known accuracy ", mean);
    CHECK(mean >= 0.3);
    CHECK(mean <= 0.8);
  }
}
