#include "plbench/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <string>

#include <omp.h>

#include "plbench/checkpoint.hpp"
#include "plbench/error.hpp"

namespace plbench {

namespace {

// Independent random streams derived from a run seed.
enum Stream : std::uint64_t {
  kSplitStream = 100,
  kDomainStream = 200,
  kInitStream = 300,
  kPretrainStream = 400,
};

std::uint64_t kind_index(ShiftKind kind) { return static_cast<std::uint64_t>(kind); }

/// Runs body(i) for i in [0, n) on `threads` threads and rethrows the first failure.
template <class Body>
void parallel_for(std::size_t n, int threads, Body&& body) {
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic, 1) num_threads(std::max(threads, 1))
  for (std::int64_t i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

void ExperimentConfig::validate() const {
  shift.validate();
  pretrain.optim.validate();
  run.validate();
  if (num_classes < 4) throw InvalidInput("num_classes must be >= 4");
}

ScenarioInstance build_scenario(ShiftKind kind, std::uint64_t seed, const ExperimentConfig& cfg) {
  cfg.validate();
  ScenarioInstance inst;
  inst.kind = kind;
  inst.seed = seed;
  RandomSource split_rng(derive_seed(seed, kSplitStream + kind_index(kind)));
  inst.spec = make_splits(kind, cfg.num_classes, split_rng);
  RandomSource domain_rng(derive_seed(seed, kDomainStream + kind_index(kind)));
  inst.data = generate_domains(inst.spec, cfg.shift, cfg.sizes, domain_rng);
  return inst;
}

ModelConfig model_config_for(const ScenarioInstance& inst, const ExperimentConfig& cfg) {
  ModelConfig mc = cfg.model;
  mc.input_dim = cfg.shift.input_dim;
  mc.num_known_classes = inst.spec.num_known();
  return mc;
}

ModelState pretrain_model(const ScenarioInstance& inst, const ExperimentConfig& cfg) {
  RandomSource init_rng(derive_seed(inst.seed, kInitStream + kind_index(inst.kind)));
  ModelState model = init_model(model_config_for(inst, cfg), init_rng);
  RandomSource shuffle_rng(derive_seed(inst.seed, kPretrainStream + kind_index(inst.kind)));
  pretrain_source(model, inst.data.source, cfg.pretrain, shuffle_rng);
  return model;
}

RunRecord run_cell(const ScenarioInstance& inst, const ModelState& pretrained, LossKind loss,
                   double quality, double quantity, const ExperimentConfig& cfg) {
  RunConfig rc = cfg.run;
  rc.loss.kind = loss;
  rc.pseudo.quality = quality;
  rc.pseudo.quantity = quantity;
  ModelState model = pretrained;
  RunRecord rec;
  rec.scenario = inst.kind;
  rec.loss = loss;
  rec.quality = quality;
  rec.quantity = quantity;
  rec.seed = inst.seed;
  rec.metrics = run_stream(model, inst.data.target, rc);
  return rec;
}

void GridSpec::validate() const {
  if (qualities.empty() || quantities.empty() || scenarios.empty() || losses.empty()) {
    throw InvalidInput("grid axes must be nonempty");
  }
  for (const auto* axis : {&qualities, &quantities}) {
    for (double v : *axis) {
      if (!(v >= 0.0 && v <= 100.0)) throw InvalidInput("grid percentages must lie in [0, 100]");
    }
  }
  if (repeats < 1) throw InvalidInput("repeats must be >= 1");
}

std::vector<std::uint64_t> GridSpec::seeds() const {
  std::vector<std::uint64_t> out(repeats);
  for (std::size_t r = 0; r < repeats; ++r) out[r] = base_seed + r;
  return out;
}

const BaselineResult& GridResults::baseline(ShiftKind kind) const {
  for (const auto& b : baselines) {
    if (b.scenario == kind) return b;
  }
  throw InvalidInput("no baseline for scenario " + std::string(to_string(kind)));
}

const GridCellResult& GridResults::cell(ShiftKind kind, LossKind loss, double quality,
                                        double quantity) const {
  for (const auto& c : cells) {
    if (c.scenario == kind && c.loss == loss && c.quality == quality && c.quantity == quantity) {
      return c;
    }
  }
  throw InvalidInput("no grid cell " + std::string(to_string(kind)) + "/" +
                     std::string(to_string(loss)) + " quality " + std::to_string(quality) +
                     " quantity " + std::to_string(quantity));
}

ModelProvider pretraining_provider(const ExperimentConfig& cfg) {
  return [cfg](const ScenarioInstance& inst) { return pretrain_model(inst, cfg); };
}

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, ShiftKind kind,
                                      std::uint64_t seed) {
  return dir / (std::string(to_string(kind)) + "_seed" + std::to_string(seed) + ".ckpt");
}

ModelProvider checkpoint_provider(const std::filesystem::path& dir) {
  return [dir](const ScenarioInstance& inst) {
    const auto path = checkpoint_path(dir, inst.kind, inst.seed);
    if (!std::filesystem::exists(path)) {
      throw Error("missing checkpoint " + path.string() + "; create it with `plbench pretrain --scenario " +
                  std::string(to_string(inst.kind)) + " --seed " + std::to_string(inst.seed) +
                  " --checkpoint-dir " + dir.string() + "`");
    }
    ModelState model = load_checkpoint(path);
    if (model.config.num_known_classes != inst.spec.num_known() ||
        model.config.input_dim != inst.data.target.features.cols()) {
      throw ShapeError("checkpoint " + path.string() + " does not match the scenario's dimensions");
    }
    return model;
  };
}

double mean_of(const std::vector<double>& values) {
  double total = 0.0;
  for (double v : values) total += v;
  return values.empty() ? 0.0 : total / static_cast<double>(values.size());
}

GridResults run_grid(const GridSpec& spec, const ExperimentConfig& cfg,
                     const ModelProvider& provider, int threads) {
  spec.validate();
  cfg.validate();
  const auto seeds = spec.seeds();

  struct Prepared {
    ScenarioInstance instance;
    ModelState model;
  };
  const std::size_t n_prepared = spec.scenarios.size() * seeds.size();
  std::vector<Prepared> prepared(n_prepared);
  parallel_for(n_prepared, threads, [&](std::size_t i) {
    const ShiftKind kind = spec.scenarios[i / seeds.size()];
    prepared[i].instance = build_scenario(kind, seeds[i % seeds.size()], cfg);
    prepared[i].model = provider(prepared[i].instance);
  });

  GridResults out;
  out.spec = spec;
  std::vector<StreamMetrics> baseline_metrics(n_prepared);
  parallel_for(n_prepared, threads, [&](std::size_t i) {
    baseline_metrics[i] =
        evaluate_source_only(prepared[i].model, prepared[i].instance.data.target, cfg.run);
  });
  for (std::size_t s = 0; s < spec.scenarios.size(); ++s) {
    BaselineResult b;
    b.scenario = spec.scenarios[s];
    b.seeds = seeds;
    for (std::size_t r = 0; r < seeds.size(); ++r) {
      const auto& m = baseline_metrics[s * seeds.size() + r];
      b.metrics.push_back(m);
      b.per_seed.push_back(primary_metric(m, b.scenario));
    }
    b.mean = mean_of(b.per_seed);
    out.baselines.push_back(std::move(b));
  }

  // Job order: scenario, loss, quantity, quality, seed.
  struct Job {
    std::size_t scenario;
    LossKind loss;
    double quality;
    double quantity;
    std::size_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t s = 0; s < spec.scenarios.size(); ++s)
    for (LossKind loss : spec.losses)
      for (double quantity : spec.quantities)
        for (double quality : spec.qualities)
          for (std::size_t r = 0; r < seeds.size(); ++r) jobs.push_back({s, loss, quality, quantity, r});

  out.runs.resize(jobs.size());
  parallel_for(jobs.size(), threads, [&](std::size_t j) {
    const Job& job = jobs[j];
    const Prepared& p = prepared[job.scenario * seeds.size() + job.seed];
    out.runs[j] = run_cell(p.instance, p.model, job.loss, job.quality, job.quantity, cfg);
  });

  for (std::size_t j = 0; j < jobs.size(); j += seeds.size()) {
    GridCellResult cell;
    cell.scenario = out.runs[j].scenario;
    cell.loss = out.runs[j].loss;
    cell.quality = out.runs[j].quality;
    cell.quantity = out.runs[j].quantity;
    for (std::size_t r = 0; r < seeds.size(); ++r) {
      cell.seeds.push_back(out.runs[j + r].seed);
      cell.per_seed.push_back(out.runs[j + r].primary());
    }
    cell.mean = mean_of(cell.per_seed);
    out.cells.push_back(std::move(cell));
  }
  return out;
}

}  // namespace plbench
