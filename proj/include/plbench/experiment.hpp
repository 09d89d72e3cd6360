#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "plbench/harness.hpp"
#include "plbench/losses.hpp"
#include "plbench/model.hpp"
#include "plbench/scenario.hpp"

namespace plbench {

/// Everything a run needs besides the grid coordinates.
struct ExperimentConfig {
  std::size_t num_classes = 12;
  DomainShiftConfig shift;
  DomainSizes sizes;
  ModelConfig model;  ///< input_dim and num_known_classes are filled per scenario
  PretrainConfig pretrain;
  RunConfig run;

  void validate() const;
};

/// One (scenario, seed) draw: class split plus source and target data.
struct ScenarioInstance {
  ShiftKind kind = ShiftKind::OPDA;
  std::uint64_t seed = 0;
  ScenarioSpec spec;
  DomainPair data;
};

ScenarioInstance build_scenario(ShiftKind kind, std::uint64_t seed, const ExperimentConfig& cfg);

/// Model config for an instance (input dim and known-class count filled in).
ModelConfig model_config_for(const ScenarioInstance& inst, const ExperimentConfig& cfg);

/// Fresh init + supervised source training, seeded from the instance seed.
ModelState pretrain_model(const ScenarioInstance& inst, const ExperimentConfig& cfg);

/// Adapted run of one grid cell for one seed.
struct RunRecord {
  ShiftKind scenario = ShiftKind::OPDA;
  LossKind loss = LossKind::contrastive;
  double quality = 100.0;
  double quantity = 100.0;
  std::uint64_t seed = 0;
  StreamMetrics metrics;

  double primary() const { return primary_metric(metrics, scenario); }
  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

RunRecord run_cell(const ScenarioInstance& inst, const ModelState& pretrained, LossKind loss,
                   double quality, double quantity, const ExperimentConfig& cfg);

struct GridSpec {
  std::vector<double> qualities{0, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
  std::vector<double> quantities{10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
  std::vector<ShiftKind> scenarios{ShiftKind::PDA, ShiftKind::ODA, ShiftKind::OPDA};
  std::vector<LossKind> losses{LossKind::contrastive, LossKind::cross_entropy};
  std::size_t repeats = 3;
  std::uint64_t base_seed = 0;

  void validate() const;
  std::vector<std::uint64_t> seeds() const;
};

struct GridCellResult {
  ShiftKind scenario = ShiftKind::OPDA;
  LossKind loss = LossKind::contrastive;
  double quality = 0.0;
  double quantity = 0.0;
  std::vector<std::uint64_t> seeds;
  std::vector<double> per_seed;  ///< primary metric per seed
  double mean = 0.0;
};

/// Source-only metric of one scenario, per seed and averaged.
struct BaselineResult {
  ShiftKind scenario = ShiftKind::OPDA;
  std::vector<std::uint64_t> seeds;
  std::vector<double> per_seed;
  double mean = 0.0;
  std::vector<StreamMetrics> metrics;
};

struct GridResults {
  GridSpec spec;
  std::vector<BaselineResult> baselines;
  std::vector<GridCellResult> cells;  ///< ordered scenario, loss, quantity, quality
  std::vector<RunRecord> runs;        ///< same order, seeds innermost

  const BaselineResult& baseline(ShiftKind kind) const;
  const GridCellResult& cell(ShiftKind kind, LossKind loss, double quality, double quantity) const;
};

/// Supplies the pretrained model of an instance. Called concurrently.
using ModelProvider = std::function<ModelState(const ScenarioInstance&)>;

/// Provider that pretrains in memory.
ModelProvider pretraining_provider(const ExperimentConfig& cfg);

/// Checkpoint file name used by `pretrain` and expected by `grid`/`run`.
std::filesystem::path checkpoint_path(const std::filesystem::path& dir, ShiftKind kind,
                                      std::uint64_t seed);

/// Provider that loads `checkpoint_path(dir, ...)`; throws an Error naming the
/// pretrain command when the file is missing.
ModelProvider checkpoint_provider(const std::filesystem::path& dir);

/// Every (scenario, loss, quality, quantity) cell over `spec.repeats` seeds
/// (base_seed + r), plus source-only baselines. Runs execute on `threads` OpenMP
/// threads; results do not depend on the thread count.
GridResults run_grid(const GridSpec& spec, const ExperimentConfig& cfg,
                     const ModelProvider& provider, int threads = 1);

/// Mean of the per-seed values, and the results assembled from records alone.
double mean_of(const std::vector<double>& values);

}  // namespace plbench
