#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

#include "plbench/experiment.hpp"

// Plain-text config file. One "key = value" per line, '#' starts a comment, and
// "[section]" headers prefix the keys that follow ("[run]" + "batch_size" ->
// "run.batch_size"). Lists are comma separated. Unknown keys are errors.
//
//   [scenario]  num_classes source_per_class target_per_class input_dim
//               rotation_strength rotation_planes mean_offset noise_scale_ratio
//               nuisance_dim nuisance_std class_mean_radius within_class_std
//   [model]     hidden_dim feature_dim projection_dim
//   [pretrain]  epochs batch_size learning_rate momentum
//   [run]       batch_size eval_timing rejection_threshold learning_rate momentum alpha
//   [loss]      temperature lambda prototype_momentum unknown_prototype
//   [grid]      qualities quantities scenarios losses repeats base_seed

namespace plbench {

struct Settings {
  ExperimentConfig experiment;
  GridSpec grid;
};

/// Applies every assignment in `in` on top of `settings`. Throws ParseError with
/// the line number on syntax errors, unknown keys and bad values.
void apply_config(std::istream& in, Settings& settings, std::string_view source_name = "<config>");
void apply_config_file(const std::filesystem::path& path, Settings& settings);

/// Applies a single "section.key" assignment.
void apply_setting(Settings& settings, std::string_view key, std::string_view value);

}  // namespace plbench
