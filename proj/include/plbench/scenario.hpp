#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string_view>
#include <vector>

#include "plbench/labels.hpp"
#include "plbench/matrix.hpp"
#include "plbench/random.hpp"

namespace plbench {

/// Category shift: partial-set (PDA), open-set (ODA), open-partial-set (OPDA).
enum class ShiftKind { PDA, ODA, OPDA };

std::string_view to_string(ShiftKind kind);
ShiftKind parse_shift_kind(std::string_view text);

/// Disjoint partition of the generating classes {0, ..., num_classes-1}.
struct ScenarioSpec {
  ShiftKind kind = ShiftKind::OPDA;
  std::size_t num_classes = 12;
  std::vector<int> shared;
  std::vector<int> source_private;
  std::vector<int> target_private;

  /// Source label space: shared then source-private, each ascending. The position
  /// of a class in this list is its known label.
  std::vector<int> known_classes() const;
  std::size_t num_known() const noexcept { return shared.size() + source_private.size(); }

  /// Known label of a generating class, kUnknown when it is target-private.
  Label label_of(int generating_class) const;

  void validate() const;
};

/// Synthetic stand-in for a synthetic-to-real domain gap: the target domain sees the
/// source class means through a random rotation plus an offset, with scaled noise and
/// extra variance along a random low-rank nuisance subspace the source never shows.
struct DomainShiftConfig {
  double rotation_strength = 0.1;   ///< radians per random plane rotation
  std::size_t rotation_planes = 16; ///< number of random Givens rotations composed
  double mean_offset = 0.5;         ///< length of the common target offset
  double noise_scale_ratio = 1.0;   ///< target noise std / source noise std
  std::size_t nuisance_dim = 4;     ///< rank of the target-only nuisance subspace
  double nuisance_std = 8.0;        ///< extra target std along the nuisance subspace
  std::size_t input_dim = 32;
  double class_mean_radius = 4.0;
  double within_class_std = 1.0;

  void validate() const;
};

struct DomainSizes {
  std::size_t source_per_class = 200;
  std::size_t target_per_class = 300;
};

enum class Domain { source, target };

struct LabeledDataset {
  Matrix features;               ///< N x input_dim
  GroundTruth labels;            ///< known label or kUnknown
  std::vector<int> classes;      ///< generating class, -1 when unavailable
  Domain domain = Domain::target;

  std::size_t size() const noexcept { return labels.size(); }
};

struct DomainPair {
  LabeledDataset source;
  LabeledDataset target;
};

/// PDA -> (6, 6, 0), ODA -> (6, 0, 6), OPDA -> (6, 3, 3) for 12 classes; other
/// counts split proportionally (half shared). Membership by seeded shuffle.
/// Throws InvalidInput when num_classes < 4.
ScenarioSpec make_splits(ShiftKind kind, std::size_t num_classes, RandomSource& rng);

/// Source: shared + source-private classes, mean + N(0, std^2). Target: shared +
/// target-private classes, shifted mean + N(0, (ratio * std)^2) + nuisance. Both shuffled.
DomainPair generate_domains(const ScenarioSpec& spec, const DomainShiftConfig& shift,
                            const DomainSizes& sizes, RandomSource& rng);

// Feature file: first line "N D", then N lines "label v1 ... vD". Labels are
// integers; -1 or any label >= num_known means UNKNOWN. Values are written with 17
// significant digits so a save/load round trip is exact.

void write_feature_file(std::ostream& out, const LabeledDataset& data);
void save_feature_file(const std::filesystem::path& path, const LabeledDataset& data);

/// `expected_dim` = 0 skips the dimension check; otherwise a mismatch is a ShapeError.
LabeledDataset read_feature_file(std::istream& in, std::size_t num_known,
                                 std::size_t expected_dim = 0,
                                 std::string_view source_name = "<stream>");
LabeledDataset load_feature_file(const std::filesystem::path& path, std::size_t num_known,
                                 std::size_t expected_dim = 0);

}  // namespace plbench
