#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "plbench/matrix.hpp"
#include "plbench/pseudo_label.hpp"

namespace plbench {

enum class LossKind { contrastive, cross_entropy };

std::string_view to_string(LossKind kind);
LossKind parse_loss_kind(std::string_view text);

struct LossConfig {
  LossKind kind = LossKind::contrastive;
  double temperature = 0.1;
  double lambda_balance = 0.01;      ///< weight of the separation term
  double prototype_momentum = 0.9;   ///< EMA momentum of the prototype bank
  bool unknown_prototype = true;     ///< keep a prototype for UNKNOWN-labeled samples

  void validate() const;
};

/// Class-wise EMA prototypes in projection space. Slot |Y_s| holds UNKNOWN.
class PrototypeBank {
 public:
  PrototypeBank(std::size_t num_known, std::size_t dim, bool with_unknown = true);

  std::size_t num_known() const noexcept { return num_known_; }
  std::size_t dim() const noexcept { return vectors_.cols(); }
  bool has_unknown_slot() const noexcept { return with_unknown_; }

  /// Bank slot for a pseudo-label, or npos when the label has no slot.
  std::size_t slot(Label label) const noexcept;
  std::size_t slots() const noexcept { return vectors_.rows(); }

  bool initialized(std::size_t slot) const noexcept { return initialized_[slot] != 0; }
  std::span<const double> prototype(std::size_t slot) const { return vectors_.row(slot); }

  /// Sets a slot directly (normalized). Used by tests and tooling.
  void set(std::size_t slot, std::span<const double> v);

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  friend void update_prototypes(PrototypeBank&, const Matrix&,
                                std::span<const PseudoLabelAssignment>, double);

  std::size_t num_known_;
  bool with_unknown_;
  Matrix vectors_;
  std::vector<char> initialized_;
};

struct LossResult {
  double value = 0.0;
  std::size_t contributing = 0;  ///< samples that entered the loss; 0 = empty contribution
  Matrix grad;                   ///< w.r.t. projections or logits, one row per batch sample
};

/// Mean over contributing samples of -log softmax_c(z_i . mu_c / T)[c_hat_i], where c
/// ranges over initialized prototypes. Samples whose pseudo-label prototype is not
/// initialized are skipped. Prototypes are constants.
LossResult contrastive_loss(const Matrix& projections,
                            std::span<const PseudoLabelAssignment> assignments,
                            const PrototypeBank& bank, const LossConfig& cfg);

/// mean_{known-labeled} I(p_i) + mean_{UNKNOWN-labeled} (1 - I(p_i)); gradient is
/// w.r.t. the logits that produced `probs`.
LossResult separation_loss(const Matrix& probs, std::span<const PseudoLabelAssignment> assignments);

/// Mean cross-entropy over selected samples; UNKNOWN targets the uniform vector.
/// Gradient w.r.t. logits is (p - target) / n_selected.
LossResult cross_entropy_loss(const Matrix& probs,
                              std::span<const PseudoLabelAssignment> assignments);

struct ObjectiveResult {
  double value = 0.0;
  double contrastive = 0.0;
  double separation = 0.0;
  std::size_t contributing = 0;
  Matrix grad_logits;
  Matrix grad_projections;
};

/// L = L_con + lambda * L_sep.
ObjectiveResult combined_contrastive_objective(const Matrix& probs, const Matrix& projections,
                                               std::span<const PseudoLabelAssignment> assignments,
                                               const PrototypeBank& bank, const LossConfig& cfg);

/// Configured objective: combined contrastive or plain cross-entropy (zero
/// projection gradient).
ObjectiveResult adaptation_objective(const Matrix& probs, const Matrix& projections,
                                     std::span<const PseudoLabelAssignment> assignments,
                                     const PrototypeBank& bank, const LossConfig& cfg);

/// EMA update from one batch: per pseudo-labeled class, mu = normalize(batch mean) on
/// first sight, else normalize(m * mu + (1 - m) * normalize(batch mean)).
void update_prototypes(PrototypeBank& bank, const Matrix& projections,
                       std::span<const PseudoLabelAssignment> assignments, double momentum);

}  // namespace plbench
