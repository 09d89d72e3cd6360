#include "plbench/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "plbench/error.hpp"
#include "plbench/numerics.hpp"

namespace plbench {

std::string_view to_string(LossKind kind) {
  return kind == LossKind::contrastive ? "contrastive" : "cross_entropy";
}

LossKind parse_loss_kind(std::string_view text) {
  if (text == "contrastive" || text == "con") return LossKind::contrastive;
  if (text == "cross_entropy" || text == "ce") return LossKind::cross_entropy;
  throw InvalidInput("unknown loss kind '" + std::string(text) + "'");
}

void LossConfig::validate() const {
  if (!(temperature > 0.0)) throw InvalidInput("temperature must be > 0");
  if (!(lambda_balance >= 0.0)) throw InvalidInput("lambda must be >= 0");
  if (!(prototype_momentum >= 0.0 && prototype_momentum <= 1.0)) {
    throw InvalidInput("prototype momentum must lie in [0, 1]");
  }
}

namespace {

bool normalize(std::span<double> v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  const double norm = std::sqrt(sq);
  if (!(norm > 0.0) || !std::isfinite(norm)) return false;
  for (double& x : v) x /= norm;
  return true;
}

void check_rows(const Matrix& m, std::span<const PseudoLabelAssignment> a, const char* op) {
  if (m.rows() != a.size()) {
    throw ShapeError(std::string(op) + ": " + std::to_string(a.size()) + " assignments for " +
                     std::to_string(m.rows()) + " rows");
  }
}

}  // namespace

PrototypeBank::PrototypeBank(std::size_t num_known, std::size_t dim, bool with_unknown)
    : num_known_(num_known),
      with_unknown_(with_unknown),
      vectors_(num_known + (with_unknown ? 1 : 0), dim),
      initialized_(num_known + (with_unknown ? 1 : 0), 0) {}

std::size_t PrototypeBank::slot(Label label) const noexcept {
  if (label == kUnknown) return with_unknown_ ? num_known_ : npos;
  if (label < 0 || static_cast<std::size_t>(label) >= num_known_) return npos;
  return static_cast<std::size_t>(label);
}

void PrototypeBank::set(std::size_t slot, std::span<const double> v) {
  if (slot >= slots() || v.size() != dim()) throw ShapeError("PrototypeBank::set: bad slot or dim");
  auto row = vectors_.row(slot);
  std::copy(v.begin(), v.end(), row.begin());
  if (!normalize(row)) throw InvalidInput("PrototypeBank::set: zero vector");
  initialized_[slot] = 1;
}

LossResult contrastive_loss(const Matrix& projections,
                            std::span<const PseudoLabelAssignment> assignments,
                            const PrototypeBank& bank, const LossConfig& cfg) {
  cfg.validate();
  check_rows(projections, assignments, "contrastive_loss");
  if (projections.cols() != bank.dim()) throw ShapeError("contrastive_loss: projection dim mismatch");

  LossResult out;
  out.grad = Matrix(projections.rows(), projections.cols());

  std::vector<std::size_t> active;
  for (std::size_t s = 0; s < bank.slots(); ++s) {
    if (bank.initialized(s)) active.push_back(s);
  }

  std::vector<std::size_t> members;
  for (const auto& a : assignments) {
    if (!a.selected) continue;
    const std::size_t s = bank.slot(a.label);
    if (s != PrototypeBank::npos && bank.initialized(s)) members.push_back(a.sample_index);
  }
  if (members.empty()) return out;

  const double inv_t = 1.0 / cfg.temperature;
  const double inv_n = 1.0 / static_cast<double>(members.size());
  std::vector<double> sims(active.size());
  for (std::size_t i : members) {
    const auto z = projections.row(i);
    const std::size_t target = bank.slot(assignments[i].label);
    std::size_t target_pos = 0;
    for (std::size_t k = 0; k < active.size(); ++k) {
      const auto mu = bank.prototype(active[k]);
      double dot = 0.0;
      for (std::size_t j = 0; j < z.size(); ++j) dot += z[j] * mu[j];
      sims[k] = dot * inv_t;
      if (active[k] == target) target_pos = k;
    }
    const double peak = *std::max_element(sims.begin(), sims.end());
    double total = 0.0;
    for (double s : sims) total += std::exp(s - peak);
    const double log_norm = peak + std::log(total);
    out.value += (log_norm - sims[target_pos]) * inv_n;

    // d/dz = (sum_c w_c mu_c - mu_target) / T, w = softmax(sims)
    auto g = out.grad.row(i);
    for (std::size_t k = 0; k < active.size(); ++k) {
      const double w = std::exp(sims[k] - log_norm) - (k == target_pos ? 1.0 : 0.0);
      const auto mu = bank.prototype(active[k]);
      for (std::size_t j = 0; j < g.size(); ++j) g[j] += w * mu[j] * inv_t * inv_n;
    }
  }
  out.contributing = members.size();
  return out;
}

LossResult separation_loss(const Matrix& probs,
                           std::span<const PseudoLabelAssignment> assignments) {
  check_rows(probs, assignments, "separation_loss");
  LossResult out;
  out.grad = Matrix(probs.rows(), probs.cols());

  std::size_t n_known = 0;
  std::size_t n_unknown = 0;
  for (const auto& a : assignments) {
    if (!a.selected) continue;
    (a.label == kUnknown ? n_unknown : n_known) += 1;
  }
  const double log_k = std::log(static_cast<double>(probs.cols()));

  for (const auto& a : assignments) {
    if (!a.selected) continue;
    const bool unknown = a.label == kUnknown;
    const double weight = 1.0 / static_cast<double>(unknown ? n_unknown : n_known);
    const double sign = unknown ? -1.0 : 1.0;
    const auto p = probs.row(a.sample_index);
    const double entropy = normalized_entropy(p);
    out.value += weight * (unknown ? 1.0 - entropy : entropy);

    // dI/dl_j = -(p_j / log K) (log p_j - sum_c p_c log p_c)
    double mean_log = 0.0;
    for (double pc : p) mean_log += pc * std::log(std::max(pc, kProbFloor));
    auto g = out.grad.row(a.sample_index);
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double d_entropy = -p[j] * (std::log(std::max(p[j], kProbFloor)) - mean_log) / log_k;
      g[j] = sign * weight * d_entropy;
    }
  }
  out.contributing = n_known + n_unknown;
  return out;
}

LossResult cross_entropy_loss(const Matrix& probs,
                              std::span<const PseudoLabelAssignment> assignments) {
  check_rows(probs, assignments, "cross_entropy_loss");
  LossResult out;
  out.grad = Matrix(probs.rows(), probs.cols());

  std::size_t n = 0;
  for (const auto& a : assignments) n += a.selected ? 1 : 0;
  if (n == 0) return out;

  const double k = static_cast<double>(probs.cols());
  const double inv_n = 1.0 / static_cast<double>(n);
  for (const auto& a : assignments) {
    if (!a.selected) continue;
    const auto p = probs.row(a.sample_index);
    auto g = out.grad.row(a.sample_index);
    if (a.label == kUnknown) {
      double loss = 0.0;
      for (double pc : p) loss -= std::log(std::max(pc, kProbFloor));
      out.value += loss / k * inv_n;
      for (std::size_t j = 0; j < p.size(); ++j) g[j] = (p[j] - 1.0 / k) * inv_n;
    } else {
      if (a.label < 0 || static_cast<std::size_t>(a.label) >= p.size()) {
        throw InvalidInput("cross_entropy_loss: pseudo-label out of range");
      }
      const auto c = static_cast<std::size_t>(a.label);
      out.value -= std::log(std::max(p[c], kProbFloor)) * inv_n;
      for (std::size_t j = 0; j < p.size(); ++j) g[j] = (p[j] - (j == c ? 1.0 : 0.0)) * inv_n;
    }
  }
  out.contributing = n;
  return out;
}

ObjectiveResult combined_contrastive_objective(const Matrix& probs, const Matrix& projections,
                                               std::span<const PseudoLabelAssignment> assignments,
                                               const PrototypeBank& bank, const LossConfig& cfg) {
  auto con = contrastive_loss(projections, assignments, bank, cfg);
  auto sep = separation_loss(probs, assignments);
  ObjectiveResult out;
  out.contrastive = con.value;
  out.separation = sep.value;
  out.value = con.value + cfg.lambda_balance * sep.value;
  out.contributing = std::max(con.contributing, sep.contributing);
  out.grad_projections = std::move(con.grad);
  out.grad_logits = scale(sep.grad, cfg.lambda_balance);
  return out;
}

ObjectiveResult adaptation_objective(const Matrix& probs, const Matrix& projections,
                                     std::span<const PseudoLabelAssignment> assignments,
                                     const PrototypeBank& bank, const LossConfig& cfg) {
  if (cfg.kind == LossKind::contrastive) {
    return combined_contrastive_objective(probs, projections, assignments, bank, cfg);
  }
  auto ce = cross_entropy_loss(probs, assignments);
  ObjectiveResult out;
  out.value = ce.value;
  out.contributing = ce.contributing;
  out.grad_logits = std::move(ce.grad);
  out.grad_projections = Matrix(projections.rows(), projections.cols());
  return out;
}

void update_prototypes(PrototypeBank& bank, const Matrix& projections,
                       std::span<const PseudoLabelAssignment> assignments, double momentum) {
  check_rows(projections, assignments, "update_prototypes");
  if (projections.cols() != bank.dim()) throw ShapeError("update_prototypes: projection dim mismatch");

  Matrix sums(bank.slots(), bank.dim());
  std::vector<std::size_t> counts(bank.slots(), 0);
  for (const auto& a : assignments) {
    if (!a.selected) continue;
    const std::size_t s = bank.slot(a.label);
    if (s == PrototypeBank::npos) continue;
    const auto z = projections.row(a.sample_index);
    auto acc = sums.row(s);
    for (std::size_t j = 0; j < z.size(); ++j) acc[j] += z[j];
    ++counts[s];
  }

  for (std::size_t s = 0; s < bank.slots(); ++s) {
    if (counts[s] == 0) continue;
    auto mean = sums.row(s);
    if (!normalize(mean)) continue;  // zero-norm batch mean: keep the old prototype
    auto mu = bank.vectors_.row(s);
    if (bank.initialized(s) && momentum == 1.0) continue;
    if (!bank.initialized(s)) {
      std::copy(mean.begin(), mean.end(), mu.begin());
      bank.initialized_[s] = 1;
      continue;
    }
    std::vector<double> next(mu.size());
    for (std::size_t j = 0; j < mu.size(); ++j) next[j] = momentum * mu[j] + (1.0 - momentum) * mean[j];
    if (normalize(next)) std::copy(next.begin(), next.end(), mu.begin());
  }
}

}  // namespace plbench
