#include "plbench/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>

#include "plbench/error.hpp"

namespace plbench {

std::string_view to_string(ShiftKind kind) {
  switch (kind) {
    case ShiftKind::PDA: return "PDA";
    case ShiftKind::ODA: return "ODA";
    case ShiftKind::OPDA: return "OPDA";
  }
  return "?";
}

ShiftKind parse_shift_kind(std::string_view text) {
  std::string upper(text);
  for (char& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (upper == "PDA") return ShiftKind::PDA;
  if (upper == "ODA") return ShiftKind::ODA;
  if (upper == "OPDA") return ShiftKind::OPDA;
  throw InvalidInput("unknown scenario '" + std::string(text) + "' (expected PDA, ODA or OPDA)");
}

std::vector<int> ScenarioSpec::known_classes() const {
  std::vector<int> a = shared;
  std::vector<int> b = source_private;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

Label ScenarioSpec::label_of(int generating_class) const {
  const auto known = known_classes();
  const auto it = std::find(known.begin(), known.end(), generating_class);
  return it == known.end() ? kUnknown : static_cast<Label>(it - known.begin());
}

void ScenarioSpec::validate() const {
  std::vector<int> all;
  for (const auto* set : {&shared, &source_private, &target_private}) {
    all.insert(all.end(), set->begin(), set->end());
  }
  std::sort(all.begin(), all.end());
  if (std::adjacent_find(all.begin(), all.end()) != all.end()) {
    throw InvalidInput("scenario class sets overlap");
  }
  for (int c : all) {
    if (c < 0 || static_cast<std::size_t>(c) >= num_classes) {
      throw InvalidInput("scenario class id " + std::to_string(c) + " out of range");
    }
  }
  if (kind == ShiftKind::PDA && !target_private.empty()) {
    throw InvalidInput("PDA scenario cannot have target-private classes");
  }
  if (kind == ShiftKind::ODA && !source_private.empty()) {
    throw InvalidInput("ODA scenario cannot have source-private classes");
  }
  if (shared.empty() || num_known() < 2) throw InvalidInput("scenario needs >= 2 known classes");
}

ScenarioSpec make_splits(ShiftKind kind, std::size_t num_classes, RandomSource& rng) {
  if (num_classes < 4) {
    throw InvalidInput("scenario recipe needs at least 4 classes, got " +
                       std::to_string(num_classes));
  }
  const std::size_t n_shared = num_classes / 2;
  const std::size_t rest = num_classes - n_shared;
  std::size_t n_source_private = 0;
  switch (kind) {
    case ShiftKind::PDA: n_source_private = rest; break;
    case ShiftKind::ODA: n_source_private = 0; break;
    case ShiftKind::OPDA: n_source_private = rest / 2; break;
  }
  const std::size_t n_target_private = rest - n_source_private;

  std::vector<int> ids(num_classes);
  std::iota(ids.begin(), ids.end(), 0);
  rng.shuffle(std::span<int>(ids));

  ScenarioSpec spec;
  spec.kind = kind;
  spec.num_classes = num_classes;
  auto take = [&, pos = std::size_t{0}](std::size_t count) mutable {
    std::vector<int> out(ids.begin() + static_cast<std::ptrdiff_t>(pos),
                         ids.begin() + static_cast<std::ptrdiff_t>(pos + count));
    std::sort(out.begin(), out.end());
    pos += count;
    return out;
  };
  spec.shared = take(n_shared);
  spec.source_private = take(n_source_private);
  spec.target_private = take(n_target_private);
  spec.validate();
  return spec;
}

void DomainShiftConfig::validate() const {
  if (!(rotation_strength >= 0.0) || !(mean_offset >= 0.0) || !(nuisance_std >= 0.0)) {
    throw InvalidInput("shift strengths must be >= 0");
  }
  if (!(noise_scale_ratio > 0.0) || !(class_mean_radius > 0.0) || !(within_class_std > 0.0)) {
    throw InvalidInput("noise ratio, class radius and class std must be > 0");
  }
  if (input_dim < 2) throw InvalidInput("input_dim must be >= 2");
}

namespace {

std::vector<double> random_unit(std::size_t dim, RandomSource& rng) {
  std::vector<double> v(dim);
  double sq = 0.0;
  do {
    sq = 0.0;
    for (double& x : v) {
      x = rng.normal();
      sq += x * x;
    }
  } while (sq == 0.0);
  const double norm = std::sqrt(sq);
  for (double& x : v) x /= norm;
  return v;
}

struct DomainShift {
  Matrix rotation;  // applied as row-vector * rotation
  std::vector<double> offset;
  std::vector<std::vector<double>> nuisance;  // orthonormal basis
  double nuisance_std = 0.0;

  std::vector<double> apply(std::span<const double> x) const {
    std::vector<double> out(offset);
    for (std::size_t k = 0; k < x.size(); ++k) {
      const auto r = rotation.row(k);
      for (std::size_t j = 0; j < out.size(); ++j) out[j] += x[k] * r[j];
    }
    return out;
  }
};

DomainShift make_shift(const DomainShiftConfig& cfg, RandomSource& rng) {
  const std::size_t d = cfg.input_dim;
  DomainShift shift{Matrix::identity(d), std::vector<double>(d, 0.0), {}, 0.0};
  for (std::size_t p = 0; p < cfg.rotation_planes; ++p) {
    const std::size_t a = rng.uniform_index(d);
    std::size_t b = rng.uniform_index(d - 1);
    if (b >= a) ++b;
    const double angle = rng.uniform() < 0.5 ? -cfg.rotation_strength : cfg.rotation_strength;
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    for (std::size_t r = 0; r < d; ++r) {
      const double xa = shift.rotation(r, a);
      const double xb = shift.rotation(r, b);
      shift.rotation(r, a) = c * xa - s * xb;
      shift.rotation(r, b) = s * xa + c * xb;
    }
  }
  const auto dir = random_unit(d, rng);
  for (std::size_t j = 0; j < d; ++j) shift.offset[j] = cfg.mean_offset * dir[j];

  // Gram-Schmidt on random directions.
  shift.nuisance_std = cfg.nuisance_std;
  for (std::size_t k = 0; k < std::min(cfg.nuisance_dim, d); ++k) {
    std::vector<double> v = random_unit(d, rng);
    for (const auto& b : shift.nuisance) {
      double dot = 0.0;
      for (std::size_t j = 0; j < d; ++j) dot += v[j] * b[j];
      for (std::size_t j = 0; j < d; ++j) v[j] -= dot * b[j];
    }
    double sq = 0.0;
    for (double x : v) sq += x * x;
    for (double& x : v) x /= std::sqrt(sq);
    shift.nuisance.push_back(std::move(v));
  }
  return shift;
}

LabeledDataset sample_domain(const ScenarioSpec& spec, std::span<const int> classes,
                             const std::vector<std::vector<double>>& means, double noise_std,
                             const DomainShift* nuisance, std::size_t per_class, Domain domain,
                             RandomSource& rng) {
  const std::size_t dim = means.front().size();
  const std::size_t n = classes.size() * per_class;
  LabeledDataset out;
  out.domain = domain;
  out.features = Matrix(n, dim);
  out.labels.resize(n);
  out.classes.resize(n);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(std::span<std::size_t>(order));

  std::size_t k = 0;
  for (int cls : classes) {
    const auto& mean = means[static_cast<std::size_t>(cls)];
    for (std::size_t s = 0; s < per_class; ++s, ++k) {
      const std::size_t row = order[k];
      auto x = out.features.row(row);
      for (std::size_t j = 0; j < dim; ++j) x[j] = mean[j] + noise_std * rng.normal();
      if (nuisance != nullptr && nuisance->nuisance_std > 0.0) {
        for (const auto& basis : nuisance->nuisance) {
          const double amount = nuisance->nuisance_std * rng.normal();
          for (std::size_t j = 0; j < dim; ++j) x[j] += amount * basis[j];
        }
      }
      out.labels[row] = spec.label_of(cls);
      out.classes[row] = cls;
    }
  }
  return out;
}

}  // namespace

DomainPair generate_domains(const ScenarioSpec& spec, const DomainShiftConfig& shift,
                            const DomainSizes& sizes, RandomSource& rng) {
  spec.validate();
  shift.validate();
  if (sizes.source_per_class < 1 || sizes.target_per_class < 1) {
    throw InvalidInput("per-class sample counts must be >= 1");
  }

  std::vector<std::vector<double>> source_means(spec.num_classes);
  for (auto& m : source_means) {
    m = random_unit(shift.input_dim, rng);
    for (double& x : m) x *= shift.class_mean_radius;
  }
  const DomainShift transform = make_shift(shift, rng);
  std::vector<std::vector<double>> target_means(spec.num_classes);
  for (std::size_t c = 0; c < spec.num_classes; ++c) target_means[c] = transform.apply(source_means[c]);

  std::vector<int> source_classes = spec.known_classes();
  std::vector<int> target_classes = spec.shared;
  target_classes.insert(target_classes.end(), spec.target_private.begin(), spec.target_private.end());
  std::sort(source_classes.begin(), source_classes.end());
  std::sort(target_classes.begin(), target_classes.end());

  DomainPair out;
  out.source = sample_domain(spec, source_classes, source_means, shift.within_class_std, nullptr,
                             sizes.source_per_class, Domain::source, rng);
  out.target = sample_domain(spec, target_classes, target_means,
                             shift.within_class_std * shift.noise_scale_ratio, &transform,
                             sizes.target_per_class, Domain::target, rng);
  return out;
}

void write_feature_file(std::ostream& out, const LabeledDataset& data) {
  out << data.size() << ' ' << data.features.cols() << '\n';
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << data.labels[i];
    for (double v : data.features.row(i)) out << ' ' << v;
    out << '\n';
  }
}

void save_feature_file(const std::filesystem::path& path, const LabeledDataset& data) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  write_feature_file(out, data);
}

namespace {

template <class T>
bool parse_token(std::istringstream& in, T& value) {
  in >> value;
  return static_cast<bool>(in);
}

}  // namespace

LabeledDataset read_feature_file(std::istream& in, std::size_t num_known,
                                 std::size_t expected_dim, std::string_view source_name) {
  const std::string src(source_name);
  std::string line;
  std::size_t line_no = 0;

  if (!std::getline(in, line)) throw ParseError(src, 1, "missing header line \"N D\"");
  ++line_no;
  std::istringstream header(line);
  long long n = 0;
  long long d = 0;
  std::string extra;
  if (!parse_token(header, n) || !parse_token(header, d) || (header >> extra) || n < 0 || d < 1) {
    throw ParseError(src, line_no, "header must be \"N D\" with N >= 0, D >= 1");
  }
  if (expected_dim != 0 && static_cast<std::size_t>(d) != expected_dim) {
    throw ShapeError(src + ": feature dimension " + std::to_string(d) + " does not match model input " +
                     std::to_string(expected_dim));
  }

  LabeledDataset data;
  data.domain = Domain::target;
  data.features = Matrix(static_cast<std::size_t>(n), static_cast<std::size_t>(d));
  data.labels.resize(static_cast<std::size_t>(n));
  data.classes.assign(static_cast<std::size_t>(n), -1);

  for (std::size_t row = 0; row < static_cast<std::size_t>(n); ++row) {
    if (!std::getline(in, line)) {
      throw ParseError(src, line_no + 1, "expected " + std::to_string(n) + " data rows, got " +
                                             std::to_string(row));
    }
    ++line_no;
    std::istringstream fields(line);
    long long label = 0;
    if (!parse_token(fields, label)) throw ParseError(src, line_no, "bad label field");
    if (label < -1) throw ParseError(src, line_no, "negative label " + std::to_string(label));
    auto x = data.features.row(row);
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (!parse_token(fields, x[j])) {
        throw ParseError(src, line_no, "expected " + std::to_string(d) + " values after the label");
      }
    }
    if (fields >> extra) {
      throw ParseError(src, line_no, "too many fields (expected " + std::to_string(d + 1) + ")");
    }
    const bool unknown = label < 0 || static_cast<std::size_t>(label) >= num_known;
    data.labels[row] = unknown ? kUnknown : static_cast<Label>(label);
    data.classes[row] = static_cast<int>(label);
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") != std::string::npos) {
      throw ParseError(src, line_no, "unexpected data after " + std::to_string(n) + " rows");
    }
  }
  return data;
}

LabeledDataset load_feature_file(const std::filesystem::path& path, std::size_t num_known,
                                 std::size_t expected_dim) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open feature file " + path.string());
  return read_feature_file(in, num_known, expected_dim, path.string());
}

}  // namespace plbench
