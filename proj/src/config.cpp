#include "plbench/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <vector>

#include "plbench/error.hpp"

namespace plbench {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

double to_double(std::string_view text) {
  const std::string s = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
    throw InvalidInput("expected a number, got '" + s + "'");
  }
  return v;
}

std::size_t to_count(std::string_view text) {
  const std::string s = trim(text);
  unsigned long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
    throw InvalidInput("expected a non-negative integer, got '" + s + "'");
  }
  return static_cast<std::size_t>(v);
}

bool to_bool(std::string_view text) {
  const std::string s = trim(text);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw InvalidInput("expected a boolean, got '" + s + "'");
}

std::vector<std::string> to_list(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto end = comma == std::string_view::npos ? text.size() : comma;
    out.push_back(trim(text.substr(start, end - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (out.size() == 1 && out.front().empty()) out.clear();
  return out;
}

std::vector<double> to_numbers(std::string_view text) {
  std::vector<double> out;
  for (const auto& item : to_list(text)) out.push_back(to_double(item));
  return out;
}

std::vector<double> to_percentages(std::string_view text) {
  auto out = to_numbers(text);
  for (double v : out) {
    if (!(v >= 0.0 && v <= 100.0)) throw InvalidInput("percentages must lie in [0, 100]");
  }
  return out;
}

using Setter = std::function<void(Settings&, std::string_view)>;

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = {
      {"scenario.num_classes", [](Settings& s, std::string_view v) { s.experiment.num_classes = to_count(v); }},
      {"scenario.source_per_class", [](Settings& s, std::string_view v) { s.experiment.sizes.source_per_class = to_count(v); }},
      {"scenario.target_per_class", [](Settings& s, std::string_view v) { s.experiment.sizes.target_per_class = to_count(v); }},
      {"scenario.input_dim", [](Settings& s, std::string_view v) { s.experiment.shift.input_dim = to_count(v); }},
      {"scenario.rotation_strength", [](Settings& s, std::string_view v) { s.experiment.shift.rotation_strength = to_double(v); }},
      {"scenario.rotation_planes", [](Settings& s, std::string_view v) { s.experiment.shift.rotation_planes = to_count(v); }},
      {"scenario.mean_offset", [](Settings& s, std::string_view v) { s.experiment.shift.mean_offset = to_double(v); }},
      {"scenario.noise_scale_ratio", [](Settings& s, std::string_view v) { s.experiment.shift.noise_scale_ratio = to_double(v); }},
      {"scenario.nuisance_dim", [](Settings& s, std::string_view v) { s.experiment.shift.nuisance_dim = to_count(v); }},
      {"scenario.nuisance_std", [](Settings& s, std::string_view v) { s.experiment.shift.nuisance_std = to_double(v); }},
      {"scenario.class_mean_radius", [](Settings& s, std::string_view v) { s.experiment.shift.class_mean_radius = to_double(v); }},
      {"scenario.within_class_std", [](Settings& s, std::string_view v) { s.experiment.shift.within_class_std = to_double(v); }},
      {"model.hidden_dim", [](Settings& s, std::string_view v) { s.experiment.model.hidden_dim = to_count(v); }},
      {"model.feature_dim", [](Settings& s, std::string_view v) { s.experiment.model.feature_dim = to_count(v); }},
      {"model.projection_dim", [](Settings& s, std::string_view v) { s.experiment.model.projection_dim = to_count(v); }},
      {"pretrain.epochs", [](Settings& s, std::string_view v) { s.experiment.pretrain.epochs = to_count(v); }},
      {"pretrain.batch_size", [](Settings& s, std::string_view v) { s.experiment.pretrain.batch_size = to_count(v); }},
      {"pretrain.learning_rate", [](Settings& s, std::string_view v) { s.experiment.pretrain.optim.learning_rate = to_double(v); }},
      {"pretrain.momentum", [](Settings& s, std::string_view v) { s.experiment.pretrain.optim.momentum = to_double(v); }},
      {"run.batch_size", [](Settings& s, std::string_view v) { s.experiment.run.batch_size = to_count(v); }},
      {"run.eval_timing", [](Settings& s, std::string_view v) { s.experiment.run.eval_timing = parse_eval_timing(trim(v)); }},
      {"run.rejection_threshold", [](Settings& s, std::string_view v) { s.experiment.run.rejection_threshold = to_double(v); }},
      {"run.learning_rate", [](Settings& s, std::string_view v) { s.experiment.run.optim.learning_rate = to_double(v); }},
      {"run.momentum", [](Settings& s, std::string_view v) { s.experiment.run.optim.momentum = to_double(v); }},
      {"run.alpha", [](Settings& s, std::string_view v) { s.experiment.run.pseudo.alpha = to_double(v); }},
      {"loss.temperature", [](Settings& s, std::string_view v) { s.experiment.run.loss.temperature = to_double(v); }},
      {"loss.lambda", [](Settings& s, std::string_view v) { s.experiment.run.loss.lambda_balance = to_double(v); }},
      {"loss.prototype_momentum", [](Settings& s, std::string_view v) { s.experiment.run.loss.prototype_momentum = to_double(v); }},
      {"loss.unknown_prototype", [](Settings& s, std::string_view v) { s.experiment.run.loss.unknown_prototype = to_bool(v); }},
      {"grid.qualities", [](Settings& s, std::string_view v) { s.grid.qualities = to_percentages(v); }},
      {"grid.quantities", [](Settings& s, std::string_view v) { s.grid.quantities = to_percentages(v); }},
      {"grid.scenarios", [](Settings& s, std::string_view v) {
         s.grid.scenarios.clear();
         for (const auto& item : to_list(v)) s.grid.scenarios.push_back(parse_shift_kind(item));
       }},
      {"grid.losses", [](Settings& s, std::string_view v) {
         s.grid.losses.clear();
         for (const auto& item : to_list(v)) s.grid.losses.push_back(parse_loss_kind(item));
       }},
      {"grid.repeats", [](Settings& s, std::string_view v) { s.grid.repeats = to_count(v); }},
      {"grid.base_seed", [](Settings& s, std::string_view v) { s.grid.base_seed = to_count(v); }},
  };
  return table;
}

}  // namespace

void apply_setting(Settings& settings, std::string_view key, std::string_view value) {
  const auto it = setters().find(key);
  if (it == setters().end()) throw InvalidInput("unknown config key '" + std::string(key) + "'");
  it->second(settings, value);
}

void apply_config(std::istream& in, Settings& settings, std::string_view source_name) {
  const std::string src(source_name);
  std::string section;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    const std::string body = trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    if (body.front() == '[') {
      if (body.back() != ']' || body.size() < 3) throw ParseError(src, line_no, "bad section header");
      section = trim(std::string_view(body).substr(1, body.size() - 2));
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ParseError(src, line_no, "expected 'key = value'");
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    const std::string full = section.empty() ? key : section + "." + key;
    try {
      apply_setting(settings, full, value);
    } catch (const InvalidInput& e) {
      throw ParseError(src, line_no, e.what());
    }
  }
}

void apply_config_file(const std::filesystem::path& path, Settings& settings) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file " + path.string());
  apply_config(in, settings, path.string());
}

}  // namespace plbench
