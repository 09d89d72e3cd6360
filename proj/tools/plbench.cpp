// plbench: pretrain source models, run single cells, sweep the quality x quantity
// grid and render heatmap reports.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "plbench/checkpoint.hpp"
#include "plbench/config.hpp"
#include "plbench/error.hpp"
#include "plbench/experiment.hpp"
#include "plbench/records.hpp"
#include "plbench/report.hpp"

namespace fs = std::filesystem;
using namespace plbench;

namespace {

struct CommonOptions {
  std::string config;
  std::vector<std::string> settings;  // --set section.key=value
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--config", opts.config, "Config file (key = value, [section] headers)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--set", opts.settings, "Override one config key, e.g. --set run.alpha=0");
}

Settings load_settings(const CommonOptions& opts) {
  Settings s;
  if (!opts.config.empty()) apply_config_file(opts.config, s);
  for (const auto& kv : opts.settings) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw InvalidInput("--set expects key=value, got '" + kv + "'");
    apply_setting(s, kv.substr(0, eq), kv.substr(eq + 1));
  }
  return s;
}

std::vector<ShiftKind> parse_scenarios(const std::vector<std::string>& names,
                                       const std::vector<ShiftKind>& fallback) {
  if (names.empty()) return fallback;
  std::vector<ShiftKind> out;
  for (const auto& n : names) out.push_back(parse_shift_kind(n));
  return out;
}

std::vector<LossKind> parse_losses(const std::vector<std::string>& names,
                                   const std::vector<LossKind>& fallback) {
  if (names.empty()) return fallback;
  std::vector<LossKind> out;
  for (const auto& n : names) out.push_back(parse_loss_kind(n));
  return out;
}

void print_metrics(const RunRecord& r) {
  const auto& m = r.metrics;
  std::cout << to_string(r.scenario) << " " << to_string(r.loss) << " quality " << r.quality
            << " quantity " << r.quantity << " seed " << r.seed << "\n"
            << "  samples " << m.samples << " (known " << m.known_samples << ", unknown "
            << m.unknown_samples << ")\n"
            << "  accuracy " << m.accuracy << "  acc_known " << m.acc_known << "  acc_unknown "
            << m.acc_unknown << "  h_score " << m.h_score << "\n"
            << "  primary " << r.primary() << "\n";
}

int cmd_pretrain(const CommonOptions& common, const std::vector<std::string>& scenarios,
                 std::uint64_t seed, std::size_t repeats, const std::string& checkpoint_dir) {
  const Settings s = load_settings(common);
  fs::create_directories(checkpoint_dir);
  for (ShiftKind kind : parse_scenarios(scenarios, s.grid.scenarios)) {
    for (std::size_t r = 0; r < repeats; ++r) {
      const ScenarioInstance inst = build_scenario(kind, seed + r, s.experiment);
      const ModelState model = pretrain_model(inst, s.experiment);
      const auto path = checkpoint_path(checkpoint_dir, kind, seed + r);
      save_checkpoint(path, model);
      const auto baseline = evaluate_source_only(model, inst.data.target, s.experiment.run);
      std::cout << "wrote " << path.string() << "  (source-only known acc " << baseline.acc_known
                << ", primary " << primary_metric(baseline, kind) << ")\n";
    }
  }
  return 0;
}

ModelProvider make_provider(const Settings& s, const std::string& checkpoint_dir, bool pretrain) {
  if (pretrain) return pretraining_provider(s.experiment);
  return checkpoint_provider(checkpoint_dir);
}

int cmd_run(const CommonOptions& common, const std::string& scenario, const std::string& loss,
            double quality, double quantity, std::uint64_t seed, const std::string& out_dir,
            const std::string& checkpoint_dir, bool pretrain, const std::string& target_file,
            const std::string& dump_path) {
  Settings s = load_settings(common);
  const ShiftKind kind = parse_shift_kind(scenario);
  ScenarioInstance inst = build_scenario(kind, seed, s.experiment);
  const ModelState model = make_provider(s, checkpoint_dir, pretrain)(inst);
  if (!target_file.empty()) {
    inst.data.target =
        load_feature_file(target_file, model.config.num_known_classes, model.config.input_dim);
  }

  std::ofstream dump;
  if (!dump_path.empty()) {
    dump.open(dump_path);
    if (!dump) throw Error("cannot open " + dump_path + " for writing");
    s.experiment.run.pseudo_label_dump = &dump;
  }
  const RunRecord rec = run_cell(inst, model, parse_loss_kind(loss), quality, quantity, s.experiment);
  const auto baseline = evaluate_source_only(model, inst.data.target, s.experiment.run);
  print_metrics(rec);
  std::cout << "  source-only primary " << primary_metric(baseline, kind) << "\n";

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    const auto path = run_record_path(out_dir, rec);
    std::ofstream out(path);
    out << run_record_json(rec);
    std::cout << "wrote " << path.string() << "\n";
  }
  return 0;
}

void print_reports(const GridResults& results) {
  for (ShiftKind kind : results.spec.scenarios) {
    for (LossKind loss : results.spec.losses) {
      write_heatmap_ansi(std::cout, grid_matrix(results, kind, loss));
      std::cout << "\n";
    }
  }
}

void print_trends(const GridResults& results) {
  const TrendSummary t = summarize_trends(results);
  auto show = [](const TrendCheck& c) {
    std::cout << (c.pass ? "  ok   " : "  MISS ") << c.name << ": " << c.detail << "\n";
  };
  std::cout << "trend checks\n";
  for (const auto& c : t.q1) show(c);
  for (const auto& c : t.q3) show(c);
  show(t.q4);
  for (const auto& c : t.monotonicity) show(c);
}

int cmd_grid(const CommonOptions& common, const std::vector<std::string>& scenarios,
             const std::vector<std::string>& losses, std::optional<std::size_t> repeats,
             std::optional<std::uint64_t> seed, std::optional<double> quality,
             std::optional<double> quantity, bool include_zero, int threads,
             const std::string& out_dir, const std::string& checkpoint_dir, bool pretrain) {
  const Settings s = load_settings(common);
  GridSpec spec = s.grid;
  spec.scenarios = parse_scenarios(scenarios, spec.scenarios);
  spec.losses = parse_losses(losses, spec.losses);
  if (repeats) spec.repeats = *repeats;
  if (seed) spec.base_seed = *seed;
  if (quality) spec.qualities = {*quality};
  if (quantity) spec.quantities = {*quantity};
  if (include_zero && std::find(spec.quantities.begin(), spec.quantities.end(), 0.0) ==
                          spec.quantities.end()) {
    spec.quantities.insert(spec.quantities.begin(), 0.0);
  }

  const auto start = std::chrono::steady_clock::now();
  const GridResults results =
      run_grid(spec, s.experiment, make_provider(s, checkpoint_dir, pretrain), threads);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  fs::create_directories(out_dir);
  const std::size_t records = save_grid_records(results, out_dir);
  const auto reports = emit_reports(results, out_dir).size();
  print_reports(results);
  if (supports_trends(spec)) print_trends(results);
  std::cout << results.runs.size() << " runs in " << seconds << " s; wrote " << records
            << " record files and " << reports << " report files to " << out_dir << "\n";
  return 0;
}

int cmd_report(const std::string& results_path, const std::string& out_dir) {
  const GridResults results = load_grid_results(results_path);
  const std::string dir = out_dir.empty() ? fs::path(results_path).parent_path().string() : out_dir;
  const auto reports = emit_reports(results, dir.empty() ? "." : dir).size();
  print_reports(results);
  if (supports_trends(results.spec)) print_trends(results);
  std::cout << "wrote " << reports << " report files\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pseudo-labeling simulation benchmark for online source-free universal domain adaptation"};
  app.require_subcommand(1);

  CommonOptions common;
  std::vector<std::string> scenarios;
  std::vector<std::string> losses;
  std::string scenario = "OPDA";
  std::string loss = "contrastive";
  double quality_v = 100.0;
  double quantity_v = 100.0;
  std::uint64_t seed_v = 0;
  std::size_t repeats_v = 3;
  std::string out_dir = "results";
  std::string checkpoint_dir = "checkpoints";
  bool pretrain = false;
  bool include_zero = false;
  int threads = 1;
  std::string target_file;
  std::string dump_path;
  std::string results_path;

  auto* pre = app.add_subcommand("pretrain", "Train source models and save checkpoints");
  add_common(pre, common);
  pre->add_option("--scenario", scenarios, "PDA, ODA, OPDA (repeatable; default all)");
  pre->add_option("--seed", seed_v, "First seed")->capture_default_str();
  pre->add_option("--repeats", repeats_v, "Seeds seed .. seed+repeats-1")->capture_default_str();
  pre->add_option("--checkpoint-dir", checkpoint_dir, "Output directory")->capture_default_str();

  auto* run = app.add_subcommand("run", "Adapt one grid cell for one seed");
  add_common(run, common);
  run->add_option("--scenario", scenario, "PDA, ODA or OPDA")->capture_default_str();
  run->add_option("--loss", loss, "contrastive or cross_entropy")->capture_default_str();
  run->add_option("--quality", quality_v, "Pseudo-label quality in percent")
      ->check(CLI::Range(0.0, 100.0))->capture_default_str();
  run->add_option("--quantity", quantity_v, "Pseudo-label quantity in percent")
      ->check(CLI::Range(0.0, 100.0))->capture_default_str();
  run->add_option("--seed", seed_v, "Scenario seed")->capture_default_str();
  run->add_option("--out-dir", out_dir, "Where to write the run record")->capture_default_str();
  run->add_option("--checkpoint-dir", checkpoint_dir, "Pretrained checkpoints")->capture_default_str();
  run->add_flag("--pretrain", pretrain, "Pretrain in memory instead of loading a checkpoint");
  run->add_option("--target-file", target_file, "Replace the synthetic target stream with a feature file")
      ->check(CLI::ExistingFile);
  run->add_option("--dump-pseudo-labels", dump_path, "CSV dump of every pseudo-label assignment");

  std::optional<std::size_t> grid_repeats;
  std::optional<std::uint64_t> grid_seed;
  std::optional<double> grid_quality;
  std::optional<double> grid_quantity;
  auto* grid = app.add_subcommand("grid", "Sweep quality x quantity over scenarios, losses and seeds");
  add_common(grid, common);
  grid->add_option("--scenario", scenarios, "Scenarios to sweep (repeatable; default all)");
  grid->add_option("--loss", losses, "Losses to sweep (repeatable; default both)");
  grid->add_option("--quality", grid_quality, "Restrict to one quality value")->check(CLI::Range(0.0, 100.0));
  grid->add_option("--quantity", grid_quantity, "Restrict to one quantity value")->check(CLI::Range(0.0, 100.0));
  grid->add_option("--repeats", grid_repeats, "Seeds per cell (default 3)");
  grid->add_option("--seed", grid_seed, "Base seed (default 0)");
  grid->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  grid->add_option("--out-dir", out_dir, "Output directory")->capture_default_str();
  grid->add_option("--checkpoint-dir", checkpoint_dir, "Pretrained checkpoints")->capture_default_str();
  grid->add_flag("--pretrain", pretrain, "Pretrain in memory instead of loading checkpoints");
  grid->add_flag("--include-zero-quantity", include_zero, "Add a quantity-0 row");

  auto* rep = app.add_subcommand("report", "Render CSV, heatmaps and trend checks from results.json");
  rep->add_option("results", results_path, "results.json written by `grid`")->required()->check(CLI::ExistingFile);
  rep->add_option("--out-dir", out_dir, "Output directory (default: next to results.json)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (pre->parsed()) return cmd_pretrain(common, scenarios, seed_v, repeats_v, checkpoint_dir);
    if (run->parsed()) {
      return cmd_run(common, scenario, loss, quality_v, quantity_v, seed_v, out_dir, checkpoint_dir,
                     pretrain, target_file, dump_path);
    }
    if (grid->parsed()) {
      return cmd_grid(common, scenarios, losses, grid_repeats, grid_seed, grid_quality, grid_quantity,
                      include_zero, threads, out_dir, checkpoint_dir, pretrain);
    }
    if (rep->parsed()) return cmd_report(results_path, rep->count("--out-dir") ? out_dir : "");
  } catch (const std::exception& e) {
    std::cerr << "plbench: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
