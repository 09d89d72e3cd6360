#include "plbench/records.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "plbench/error.hpp"

namespace plbench {

using nlohmann::json;

namespace {

json metrics_to_json(const StreamMetrics& m) {
  json per_class = json::array();
  for (const auto& t : m.per_class) per_class.push_back({{"total", t.total}, {"correct", t.correct}});
  json batches = json::array();
  for (const auto& b : m.batches) {
    batches.push_back({{"size", b.size},
                       {"selected", b.selected},
                       {"correct", b.correct},
                       {"unknown_labeled", b.unknown_labeled}});
  }
  return {{"samples", m.samples},
          {"known_samples", m.known_samples},
          {"unknown_samples", m.unknown_samples},
          {"accuracy", m.accuracy},
          {"acc_known", m.acc_known},
          {"acc_unknown", m.acc_unknown},
          {"h_score", m.h_score},
          {"per_class", per_class},
          {"batches", batches}};
}

StreamMetrics metrics_from_json(const json& j) {
  StreamMetrics m;
  m.samples = j.at("samples").get<std::size_t>();
  m.known_samples = j.at("known_samples").get<std::size_t>();
  m.unknown_samples = j.at("unknown_samples").get<std::size_t>();
  m.accuracy = j.at("accuracy").get<double>();
  m.acc_known = j.at("acc_known").get<double>();
  m.acc_unknown = j.at("acc_unknown").get<double>();
  m.h_score = j.at("h_score").get<double>();
  for (const auto& t : j.at("per_class")) {
    m.per_class.push_back({t.at("total").get<std::size_t>(), t.at("correct").get<std::size_t>()});
  }
  for (const auto& b : j.at("batches")) {
    m.batches.push_back({b.at("size").get<std::size_t>(), b.at("selected").get<std::size_t>(),
                         b.at("correct").get<std::size_t>(),
                         b.at("unknown_labeled").get<std::size_t>()});
  }
  return m;
}

json record_to_json(const RunRecord& r) {
  return {{"scenario", to_string(r.scenario)},
          {"loss", to_string(r.loss)},
          {"quality", r.quality},
          {"quantity", r.quantity},
          {"seed", r.seed},
          {"primary_metric", r.primary()},
          {"metrics", metrics_to_json(r.metrics)}};
}

RunRecord record_from_json(const json& j) {
  RunRecord r;
  r.scenario = parse_shift_kind(j.at("scenario").get<std::string>());
  r.loss = parse_loss_kind(j.at("loss").get<std::string>());
  r.quality = j.at("quality").get<double>();
  r.quantity = j.at("quantity").get<double>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.metrics = metrics_from_json(j.at("metrics"));
  return r;
}

json parse_document(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(what, 0, e.what());
  }
}

template <class F>
auto guarded(const char* what, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw ParseError(what, 0, e.what());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << text;
}

std::string percent_tag(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

std::string run_record_json(const RunRecord& record) { return record_to_json(record).dump(2) + "\n"; }

RunRecord parse_run_record(const std::string& text) {
  const json j = parse_document(text, "run record");
  return guarded("run record", [&] { return record_from_json(j); });
}

std::string grid_results_json(const GridResults& results) {
  const auto& s = results.spec;
  json spec = {{"qualities", s.qualities},
               {"quantities", s.quantities},
               {"repeats", s.repeats},
               {"base_seed", s.base_seed}};
  spec["scenarios"] = json::array();
  for (ShiftKind k : s.scenarios) spec["scenarios"].push_back(to_string(k));
  spec["losses"] = json::array();
  for (LossKind l : s.losses) spec["losses"].push_back(to_string(l));

  json baselines = json::array();
  for (const auto& b : results.baselines) {
    json metrics = json::array();
    for (const auto& m : b.metrics) metrics.push_back(metrics_to_json(m));
    baselines.push_back({{"scenario", to_string(b.scenario)},
                         {"seeds", b.seeds},
                         {"per_seed", b.per_seed},
                         {"mean", b.mean},
                         {"metrics", metrics}});
  }
  json cells = json::array();
  for (const auto& c : results.cells) {
    cells.push_back({{"scenario", to_string(c.scenario)},
                     {"loss", to_string(c.loss)},
                     {"quality", c.quality},
                     {"quantity", c.quantity},
                     {"seeds", c.seeds},
                     {"per_seed", c.per_seed},
                     {"mean", c.mean}});
  }
  json runs = json::array();
  for (const auto& r : results.runs) runs.push_back(record_to_json(r));
  return json{{"spec", spec}, {"baselines", baselines}, {"cells", cells}, {"runs", runs}}.dump(1) +
         "\n";
}

GridResults parse_grid_results(const std::string& text) {
  const json j = parse_document(text, "grid results");
  return guarded("grid results", [&] {
    GridResults out;
    const json& s = j.at("spec");
    out.spec.qualities = s.at("qualities").get<std::vector<double>>();
    out.spec.quantities = s.at("quantities").get<std::vector<double>>();
    out.spec.repeats = s.at("repeats").get<std::size_t>();
    out.spec.base_seed = s.at("base_seed").get<std::uint64_t>();
    out.spec.scenarios.clear();
    for (const auto& k : s.at("scenarios")) out.spec.scenarios.push_back(parse_shift_kind(k.get<std::string>()));
    out.spec.losses.clear();
    for (const auto& l : s.at("losses")) out.spec.losses.push_back(parse_loss_kind(l.get<std::string>()));

    for (const auto& b : j.at("baselines")) {
      BaselineResult br;
      br.scenario = parse_shift_kind(b.at("scenario").get<std::string>());
      br.seeds = b.at("seeds").get<std::vector<std::uint64_t>>();
      br.per_seed = b.at("per_seed").get<std::vector<double>>();
      br.mean = b.at("mean").get<double>();
      for (const auto& m : b.at("metrics")) br.metrics.push_back(metrics_from_json(m));
      out.baselines.push_back(std::move(br));
    }
    for (const auto& c : j.at("cells")) {
      GridCellResult cr;
      cr.scenario = parse_shift_kind(c.at("scenario").get<std::string>());
      cr.loss = parse_loss_kind(c.at("loss").get<std::string>());
      cr.quality = c.at("quality").get<double>();
      cr.quantity = c.at("quantity").get<double>();
      cr.seeds = c.at("seeds").get<std::vector<std::uint64_t>>();
      cr.per_seed = c.at("per_seed").get<std::vector<double>>();
      cr.mean = c.at("mean").get<double>();
      out.cells.push_back(std::move(cr));
    }
    for (const auto& r : j.at("runs")) out.runs.push_back(record_from_json(r));
    return out;
  });
}

std::filesystem::path run_record_path(const std::filesystem::path& dir, const RunRecord& r) {
  return dir / (std::string(to_string(r.scenario)) + "_" + std::string(to_string(r.loss)) + "_q" +
                percent_tag(r.quality) + "_n" + percent_tag(r.quantity) + "_seed" +
                std::to_string(r.seed) + ".json");
}

std::size_t save_grid_records(const GridResults& results, const std::filesystem::path& dir) {
  const auto runs_dir = dir / "runs";
  std::filesystem::create_directories(runs_dir);
  for (const auto& r : results.runs) write_file(run_record_path(runs_dir, r), run_record_json(r));
  write_file(dir / "results.json", grid_results_json(results));
  return results.runs.size() + 1;
}

GridResults load_grid_results(const std::filesystem::path& path) {
  return parse_grid_results(read_file(path));
}

}  // namespace plbench
