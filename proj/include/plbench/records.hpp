#pragma once

#include <filesystem>
#include <string>

#include "plbench/experiment.hpp"

// JSON documents for run records and grid results. Doubles are written in
// shortest round-trip form, so reading a document back gives bit-identical values.

namespace plbench {

std::string run_record_json(const RunRecord& record);
RunRecord parse_run_record(const std::string& text);

std::string grid_results_json(const GridResults& results);
GridResults parse_grid_results(const std::string& text);

/// Writes runs/<S>_<loss>_q<quality>_n<quantity>_seed<N>.json for every run and
/// results.json with cells and baselines. Returns the number of files written.
std::size_t save_grid_records(const GridResults& results, const std::filesystem::path& dir);
GridResults load_grid_results(const std::filesystem::path& path);

std::filesystem::path run_record_path(const std::filesystem::path& dir, const RunRecord& record);

}  // namespace plbench
