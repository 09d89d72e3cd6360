#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "plbench/error.hpp"
#include "plbench/experiment.hpp"

namespace plbench {

/// Color band of a cell relative to the source-only baseline. Differences are in
/// percentage points: below baseline is red, then one band per 10 points with each
/// boundary assigned to the upper band, saturating at +40.
enum class Band { below, plus0, plus10, plus20, plus30, plus40 };

/// `value` and `baseline` are fractions in [0, 1].
Band band_for(double value, double baseline);
std::string_view band_color(Band band);
std::string_view band_label(Band band);

/// Rectangular (quantity x quality) view of one (scenario, loss) slice of a grid.
struct GridMatrix {
  ShiftKind scenario = ShiftKind::OPDA;
  LossKind loss = LossKind::contrastive;
  std::vector<double> qualities;
  std::vector<double> quantities;
  std::vector<std::vector<double>> means;  ///< [quantity][quality], fractions
  double baseline = 0.0;

  double at(double quality, double quantity) const;
};

/// Throws ReportError listing every missing cell when the slice is not rectangular
/// over the grid's axes.
GridMatrix grid_matrix(const GridResults& results, ShiftKind kind, LossKind loss);

/// Header row "quantity\quality,<q1>,<q2>,..."; then one row per quantity, first
/// column the quantity. Values are fractions written with 17 significant digits.
void write_grid_csv(std::ostream& out, const GridMatrix& m);
/// Inverse of write_grid_csv (scenario, loss and baseline are left default).
GridMatrix read_grid_csv(std::istream& in, std::string_view source_name = "<stream>");

void write_heatmap_svg(std::ostream& out, const GridMatrix& m);
void write_heatmap_ansi(std::ostream& out, const GridMatrix& m);

struct TrendCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};

/// Qualitative trend checks over a full grid: upper bound (Q1), loss comparison (Q3),
/// quality vs quantity (Q4) and monotonicity along the quantity-100 row.
struct TrendSummary {
  std::vector<TrendCheck> q1;
  std::vector<TrendCheck> q3;
  TrendCheck q4;
  std::vector<TrendCheck> monotonicity;

  bool q1_pass() const;
  bool q3_pass() const;
  bool monotonicity_pass() const;
};

inline constexpr double kQ1MinGainPoints = 10.0;
inline constexpr double kQ3TolerancePoints = 2.0;
inline constexpr double kQ3LowQualityMax = 40.0;
inline constexpr double kMinSpearman = 0.8;

/// Needs cells (100,100), (50,100), (100,50) and the quantity-100 row for every
/// scenario and loss in the spec; missing cells throw ReportError.
TrendSummary summarize_trends(const GridResults& results);
std::string trend_summary_json(const TrendSummary& summary);

/// Spearman rank correlation with average ranks for ties; 0 when either side is
/// constant.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

/// True when the grid's axes hold every cell the trend checks read.
bool supports_trends(const GridSpec& spec);

/// Writes grid_<S>_<loss>.csv and heatmap_<S>_<loss>.svg per slice, plus
/// trends.json when supports_trends, into `dir` (created if needed). Returns the
/// files written.
std::vector<std::filesystem::path> emit_reports(const GridResults& results,
                                                const std::filesystem::path& dir);

}  // namespace plbench
