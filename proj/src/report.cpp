#include "plbench/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace plbench {

namespace {

// Differences within this many points of a band edge count as on the edge.
constexpr double kBoundaryTolerance = 1e-9;

std::string fmt_pct(double fraction, int decimals = 1) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(decimals) << 100.0 * fraction;
  return os.str();
}

std::string fmt_num(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

std::string slice_name(ShiftKind kind, LossKind loss) {
  return std::string(to_string(kind)) + "_" + std::string(to_string(loss));
}

}  // namespace

Band band_for(double value, double baseline) {
  const double diff = 100.0 * (value - baseline);
  if (diff < -kBoundaryTolerance) return Band::below;
  const double steps = std::floor((diff + kBoundaryTolerance) / 10.0);
  const int idx = static_cast<int>(std::min(steps, 4.0));
  return static_cast<Band>(idx + 1);
}

std::string_view band_color(Band band) {
  switch (band) {
    case Band::below: return "#d73027";
    case Band::plus0: return "#edf8e9";
    case Band::plus10: return "#bae4b3";
    case Band::plus20: return "#74c476";
    case Band::plus30: return "#31a354";
    case Band::plus40: return "#006d2c";
  }
  return "#ffffff";
}

std::string_view band_label(Band band) {
  switch (band) {
    case Band::below: return "below baseline";
    case Band::plus0: return "+0 to +10";
    case Band::plus10: return "+10 to +20";
    case Band::plus20: return "+20 to +30";
    case Band::plus30: return "+30 to +40";
    case Band::plus40: return "+40 and above";
  }
  return "?";
}

double GridMatrix::at(double quality, double quantity) const {
  const auto qi = std::find(qualities.begin(), qualities.end(), quality);
  const auto ni = std::find(quantities.begin(), quantities.end(), quantity);
  if (qi == qualities.end() || ni == quantities.end()) {
    throw ReportError("grid has no cell at quality " + fmt_num(quality) + ", quantity " +
                      fmt_num(quantity));
  }
  return means[static_cast<std::size_t>(ni - quantities.begin())]
              [static_cast<std::size_t>(qi - qualities.begin())];
}

GridMatrix grid_matrix(const GridResults& results, ShiftKind kind, LossKind loss) {
  GridMatrix m;
  m.scenario = kind;
  m.loss = loss;
  m.qualities = results.spec.qualities;
  m.quantities = results.spec.quantities;
  m.baseline = results.baseline(kind).mean;
  m.means.assign(m.quantities.size(), std::vector<double>(m.qualities.size(), 0.0));

  std::vector<std::vector<char>> seen(m.quantities.size(),
                                      std::vector<char>(m.qualities.size(), 0));
  for (const auto& c : results.cells) {
    if (c.scenario != kind || c.loss != loss) continue;
    const auto qi = std::find(m.qualities.begin(), m.qualities.end(), c.quality);
    const auto ni = std::find(m.quantities.begin(), m.quantities.end(), c.quantity);
    if (qi == m.qualities.end() || ni == m.quantities.end()) continue;
    const auto r = static_cast<std::size_t>(ni - m.quantities.begin());
    const auto col = static_cast<std::size_t>(qi - m.qualities.begin());
    m.means[r][col] = c.mean;
    seen[r][col] = 1;
  }

  std::string missing;
  for (std::size_t r = 0; r < m.quantities.size(); ++r) {
    for (std::size_t col = 0; col < m.qualities.size(); ++col) {
      if (seen[r][col]) continue;
      missing += " (quality " + fmt_num(m.qualities[col]) + ", quantity " +
                 fmt_num(m.quantities[r]) + ")";
    }
  }
  if (!missing.empty()) {
    throw ReportError("grid " + slice_name(kind, loss) + " is missing cells:" + missing);
  }
  return m;
}

void write_grid_csv(std::ostream& out, const GridMatrix& m) {
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << "quantity\\quality";
  for (double q : m.qualities) out << ',' << q;
  out << '\n';
  for (std::size_t r = 0; r < m.quantities.size(); ++r) {
    out << m.quantities[r];
    for (double v : m.means[r]) out << ',' << v;
    out << '\n';
  }
}

GridMatrix read_grid_csv(std::istream& in, std::string_view source_name) {
  const std::string src(source_name);
  auto split = [](const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
  };
  auto number = [&](const std::string& text, std::size_t line_no) {
    try {
      std::size_t used = 0;
      const double v = std::stod(text, &used);
      if (used != text.size()) throw std::invalid_argument(text);
      return v;
    } catch (const std::exception&) {
      throw ParseError(src, line_no, "not a number: '" + text + "'");
    }
  };

  GridMatrix m;
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError(src, 1, "missing header row");
  ++line_no;
  const auto header = split(line);
  if (header.size() < 2) throw ParseError(src, line_no, "header needs at least one quality column");
  for (std::size_t i = 1; i < header.size(); ++i) m.qualities.push_back(number(header[i], line_no));

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split(line);
    if (fields.size() != header.size()) {
      throw ParseError(src, line_no, "expected " + std::to_string(header.size()) + " fields, got " +
                                         std::to_string(fields.size()));
    }
    m.quantities.push_back(number(fields[0], line_no));
    std::vector<double> row;
    for (std::size_t i = 1; i < fields.size(); ++i) row.push_back(number(fields[i], line_no));
    m.means.push_back(std::move(row));
  }
  return m;
}

void write_heatmap_svg(std::ostream& out, const GridMatrix& m) {
  constexpr int cell_w = 56;
  constexpr int cell_h = 28;
  constexpr int left = 90;
  constexpr int top = 70;
  const int cols = static_cast<int>(m.qualities.size());
  const int rows = static_cast<int>(m.quantities.size());
  const int width = left + cols * cell_w + 20;
  const int legend_top = top + rows * cell_h + 40;
  const int height = legend_top + 6 * 22 + 20;

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << left << "\" y=\"22\" font-size=\"15\" font-weight=\"bold\">"
      << to_string(m.scenario) << " / " << to_string(m.loss) << " (source-only "
      << fmt_pct(m.baseline) << "%)</text>\n";
  out << "<text x=\"" << left + cols * cell_w / 2 << "\" y=\"44\" text-anchor=\"middle\">"
      << "pseudo-label quality (%)</text>\n";
  out << "<text x=\"16\" y=\"" << top + rows * cell_h / 2 << "\" transform=\"rotate(-90 16 "
      << top + rows * cell_h / 2 << ")\" text-anchor=\"middle\">pseudo-label quantity (%)</text>\n";

  for (int c = 0; c < cols; ++c) {
    out << "<text x=\"" << left + c * cell_w + cell_w / 2 << "\" y=\"" << top - 8
        << "\" text-anchor=\"middle\">" << fmt_num(m.qualities[static_cast<std::size_t>(c)])
        << "</text>\n";
  }
  for (int r = 0; r < rows; ++r) {
    const auto ru = static_cast<std::size_t>(r);
    const int y = top + r * cell_h;
    out << "<text x=\"" << left - 8 << "\" y=\"" << y + cell_h / 2 + 4
        << "\" text-anchor=\"end\">" << fmt_num(m.quantities[ru]) << "</text>\n";
    for (int c = 0; c < cols; ++c) {
      const double v = m.means[ru][static_cast<std::size_t>(c)];
      const Band band = band_for(v, m.baseline);
      const bool dark = band == Band::below || band == Band::plus30 || band == Band::plus40;
      const int x = left + c * cell_w;
      out << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell_w << "\" height=\""
          << cell_h << "\" fill=\"" << band_color(band) << "\" stroke=\"white\"/>\n";
      out << "<text x=\"" << x + cell_w / 2 << "\" y=\"" << y + cell_h / 2 + 4
          << "\" text-anchor=\"middle\" fill=\"" << (dark ? "white" : "black") << "\">"
          << fmt_pct(v) << "</text>\n";
    }
  }

  for (int b = 0; b < 6; ++b) {
    const Band band = static_cast<Band>(b);
    const int y = legend_top + b * 22;
    out << "<rect x=\"" << left << "\" y=\"" << y << "\" width=\"16\" height=\"16\" fill=\""
        << band_color(band) << "\"/>\n";
    out << "<text x=\"" << left + 24 << "\" y=\"" << y + 12 << "\">" << band_label(band)
        << "</text>\n";
  }
  out << "</svg>\n";
}

namespace {

std::string ansi_background(std::string_view hex) {
  const auto channel = [&](std::size_t pos) {
    return std::stoi(std::string(hex.substr(pos, 2)), nullptr, 16);
  };
  return "\x1b[48;2;" + std::to_string(channel(1)) + ";" + std::to_string(channel(3)) + ";" +
         std::to_string(channel(5)) + "m";
}

}  // namespace

void write_heatmap_ansi(std::ostream& out, const GridMatrix& m) {
  out << to_string(m.scenario) << " / " << to_string(m.loss) << "  source-only "
      << fmt_pct(m.baseline) << "%  (rows: quantity, columns: quality)\n";
  out << std::setw(6) << "";
  for (double q : m.qualities) out << std::setw(7) << fmt_num(q);
  out << '\n';
  for (std::size_t r = 0; r < m.quantities.size(); ++r) {
    out << std::setw(6) << fmt_num(m.quantities[r]);
    for (double v : m.means[r]) {
      const Band band = band_for(v, m.baseline);
      const bool dark = band == Band::below || band == Band::plus30 || band == Band::plus40;
      out << ansi_background(band_color(band)) << (dark ? "\x1b[97m" : "\x1b[30m")
          << std::setw(7) << fmt_pct(v) << "\x1b[0m";
    }
    out << '\n';
  }
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw ShapeError("spearman: inputs differ in length");
  const std::size_t n = x.size();
  auto ranks = [n](const std::vector<double>& v) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n;) {
      std::size_t j = i;
      while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
      const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto rx = ranks(x);
  const auto ry = ranks(y);
  const double mx = mean_of(rx);
  const double my = mean_of(ry);
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

bool TrendSummary::q1_pass() const {
  return std::all_of(q1.begin(), q1.end(), [](const TrendCheck& c) { return c.pass; });
}

bool TrendSummary::q3_pass() const {
  return std::all_of(q3.begin(), q3.end(), [](const TrendCheck& c) { return c.pass; });
}

bool TrendSummary::monotonicity_pass() const {
  return std::all_of(monotonicity.begin(), monotonicity.end(),
                     [](const TrendCheck& c) { return c.pass; });
}

TrendSummary summarize_trends(const GridResults& results) {
  const auto& spec = results.spec;
  TrendSummary out;
  auto mean_at = [&](ShiftKind kind, LossKind loss, double quality, double quantity) {
    try {
      return results.cell(kind, loss, quality, quantity).mean;
    } catch (const InvalidInput& e) {
      throw ReportError(std::string("trend checks need a missing cell: ") + e.what());
    }
  };
  auto points = [](double fraction) { return fmt_pct(fraction, 2); };

  for (ShiftKind kind : spec.scenarios) {
    const double base = results.baseline(kind).mean;
    for (LossKind loss : spec.losses) {
      const double top = mean_at(kind, loss, 100, 100);
      const double gain = 100.0 * (top - base);
      out.q1.push_back({"Q1 " + slice_name(kind, loss), gain >= kQ1MinGainPoints,
                        "(100,100) " + points(top) + " vs baseline " + points(base) + ", gain " +
                            fmt_pct(gain / 100.0, 2) + " points"});
    }
  }

  const bool both_losses =
      std::count(spec.losses.begin(), spec.losses.end(), LossKind::contrastive) > 0 &&
      std::count(spec.losses.begin(), spec.losses.end(), LossKind::cross_entropy) > 0;
  if (both_losses) {
    for (ShiftKind kind : spec.scenarios) {
      const double ce = mean_at(kind, LossKind::cross_entropy, 100, 100);
      const double con = mean_at(kind, LossKind::contrastive, 100, 100);
      out.q3.push_back({"Q3 " + std::string(to_string(kind)) + " (100,100) ce >= con - 2",
                        100.0 * (ce - con) >= -kQ3TolerancePoints,
                        "ce " + points(ce) + ", con " + points(con)});
      if (kind == ShiftKind::PDA) continue;
      for (double quality : spec.qualities) {
        if (quality > kQ3LowQualityMax) continue;
        const double ce_low = mean_at(kind, LossKind::cross_entropy, quality, 100);
        const double con_low = mean_at(kind, LossKind::contrastive, quality, 100);
        out.q3.push_back({"Q3 " + std::string(to_string(kind)) + " (" + fmt_num(quality) +
                              ",100) con >= ce - 2",
                          100.0 * (con_low - ce_low) >= -kQ3TolerancePoints,
                          "con " + points(con_low) + ", ce " + points(ce_low)});
      }
    }
  }

  double quality_drop = 0.0;
  double quantity_drop = 0.0;
  std::size_t slices = 0;
  for (ShiftKind kind : spec.scenarios) {
    for (LossKind loss : spec.losses) {
      const double top = mean_at(kind, loss, 100, 100);
      quality_drop += top - mean_at(kind, loss, 50, 100);
      quantity_drop += top - mean_at(kind, loss, 100, 50);
      ++slices;
    }
  }
  quality_drop /= static_cast<double>(slices);
  quantity_drop /= static_cast<double>(slices);
  out.q4 = {"Q4 quality drop > quantity drop", quality_drop > quantity_drop,
            "drop to (50,100) " + points(quality_drop) + " points, drop to (100,50) " +
                points(quantity_drop) + " points"};

  for (ShiftKind kind : spec.scenarios) {
    for (LossKind loss : spec.losses) {
      std::vector<double> row;
      for (double quality : spec.qualities) row.push_back(mean_at(kind, loss, quality, 100));
      const double rho = spearman(spec.qualities, row);
      std::ostringstream detail;
      detail << "spearman " << std::fixed << std::setprecision(3) << rho;
      out.monotonicity.push_back(
          {"monotonicity " + slice_name(kind, loss), rho >= kMinSpearman, detail.str()});
    }
  }
  return out;
}

std::string trend_summary_json(const TrendSummary& summary) {
  auto checks = [](const std::vector<TrendCheck>& list) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& c : list) arr.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
    return arr;
  };
  nlohmann::json j;
  j["q1_upper_bound"] = {{"pass", summary.q1_pass()}, {"checks", checks(summary.q1)}};
  j["q3_loss_comparison"] = {{"pass", summary.q3_pass()}, {"checks", checks(summary.q3)}};
  j["q4_quality_vs_quantity"] = {
      {"pass", summary.q4.pass}, {"checks", checks({summary.q4})}};
  j["monotonicity"] = {{"pass", summary.monotonicity_pass()},
                       {"checks", checks(summary.monotonicity)}};
  return j.dump(2) + "\n";
}

bool supports_trends(const GridSpec& spec) {
  auto has = [](const std::vector<double>& v, double x) {
    return std::find(v.begin(), v.end(), x) != v.end();
  };
  return has(spec.qualities, 100) && has(spec.qualities, 50) && has(spec.quantities, 100) &&
         has(spec.quantities, 50);
}

std::vector<std::filesystem::path> emit_reports(const GridResults& results,
                                                const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  auto open = [&](const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    written.push_back(path);
    return out;
  };
  for (ShiftKind kind : results.spec.scenarios) {
    for (LossKind loss : results.spec.losses) {
      const GridMatrix m = grid_matrix(results, kind, loss);
      {
        auto out = open(dir / ("grid_" + slice_name(kind, loss) + ".csv"));
        write_grid_csv(out, m);
      }
      {
        auto out = open(dir / ("heatmap_" + slice_name(kind, loss) + ".svg"));
        write_heatmap_svg(out, m);
      }
    }
  }
  if (supports_trends(results.spec)) {
    auto out = open(dir / "trends.json");
    out << trend_summary_json(summarize_trends(results));
  }
  return written;
}

}  // namespace plbench
