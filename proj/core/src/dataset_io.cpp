#include "wildflow/dataset_io.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "csv.hpp"
#include "wildflow/errors.hpp"

namespace wildflow {

namespace fs = std::filesystem;

DatasetPaths DatasetPaths::in_directory(const fs::path& dir) {
  DatasetPaths p{dir / "cells.csv", dir / "dynamics.csv", dir / "visits.csv", std::nullopt};
  if (fs::exists(dir / "ground_truth.csv")) p.ground_truth = dir / "ground_truth.csv";
  return p;
}

namespace {

struct CellRow {
  long id, row, col;
  std::size_t line;
  std::vector<double> features;
};

int checked_cell(const csv::Reader& r, std::size_t column, int n) {
  const long id = r.integer(column);
  if (id < 0 || id >= n) r.fail(column, "unknown cell_id " + std::to_string(id));
  return static_cast<int>(id);
}

YearMonth read_year_month(const csv::Reader& r, std::size_t year_col) {
  const long y = r.integer(year_col);
  const long m = r.integer(year_col + 1);
  if (m < 1 || m > 12) r.fail(year_col + 1, "month must be in 1..12");
  return {static_cast<int>(y), static_cast<int>(m)};
}

int checked_month(const csv::Reader& r, std::size_t year_col, const std::vector<YearMonth>& months) {
  const YearMonth ym = read_year_month(r, year_col);
  const auto it = std::lower_bound(months.begin(), months.end(), ym);
  if (it == months.end() || *it != ym) {
    r.fail(year_col, "unknown month " + std::to_string(ym.year) + "-" + std::to_string(ym.month));
  }
  return static_cast<int>(it - months.begin());
}

std::string ym_text(const YearMonth& ym) { return std::to_string(ym.year) + "-" + std::to_string(ym.month); }

}  // namespace

ParkDataset load_dataset(const fs::path& dir) { return load_dataset(DatasetPaths::in_directory(dir)); }

ParkDataset load_dataset(const DatasetPaths& paths) {
  // cells.csv
  csv::Reader cells(paths.cells);
  const std::vector<std::string> static_names = cells.header({"cell_id", "row", "col"});
  std::vector<CellRow> cell_rows;
  long max_row = -1, max_col = -1;
  while (cells.next()) {
    cells.require_width(3 + static_names.size());
    CellRow c{cells.integer(0), cells.integer(1), cells.integer(2), cells.line(), {}};
    if (c.row < 0) cells.fail(1, "row must be >= 0");
    if (c.col < 0) cells.fail(2, "col must be >= 0");
    for (std::size_t j = 0; j < static_names.size(); ++j) {
      const double v = cells.real(3 + j);
      if (!std::isfinite(v)) cells.fail(3 + j, "non-finite feature");
      c.features.push_back(v);
    }
    max_row = std::max(max_row, c.row);
    max_col = std::max(max_col, c.col);
    cell_rows.push_back(std::move(c));
  }
  if (cell_rows.empty()) throw ParseError(cells.path(), "no cells");
  const long rows = max_row + 1, cols = max_col + 1;
  if (static_cast<long>(cell_rows.size()) != rows * cols) {
    throw ParseError(cells.path(), "expected " + std::to_string(rows * cols) + " cells for a " + std::to_string(rows) +
                                       "x" + std::to_string(cols) + " grid, found " + std::to_string(cell_rows.size()));
  }
  const int n = static_cast<int>(rows * cols);
  Tensor static_features({static_cast<std::size_t>(n), static_names.size()});
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  for (const CellRow& c : cell_rows) {
    if (c.id != c.row * cols + c.col) {
      throw ParseError(cells.path(), c.line, 1, "cell_id must equal row*" + std::to_string(cols) + "+col");
    }
    if (seen[c.id]) throw ParseError(cells.path(), c.line, 1, "duplicate cell_id " + std::to_string(c.id));
    seen[c.id] = true;
    for (std::size_t j = 0; j < c.features.size(); ++j) static_features(c.id, j) = c.features[j];
  }
  GridGraph graph = build_grid_graph(static_cast<int>(rows), static_cast<int>(cols));

  // dynamics.csv
  csv::Reader dyn(paths.dynamics);
  const std::vector<std::string> dynamic_names = dyn.header({"cell_id", "year", "month"});
  std::map<YearMonth, std::vector<std::pair<int, std::vector<double>>>> by_month;
  std::set<std::pair<YearMonth, int>> seen_rows;
  while (dyn.next()) {
    dyn.require_width(3 + dynamic_names.size());
    const int cell = checked_cell(dyn, 0, n);
    const YearMonth ym = read_year_month(dyn, 1);
    if (!seen_rows.emplace(ym, cell).second) {
      dyn.fail(0, "duplicate row for cell " + std::to_string(cell) + " month " + ym_text(ym));
    }
    std::vector<double> values;
    for (std::size_t j = 0; j < dynamic_names.size(); ++j) {
      const double v = dyn.real(3 + j);
      if (!std::isfinite(v)) dyn.fail(3 + j, "non-finite feature");
      values.push_back(v);
    }
    by_month[ym].emplace_back(cell, std::move(values));
  }
  if (by_month.empty()) throw ParseError(dyn.path(), "no months");
  std::vector<YearMonth> months;
  for (const auto& [ym, _] : by_month) {
    if (!months.empty() && ym != months.back().next()) {
      throw ParseError(dyn.path(), "months are not consecutive: " + ym_text(months.back()) + " then " + ym_text(ym));
    }
    months.push_back(ym);
  }
  std::string missing;
  std::vector<Tensor> dynamic_features;
  for (const auto& [ym, entries] : by_month) {
    Tensor m({static_cast<std::size_t>(n), dynamic_names.size()});
    std::vector<bool> have(static_cast<std::size_t>(n), false);
    for (const auto& [cell, values] : entries) {
      have[cell] = true;
      for (std::size_t j = 0; j < values.size(); ++j) m(cell, j) = values[j];
    }
    for (int i = 0; i < n && missing.size() < 400; ++i)
      if (!have[i]) missing += " (" + std::to_string(i) + ", " + ym_text(ym) + ")";
    dynamic_features.push_back(std::move(m));
  }
  if (!missing.empty()) throw ParseError(dyn.path(), "missing dynamics rows for (cell, month):" + missing);

  // visits.csv
  csv::Reader vis(paths.visits);
  vis.header({"cell_id", "year", "month", "visit_index", "effort_km", "detected"});
  if (vis.fields().size() != 6) vis.fail(6, "unexpected extra columns");
  std::vector<VisitRecord> visits;
  std::set<std::tuple<int, int, int>> visit_keys;
  while (vis.next()) {
    vis.require_width(6);
    VisitRecord v;
    v.cell = checked_cell(vis, 0, n);
    v.month = checked_month(vis, 1, months);
    const long idx = vis.integer(3);
    if (idx < 1) vis.fail(3, "visit_index must be >= 1");
    v.visit_index = static_cast<int>(idx);
    v.effort_km = vis.real(4);
    if (!std::isfinite(v.effort_km) || v.effort_km < 0.0) vis.fail(4, "effort_km must be finite and >= 0");
    const long det = vis.integer(5);
    if (det != 0 && det != 1) vis.fail(5, "detected must be 0 or 1");
    v.detected = det == 1;
    if (!visit_keys.emplace(v.month, v.cell, v.visit_index).second) vis.fail(3, "duplicate visit_index");
    visits.push_back(v);
  }

  // ground_truth.csv
  std::optional<std::vector<std::uint8_t>> truth;
  if (paths.ground_truth) {
    csv::Reader gt(*paths.ground_truth);
    gt.header({"cell_id", "year", "month", "z"});
    if (gt.fields().size() != 4) gt.fail(4, "unexpected extra columns");
    std::vector<std::uint8_t> z(months.size() * static_cast<std::size_t>(n), 2);
    while (gt.next()) {
      gt.require_width(4);
      const int cell = checked_cell(gt, 0, n);
      const int month = checked_month(gt, 1, months);
      const long value = gt.integer(3);
      if (value != 0 && value != 1) gt.fail(3, "z must be 0 or 1");
      auto& slot = z[static_cast<std::size_t>(month) * n + cell];
      if (slot != 2) gt.fail(0, "duplicate ground-truth row");
      slot = static_cast<std::uint8_t>(value);
    }
    for (std::size_t k = 0; k < z.size(); ++k) {
      if (z[k] == 2) {
        throw ParseError(gt.path(), "missing ground truth for (cell, month): (" + std::to_string(k % n) + ", " +
                                        ym_text(months[k / n]) + ")");
      }
    }
    truth = std::move(z);
  }

  return ParkDataset(std::move(graph), std::move(months), {static_names, dynamic_names}, std::move(static_features),
                     std::move(dynamic_features), std::move(visits), std::move(truth));
}

void save_dataset(const ParkDataset& dataset, const fs::path& dir) {
  fs::create_directories(dir);
  const auto& cols = dataset.columns();
  const int n = dataset.cell_count();
  const int k = dataset.static_dim();
  const GridGraph& g = dataset.graph();

  {
    csv::Writer w(dir / "cells.csv");
    std::vector<std::string> header{"cell_id", "row", "col"};
    header.insert(header.end(), cols.static_names.begin(), cols.static_names.end());
    w.row(header);
    for (int i = 0; i < n; ++i) {
      std::vector<std::string> row{std::to_string(i), std::to_string(g.row_of(i)), std::to_string(g.col_of(i))};
      const auto x = dataset.features(i, 0);
      for (int j = 0; j < k; ++j) row.push_back(csv::format_double(x[j]));
      w.row(row);
    }
    w.close();
  }
  {
    csv::Writer w(dir / "dynamics.csv");
    std::vector<std::string> header{"cell_id", "year", "month"};
    header.insert(header.end(), cols.dynamic_names.begin(), cols.dynamic_names.end());
    w.row(header);
    for (int t = 0; t < dataset.month_count(); ++t) {
      const YearMonth ym = dataset.months()[t];
      for (int i = 0; i < n; ++i) {
        std::vector<std::string> row{std::to_string(i), std::to_string(ym.year), std::to_string(ym.month)};
        const auto x = dataset.features(i, t);
        for (int j = k; j < dataset.feature_dim(); ++j) row.push_back(csv::format_double(x[j]));
        w.row(row);
      }
    }
    w.close();
  }
  {
    csv::Writer w(dir / "visits.csv");
    w.row("cell_id", "year", "month", "visit_index", "effort_km", "detected");
    for (const VisitRecord& v : dataset.visits()) {
      const YearMonth ym = dataset.months()[v.month];
      w.row(v.cell, ym.year, ym.month, v.visit_index, v.effort_km, v.detected ? 1 : 0);
    }
    w.close();
  }
  if (dataset.has_ground_truth()) {
    csv::Writer w(dir / "ground_truth.csv");
    w.row("cell_id", "year", "month", "z");
    for (int t = 0; t < dataset.month_count(); ++t) {
      const YearMonth ym = dataset.months()[t];
      for (int i = 0; i < n; ++i) w.row(i, ym.year, ym.month, dataset.ground_truth(i, t) ? 1 : 0);
    }
    w.close();
  }
}

}  // namespace wildflow
