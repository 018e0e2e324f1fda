#include "wildflow/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include <json.hpp>

#include "csv.hpp"
#include "wildflow/errors.hpp"

namespace wildflow {

namespace fs = std::filesystem;

PlannedVisits realized_visits(const ParkDataset& dataset, int month) {
  dataset.check_cell_month(0, month);
  PlannedVisits plan(static_cast<std::size_t>(dataset.cell_count()));
  for (int i = 0; i < dataset.cell_count(); ++i)
    for (const VisitRecord& v : dataset.visits(i, month)) plan[i].push_back(v.effort_km);
  return plan;
}

namespace {

void check_compatible(const TrainedModel& model, const ParkDataset& dataset) {
  if (model.feature_dim() != dataset.feature_dim()) {
    throw SchemaMismatch("model expects feature dimension " + std::to_string(model.feature_dim()) +
                         ", dataset has " + std::to_string(dataset.feature_dim()));
  }
  if (model.grid_rows != dataset.graph().rows() || model.grid_cols != dataset.graph().cols()) {
    throw SchemaMismatch("model was trained on a " + std::to_string(model.grid_rows) + "x" +
                         std::to_string(model.grid_cols) + " grid, dataset is " +
                         std::to_string(dataset.graph().rows()) + "x" + std::to_string(dataset.graph().cols()));
  }
}

void check_month(const ParkDataset& dataset, int month) {
  if (month < 1 || month >= dataset.month_count()) {
    throw InvalidArgument("month index " + std::to_string(month) + " has no preceding month in the dataset");
  }
}

std::vector<double> sigmoid_all(std::vector<double> z) {
  for (double& v : z) v = sigmoid(v);
  return z;
}

std::vector<double> occupancy_from_prepared(const TrainedModel& model, const PreparedMonth& pm, YearMonth ym,
                                            const NormalizedAdjacency& adjacency) {
  switch (model.kind) {
    case ModelKind::logreg: {
      Tape tape;
      Var z = clip(tape, linear_forward(tape, bind(tape, *model.base, false), tape.constant(pm.base_inputs)),
                   kLogitBound);
      return sigmoid_all(tape.value(z).data());
    }
    case ModelKind::mlp: {
      Tape tape;
      Var z = mlp_forward(tape, bind(tape, *model.mlp, false), tape.constant(pm.base_inputs), kLogitBound);
      return sigmoid_all(tape.value(z).data());
    }
    case ModelKind::gnn:
      return sigmoid_all(gcn_forward(*model.gnn, adjacency, pm.condition.matrix, kLogitBound));
    default: {
      FlowConfig flow = model.flow;
      flow.seed = derive_seed(model.flow.seed, static_cast<std::uint64_t>(ym.year) * 12 + ym.month);
      const LinearParams* eta = model.kind == ModelKind::wildflow_no_base ? nullptr : &*model.base;
      return sample_risk(*model.velocity, eta, adjacency, pm.condition, pm.adjacent_effort, flow);
    }
  }
}

}  // namespace

std::vector<double> predict_occupancy(const TrainedModel& model, const ParkDataset& dataset, int month) {
  check_compatible(model, dataset);
  check_month(dataset, month);
  const PreparedMonth pm = prepare_month(dataset, month, model.stats);
  return occupancy_from_prepared(model, pm, dataset.months()[month], normalized_adjacency(dataset.graph()));
}

MonthPrediction predict_month(const TrainedModel& model, const ParkDataset& dataset, int month,
                              const PlannedVisits& planned) {
  check_compatible(model, dataset);
  check_month(dataset, month);
  const std::size_t n = static_cast<std::size_t>(dataset.cell_count());
  if (planned.size() != n) {
    throw InvalidArgument("planned visits cover " + std::to_string(planned.size()) + " cells, grid has " +
                          std::to_string(n));
  }
  const PreparedMonth pm = prepare_month(dataset, month, model.stats);
  MonthPrediction out;
  out.r = occupancy_from_prepared(model, pm, dataset.months()[month], normalized_adjacency(dataset.graph()));
  out.p_any.assign(n, 0.0);
  const std::size_t d = static_cast<std::size_t>(model.feature_dim());
  for (std::size_t i = 0; i < n; ++i) {
    if (planned[i].empty()) continue;
    if (!model.detection) {
      out.p_any[i] = out.r[i];
      continue;
    }
    const std::span<const double> x(&pm.condition.matrix.data()[i * (d + 1)], d);
    std::vector<double> p;
    for (double effort : planned[i]) p.push_back(detection_forward(*model.detection, x, effort));
    out.p_any[i] = p_any(out.r[i], p);
  }
  return out;
}

double aupr(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) throw InvalidArgument("aupr: scores and labels differ in length");
  const std::size_t positives = static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(),
                                                                       [](std::uint8_t y) { return y != 0; }));
  if (positives == 0) throw UndefinedMetric("AUPR is undefined without positive labels");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double area = 0.0;
  std::size_t seen = 0, hits = 0;
  for (std::size_t k = 0; k < order.size();) {
    std::size_t block_hits = 0, end = k;
    while (end < order.size() && scores[order[end]] == scores[order[k]]) {
      block_hits += labels[order[end]] ? 1 : 0;
      ++end;
    }
    seen += end - k;
    hits += block_hits;
    if (block_hits > 0) {
      area += static_cast<double>(block_hits) / static_cast<double>(positives) * static_cast<double>(hits) /
              static_cast<double>(seen);
    }
    k = end;
  }
  return area;
}

namespace {

EvalReport score_pool(const TrainedModel& model, const ParkDataset& dataset, int test_year,
                      const std::vector<std::pair<int, std::vector<int>>>& pool) {
  EvalReport report;
  report.model_kind = to_string(model.kind);
  report.test_year = test_year;
  report.seed = model.train_config.seed;
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;
  double loss = 0.0;
  for (const auto& [month, cells] : pool) {
    const MonthPrediction pred = predict_month(model, dataset, month, realized_visits(dataset, month));
    const YearMonth ym = dataset.months()[month];
    for (int cell : cells) {
      const bool label = monthly_label(dataset, cell, month);
      const double score = pred.p_any[cell];
      const double ll = log_loss(score, label);
      report.cells.push_back({cell, ym.year, ym.month, score, label, ll});
      scores.push_back(score);
      labels.push_back(label ? 1 : 0);
      loss += ll;
    }
  }
  if (report.cells.empty()) throw InvalidArgument("the region pool for test year " + std::to_string(test_year) + " is empty");
  report.mean_log_loss = loss / static_cast<double>(report.cells.size());
  report.prevalence = static_cast<double>(std::count(labels.begin(), labels.end(), 1)) / labels.size();
  report.aupr = aupr(scores, labels);
  return report;
}

std::vector<int> test_months(const ParkDataset& dataset, int test_year) {
  std::vector<int> months;
  for (int t = 0; t < dataset.month_count(); ++t)
    if (dataset.months()[t].year == test_year) months.push_back(t);
  if (months.empty()) throw InvalidArgument("test year " + std::to_string(test_year) + " is not in the dataset");
  if (months.front() == 0) throw InvalidArgument("the first test month has no preceding month in the dataset");
  return months;
}

std::vector<int> region_union(const std::vector<std::vector<int>>& regions, int n) {
  std::set<int> cells;
  for (const auto& region : regions)
    for (int c : region) {
      if (c < 0 || c >= n) throw InvalidArgument("region cell " + std::to_string(c) + " outside the grid");
      cells.insert(c);
    }
  return {cells.begin(), cells.end()};
}

}  // namespace

EvalReport evaluate(const TrainedModel& model, const ParkDataset& dataset, int test_year,
                    const RegionOptions& options) {
  check_compatible(model, dataset);
  if (options.history_months < 1) throw InvalidArgument("region history must span at least one month");
  const std::vector<int> months = test_months(dataset, test_year);
  std::vector<std::pair<int, std::vector<int>>> pool;
  std::vector<int> fixed;
  if (!options.monthly) {
    const int end = months.front();
    fixed = region_union(select_high_risk_regions(dataset, options.seed_count, options.max_region_size,
                                                  std::max(0, end - options.history_months), end),
                         dataset.cell_count());
  }
  for (int t : months) {
    if (options.monthly) {
      pool.emplace_back(t, region_union(select_high_risk_regions(dataset, options.seed_count, options.max_region_size,
                                                                 std::max(0, t - options.history_months), t),
                                        dataset.cell_count()));
    } else {
      pool.emplace_back(t, fixed);
    }
  }
  return score_pool(model, dataset, test_year, pool);
}

EvalReport evaluate(const TrainedModel& model, const ParkDataset& dataset, int test_year,
                    const std::vector<std::vector<int>>& regions) {
  check_compatible(model, dataset);
  const std::vector<int> cells = region_union(regions, dataset.cell_count());
  std::vector<std::pair<int, std::vector<int>>> pool;
  for (int t : test_months(dataset, test_year)) pool.emplace_back(t, cells);
  return score_pool(model, dataset, test_year, pool);
}

// ---------------------------------------------------------------- report files

void write_report(const EvalReport& report, const fs::path& dir) {
  fs::create_directories(dir);
  nlohmann::ordered_json j;
  j["model_kind"] = report.model_kind;
  j["test_year"] = report.test_year;
  j["seed"] = report.seed;
  j["aupr_estimator"] = report.aupr_estimator;
  j["aupr"] = report.aupr;
  j["mean_log_loss"] = report.mean_log_loss;
  j["prevalence"] = report.prevalence;
  j["cell_months"] = report.cells.size();
  {
    std::ofstream out(dir / "report.json", std::ios::binary);
    if (!out) throw MissingArtifact("cannot write " + (dir / "report.json").string());
    out << j.dump(2) << '\n';
  }
  csv::Writer w(dir / "report_cells.csv");
  w.row("cell_id", "year", "month", "score", "label", "log_loss");
  for (const CellScore& c : report.cells) w.row(c.cell, c.year, c.month, c.score, c.label ? 1 : 0, c.log_loss);
  w.close();
}

EvalReport read_report(const fs::path& dir) {
  const fs::path json_path = dir / "report.json";
  std::ifstream in(json_path, std::ios::binary);
  if (!in) throw MissingArtifact("cannot open " + json_path.string());
  EvalReport report;
  try {
    const nlohmann::json j = nlohmann::json::parse(in);
    report.model_kind = j.at("model_kind").get<std::string>();
    report.test_year = j.at("test_year").get<int>();
    report.seed = j.at("seed").get<std::uint64_t>();
    report.aupr_estimator = j.at("aupr_estimator").get<std::string>();
    report.aupr = j.at("aupr").get<double>();
    report.mean_log_loss = j.at("mean_log_loss").get<double>();
    report.prevalence = j.at("prevalence").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(json_path.string(), e.what());
  }
  csv::Reader r(dir / "report_cells.csv");
  r.header({"cell_id", "year", "month", "score", "label", "log_loss"});
  while (r.next()) {
    r.require_width(6);
    CellScore c;
    c.cell = static_cast<int>(r.integer(0));
    c.year = static_cast<int>(r.integer(1));
    c.month = static_cast<int>(r.integer(2));
    c.score = r.real(3);
    const long label = r.integer(4);
    if (label != 0 && label != 1) r.fail(4, "label must be 0 or 1");
    c.label = label == 1;
    c.log_loss = r.real(5);
    report.cells.push_back(c);
  }
  return report;
}

// ---------------------------------------------------------------- case study

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

}  // namespace

CaseStudy case_study(const EvalReport& a, const EvalReport& b, const ParkDataset& dataset,
                     std::span<const std::string> features, double quantile) {
  if (!(quantile > 0.0 && quantile <= 1.0)) throw InvalidArgument("quantile must be in (0,1]");
  if (a.cells.size() != b.cells.size()) {
    throw InvalidArgument("reports cover " + std::to_string(a.cells.size()) + " and " +
                          std::to_string(b.cells.size()) + " cell-months");
  }
  const std::size_t m = a.cells.size();
  if (m == 0) throw InvalidArgument("reports are empty");
  std::vector<double> diff(m);
  std::vector<int> month_index(m);
  for (std::size_t k = 0; k < m; ++k) {
    const CellScore &ca = a.cells[k], &cb = b.cells[k];
    if (ca.cell != cb.cell || ca.year != cb.year || ca.month != cb.month) {
      throw InvalidArgument("reports differ at row " + std::to_string(k + 1) + ": coverage must be identical");
    }
    const auto t = dataset.month_index({ca.year, ca.month});
    if (!t) throw InvalidArgument("report month " + std::to_string(ca.year) + "-" + std::to_string(ca.month) +
                                  " is not in the dataset");
    dataset.check_cell_month(ca.cell, *t);
    month_index[k] = *t;
    diff[k] = ca.log_loss - cb.log_loss;
  }

  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    if (diff[x] != diff[y]) return diff[x] < diff[y];
    if (a.cells[x].cell != a.cells[y].cell) return a.cells[x].cell < a.cells[y].cell;
    return month_index[x] < month_index[y];
  });

  CaseStudy study;
  study.quantile = quantile;
  study.total = m;
  study.subset_size = static_cast<std::size_t>(std::ceil(quantile * static_cast<double>(m) - 1e-9));
  study.subset_size = std::clamp<std::size_t>(study.subset_size, 1, m);
  study.subset.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(study.subset_size));

  const auto& cols = dataset.columns();
  for (const std::string& name : features) {
    std::function<double(std::size_t)> value;
    if (name == "lag_effort") {
      value = [&](std::size_t k) { return lagged_effort(dataset, a.cells[k].cell, month_index[k]); };
    } else if (name == "adjacent_effort") {
      value = [&](std::size_t k) {
        double s = 0.0;
        for (int j : dataset.graph().neighbors(a.cells[k].cell)) s += lagged_effort(dataset, j, month_index[k]);
        return s;
      };
    } else {
      std::size_t col = 0;
      bool found = false;
      for (std::size_t j = 0; j < cols.static_names.size() && !found; ++j)
        if (cols.static_names[j] == name) col = j, found = true;
      for (std::size_t j = 0; j < cols.dynamic_names.size() && !found; ++j)
        if (cols.dynamic_names[j] == name) col = cols.static_names.size() + j, found = true;
      if (!found) throw InvalidArgument("unknown feature '" + name + "'");
      value = [&, col](std::size_t k) { return dataset.features(a.cells[k].cell, month_index[k])[col]; };
    }
    std::vector<double> all(m), sub;
    for (std::size_t k = 0; k < m; ++k) all[k] = value(k);
    for (std::size_t k : study.subset) sub.push_back(all[k]);
    study.rows.push_back({name, median(std::move(sub)), median(std::move(all))});
  }
  return study;
}

void write_case_study(const CaseStudy& study, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  csv::Writer w(path);
  w.row("feature", "subset_median", "all_median", "subset_size", "total", "quantile");
  for (const CaseStudyRow& r : study.rows) {
    w.row(r.feature, r.subset_median, r.all_median, study.subset_size, study.total, study.quantile);
  }
  w.close();
}

}  // namespace wildflow
