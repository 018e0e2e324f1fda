#include "wildflow/park_data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "wildflow/errors.hpp"

namespace wildflow {

// ---------------------------------------------------------------- GridGraph

GridGraph build_grid_graph(int rows, int cols) {
  if (rows < 1 || cols < 1) {
    throw InvalidArgument("grid dimensions must be positive, got " + std::to_string(rows) + "x" +
                          std::to_string(cols));
  }
  GridGraph g;
  g.rows_ = rows;
  g.cols_ = cols;
  const int n = rows * cols;
  std::vector<std::vector<int>> nbrs(static_cast<std::size_t>(n));
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int u = r * cols + c;
      if (c + 1 < cols) g.edges_.emplace_back(u, u + 1);
      if (r + 1 < rows) g.edges_.emplace_back(u, u + cols);
    }
  }
  for (auto [u, v] : g.edges_) {
    nbrs[u].push_back(v);
    nbrs[v].push_back(u);
  }
  g.offsets_.assign(1, 0);
  for (auto& list : nbrs) {
    std::sort(list.begin(), list.end());
    g.adjacency_.insert(g.adjacency_.end(), list.begin(), list.end());
    g.offsets_.push_back(static_cast<int>(g.adjacency_.size()));
  }
  return g;
}

std::span<const int> GridGraph::neighbors(int node) const {
  if (node < 0 || node >= node_count()) throw InvalidArgument("node " + std::to_string(node) + " out of range");
  return std::span<const int>(adjacency_).subspan(offsets_[node], offsets_[node + 1] - offsets_[node]);
}

// ---------------------------------------------------------------- ParkDataset

ParkDataset::ParkDataset(GridGraph graph, std::vector<YearMonth> months, Columns columns, Tensor static_features,
                         std::vector<Tensor> dynamic_features, std::vector<VisitRecord> visits,
                         std::optional<std::vector<std::uint8_t>> ground_truth_z)
    : graph_(std::move(graph)),
      months_(std::move(months)),
      columns_(std::move(columns)),
      visits_(std::move(visits)),
      ground_truth_(std::move(ground_truth_z)) {
  const std::size_t n = static_cast<std::size_t>(cell_count());
  const std::size_t t = months_.size();
  const std::size_t k = columns_.static_names.size();
  const std::size_t m = columns_.dynamic_names.size();
  if (n == 0) throw InvalidArgument("dataset needs a non-empty grid");
  if (t == 0) throw InvalidArgument("dataset needs at least one month");
  for (std::size_t i = 0; i < t; ++i) {
    if (months_[i].month < 1 || months_[i].month > 12) throw InvalidArgument("month of year outside 1..12");
    if (i > 0 && months_[i] != months_[i - 1].next()) {
      throw InvalidArgument("months must be consecutive calendar months");
    }
  }
  if (static_features.shape() != Tensor::Shape{n, k}) {
    throw InvalidArgument("static features have shape " + shape_string(static_features.shape()) + ", expected " +
                          shape_string({n, k}));
  }
  if (dynamic_features.size() != t) throw InvalidArgument("need one dynamic feature matrix per month");
  for (const Tensor& dyn : dynamic_features) {
    if (dyn.shape() != Tensor::Shape{n, m}) {
      throw InvalidArgument("dynamic features have shape " + shape_string(dyn.shape()) + ", expected " +
                            shape_string({n, m}));
    }
  }
  const std::size_t d = k + m;
  x_.resize(t * n * d);
  for (std::size_t mo = 0; mo < t; ++mo) {
    for (std::size_t i = 0; i < n; ++i) {
      double* row = &x_[(mo * n + i) * d];
      for (std::size_t j = 0; j < k; ++j) row[j] = static_features(i, j);
      for (std::size_t j = 0; j < m; ++j) row[k + j] = dynamic_features[mo](i, j);
    }
  }
  for (double v : x_)
    if (!std::isfinite(v)) throw InvalidArgument("non-finite feature value");
  for (const VisitRecord& v : visits_) {
    if (v.cell < 0 || v.cell >= cell_count()) throw InvalidArgument("visit references unknown cell " + std::to_string(v.cell));
    if (v.month < 0 || v.month >= month_count()) throw InvalidArgument("visit references unknown month index");
    if (!(v.effort_km >= 0.0) || !std::isfinite(v.effort_km)) throw InvalidArgument("visit effort must be finite and >= 0");
    if (v.visit_index < 1) throw InvalidArgument("visit_index must be >= 1");
  }
  if (ground_truth_ && ground_truth_->size() != t * n) throw InvalidArgument("ground truth must cover every cell-month");
  initial_lag_.assign(n, 0.0);
  build_index();
}

void ParkDataset::build_index() {
  std::stable_sort(visits_.begin(), visits_.end(), [](const VisitRecord& a, const VisitRecord& b) {
    return std::tie(a.month, a.cell, a.visit_index) < std::tie(b.month, b.cell, b.visit_index);
  });
  const std::size_t n = static_cast<std::size_t>(cell_count());
  visit_offsets_.assign(months_.size() * n + 1, 0);
  for (const VisitRecord& v : visits_) ++visit_offsets_[static_cast<std::size_t>(v.month) * n + v.cell + 1];
  std::partial_sum(visit_offsets_.begin(), visit_offsets_.end(), visit_offsets_.begin());
}

void ParkDataset::check_cell_month(int cell, int month) const {
  if (cell < 0 || cell >= cell_count()) throw InvalidArgument("cell " + std::to_string(cell) + " out of range");
  if (month < 0 || month >= month_count()) throw InvalidArgument("month index " + std::to_string(month) + " out of range");
}

std::span<const double> ParkDataset::features(int cell, int month) const {
  check_cell_month(cell, month);
  const std::size_t d = static_cast<std::size_t>(feature_dim());
  return std::span<const double>(x_).subspan((static_cast<std::size_t>(month) * cell_count() + cell) * d, d);
}

Tensor ParkDataset::feature_matrix(int month) const {
  check_cell_month(0, month);
  const std::size_t n = static_cast<std::size_t>(cell_count());
  const std::size_t d = static_cast<std::size_t>(feature_dim());
  const auto first = x_.begin() + static_cast<std::ptrdiff_t>(month * n * d);
  return Tensor({n, d}, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(n * d)));
}

std::span<const VisitRecord> ParkDataset::visits(int cell, int month) const {
  check_cell_month(cell, month);
  const std::size_t idx = static_cast<std::size_t>(month) * cell_count() + cell;
  return std::span<const VisitRecord>(visits_).subspan(visit_offsets_[idx], visit_offsets_[idx + 1] - visit_offsets_[idx]);
}

bool ParkDataset::ground_truth(int cell, int month) const {
  check_cell_month(cell, month);
  if (!ground_truth_) throw MissingArtifact("dataset has no ground-truth occupancy");
  return (*ground_truth_)[static_cast<std::size_t>(month) * cell_count() + cell] != 0;
}

std::optional<int> ParkDataset::month_index(YearMonth ym) const {
  auto it = std::lower_bound(months_.begin(), months_.end(), ym);
  if (it == months_.end() || *it != ym) return std::nullopt;
  return static_cast<int>(it - months_.begin());
}

std::vector<int> ParkDataset::years() const {
  std::vector<int> out;
  for (const YearMonth& ym : months_)
    if (out.empty() || out.back() != ym.year) out.push_back(ym.year);
  return out;
}

ParkDataset ParkDataset::slice_months(int begin, int end) const {
  if (begin < 0 || end > month_count() || begin >= end) throw InvalidArgument("invalid month slice");
  ParkDataset out;
  out.graph_ = graph_;
  out.columns_ = columns_;
  out.months_.assign(months_.begin() + begin, months_.begin() + end);
  const std::size_t n = static_cast<std::size_t>(cell_count());
  const std::size_t d = static_cast<std::size_t>(feature_dim());
  out.x_.assign(x_.begin() + static_cast<std::ptrdiff_t>(begin * n * d),
                x_.begin() + static_cast<std::ptrdiff_t>(end * n * d));
  for (const VisitRecord& v : visits_) {
    if (v.month >= begin && v.month < end) {
      VisitRecord copy = v;
      copy.month -= begin;
      out.visits_.push_back(copy);
    }
  }
  if (ground_truth_) {
    out.ground_truth_.emplace(ground_truth_->begin() + static_cast<std::ptrdiff_t>(begin * n),
                              ground_truth_->begin() + static_cast<std::ptrdiff_t>(end * n));
  }
  out.initial_lag_.resize(n);
  for (int i = 0; i < cell_count(); ++i) out.initial_lag_[i] = lagged_effort(*this, i, begin);
  out.build_index();
  return out;
}

ParkDataset ParkDataset::with_features(std::vector<Tensor> features) const {
  const std::size_t n = static_cast<std::size_t>(cell_count());
  const std::size_t d = static_cast<std::size_t>(feature_dim());
  if (features.size() != months_.size()) throw InvalidArgument("need one feature matrix per month");
  ParkDataset out = *this;
  for (std::size_t mo = 0; mo < features.size(); ++mo) {
    if (features[mo].shape() != Tensor::Shape{n, d}) {
      throw InvalidArgument("feature matrix shape " + shape_string(features[mo].shape()) + ", expected " +
                            shape_string({n, d}));
    }
    std::copy(features[mo].data().begin(), features[mo].data().end(), out.x_.begin() + static_cast<std::ptrdiff_t>(mo * n * d));
  }
  return out;
}

bool ParkDataset::operator==(const ParkDataset& o) const {
  return graph_ == o.graph_ && months_ == o.months_ && columns_.static_names == o.columns_.static_names &&
         columns_.dynamic_names == o.columns_.dynamic_names && x_ == o.x_ && visits_ == o.visits_ &&
         ground_truth_ == o.ground_truth_ && initial_lag_ == o.initial_lag_;
}

// ---------------------------------------------------------------- per cell-month quantities

double aggregate_monthly_effort(const ParkDataset& dataset, int cell, int month) {
  double total = 0.0;
  for (const VisitRecord& v : dataset.visits(cell, month)) total += v.effort_km;
  return total;
}

bool monthly_label(const ParkDataset& dataset, int cell, int month) {
  const auto visits = dataset.visits(cell, month);
  return std::any_of(visits.begin(), visits.end(), [](const VisitRecord& v) { return v.detected; });
}

double lagged_effort(const ParkDataset& dataset, int cell, int month) {
  dataset.check_cell_month(cell, month);
  if (month == 0) return dataset.initial_lag_effort()[static_cast<std::size_t>(cell)];
  return aggregate_monthly_effort(dataset, cell, month - 1);
}

std::vector<double> adjacent_lagged_effort(const ParkDataset& dataset, int month) {
  const int n = dataset.cell_count();
  std::vector<double> own(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) own[i] = lagged_effort(dataset, i, month);
  std::vector<double> out(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i)
    for (int j : dataset.graph().neighbors(i)) out[i] += own[j];
  return out;
}

// ---------------------------------------------------------------- splits and regions

TrainTestSplit window_split(const ParkDataset& dataset, int test_year, int train_window_years) {
  if (train_window_years < 1) throw InvalidArgument("train window must span at least one year");
  const auto& months = dataset.months();
  const auto is_year = [&](int y) { return [y](const YearMonth& ym) { return ym.year == y; }; };
  const auto test_begin = std::find_if(months.begin(), months.end(), is_year(test_year));
  if (test_begin == months.end()) {
    throw InvalidArgument("test year " + std::to_string(test_year) + " is outside the dataset span");
  }
  const auto test_end = std::find_if_not(test_begin, months.end(), is_year(test_year));
  const auto train_begin = std::find_if(months.begin(), test_begin, [&](const YearMonth& ym) {
    return ym.year >= test_year - train_window_years;
  });
  if (train_begin == test_begin) {
    throw InvalidArgument("no training months precede test year " + std::to_string(test_year));
  }
  const int tb = static_cast<int>(train_begin - months.begin());
  const int sb = static_cast<int>(test_begin - months.begin());
  const int se = static_cast<int>(test_end - months.begin());
  return {dataset.slice_months(tb, sb), dataset.slice_months(sb, se)};
}

std::vector<std::vector<int>> select_high_risk_regions(const ParkDataset& dataset, int seed_count, int max_region_size,
                                                       int month_begin, int month_end) {
  const int n = dataset.cell_count();
  if (seed_count < 0 || seed_count > n) {
    throw InvalidArgument("seed_count " + std::to_string(seed_count) + " exceeds cell count " + std::to_string(n));
  }
  if (max_region_size < 1) throw InvalidArgument("max_region_size must be >= 1");
  if (month_begin < 0 || month_end > dataset.month_count() || month_begin > month_end) {
    throw InvalidArgument("invalid month range for detection counts");
  }
  std::vector<long> counts(static_cast<std::size_t>(n), 0);
  for (const VisitRecord& v : dataset.visits())
    if (v.month >= month_begin && v.month < month_end && v.detected) ++counts[v.cell];

  // Higher count first, lower index on ties.
  const auto better = [&](int a, int b) { return counts[a] != counts[b] ? counts[a] > counts[b] : a < b; };
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), better);

  std::vector<std::vector<int>> regions;
  for (int s = 0; s < seed_count; ++s) {
    std::vector<int> region{order[s]};
    std::set<int> members{order[s]};
    while (static_cast<int>(region.size()) < max_region_size) {
      int best = -1;
      for (int u : region)
        for (int v : dataset.graph().neighbors(u))
          if (!members.contains(v) && (best < 0 || better(v, best))) best = v;
      if (best < 0) break;
      region.push_back(best);
      members.insert(best);
    }
    std::sort(region.begin(), region.end());
    regions.push_back(std::move(region));
  }
  return regions;
}

std::vector<std::vector<int>> select_high_risk_regions(const ParkDataset& dataset, int seed_count, int max_region_size) {
  return select_high_risk_regions(dataset, seed_count, max_region_size, 0, dataset.month_count());
}

// ---------------------------------------------------------------- contexts

ConditionContext assemble_condition(const ParkDataset& dataset, int month) {
  dataset.check_cell_month(0, month);
  const std::size_t n = static_cast<std::size_t>(dataset.cell_count());
  const std::size_t d = static_cast<std::size_t>(dataset.feature_dim());
  ConditionContext ctx{month, Tensor::zeros(n, d + 1)};
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = dataset.features(static_cast<int>(i), month);
    std::copy(x.begin(), x.end(), &ctx.matrix(i, 0));
    ctx.matrix(i, d) = lagged_effort(dataset, static_cast<int>(i), month);
  }
  return ctx;
}

EncoderContext assemble_encoder_context(const ParkDataset& dataset, int month) {
  dataset.check_cell_month(0, month);
  const std::size_t n = static_cast<std::size_t>(dataset.cell_count());
  const std::size_t d = static_cast<std::size_t>(dataset.feature_dim());
  EncoderContext ctx{month, Tensor::zeros(n, d + 2)};
  for (std::size_t i = 0; i < n; ++i) {
    const int cell = static_cast<int>(i);
    const auto x = dataset.features(cell, month);
    std::copy(x.begin(), x.end(), &ctx.matrix(i, 0));
    ctx.matrix(i, d) = monthly_label(dataset, cell, month) ? 1.0 : 0.0;
    ctx.matrix(i, d + 1) = aggregate_monthly_effort(dataset, cell, month);
  }
  return ctx;
}

// ---------------------------------------------------------------- standardization

FeatureStats fit_feature_stats(const ParkDataset& dataset) {
  const int d = dataset.feature_dim();
  FeatureStats stats{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
  const double count = static_cast<double>(dataset.cell_count()) * dataset.month_count();
  for (int t = 0; t < dataset.month_count(); ++t)
    for (int i = 0; i < dataset.cell_count(); ++i) {
      const auto x = dataset.features(i, t);
      for (int j = 0; j < d; ++j) stats.mean[j] += x[j];
    }
  for (double& m : stats.mean) m /= count;
  for (int t = 0; t < dataset.month_count(); ++t)
    for (int i = 0; i < dataset.cell_count(); ++i) {
      const auto x = dataset.features(i, t);
      for (int j = 0; j < d; ++j) stats.sd[j] += (x[j] - stats.mean[j]) * (x[j] - stats.mean[j]);
    }
  for (double& s : stats.sd) s = std::sqrt(s / count);
  return stats;
}

ParkDataset standardize(const ParkDataset& dataset, const FeatureStats& stats) {
  const std::size_t d = static_cast<std::size_t>(dataset.feature_dim());
  if (stats.mean.size() != d || stats.sd.size() != d) {
    throw InvalidArgument("feature stats cover " + std::to_string(stats.mean.size()) + " features, dataset has " +
                          std::to_string(d));
  }
  std::vector<Tensor> features;
  features.reserve(static_cast<std::size_t>(dataset.month_count()));
  for (int t = 0; t < dataset.month_count(); ++t) {
    Tensor x = dataset.feature_matrix(t);
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t j = 0; j < d; ++j) {
        const double sd = stats.sd[j] > 1e-12 ? stats.sd[j] : 1.0;
        x(i, j) = (x(i, j) - stats.mean[j]) / sd;
      }
    features.push_back(std::move(x));
  }
  return dataset.with_features(std::move(features));
}

}  // namespace wildflow
