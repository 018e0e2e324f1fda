#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wildflow/tensor.hpp"

namespace wildflow {

/// Calendar month; ordered lexicographically by (year, month).
struct YearMonth {
  int year = 0;
  int month = 1;  // 1..12
  auto operator<=>(const YearMonth&) const = default;
  YearMonth next() const noexcept { return month == 12 ? YearMonth{year + 1, 1} : YearMonth{year, month + 1}; }
};

/// Rectangular grid with 4-neighbourhood adjacency. Node id = row * cols + col.
class GridGraph {
 public:
  GridGraph() = default;

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }
  int node_count() const noexcept { return rows_ * cols_; }
  /// Undirected edges (u, v) with u < v.
  const std::vector<std::pair<int, int>>& edges() const noexcept { return edges_; }
  std::span<const int> neighbors(int node) const;
  int degree(int node) const { return static_cast<int>(neighbors(node).size()); }
  int node_at(int row, int col) const noexcept { return row * cols_ + col; }
  int row_of(int node) const noexcept { return node / cols_; }
  int col_of(int node) const noexcept { return node % cols_; }

  bool operator==(const GridGraph& o) const noexcept { return rows_ == o.rows_ && cols_ == o.cols_; }

 private:
  friend GridGraph build_grid_graph(int rows, int cols);
  int rows_ = 0;
  int cols_ = 0;
  std::vector<std::pair<int, int>> edges_;
  std::vector<int> offsets_;
  std::vector<int> adjacency_;
};

/// Throws InvalidArgument unless rows >= 1 and cols >= 1.
GridGraph build_grid_graph(int rows, int cols);

/// One patrol visit. `month` indexes ParkDataset::months().
struct VisitRecord {
  int cell = 0;
  int month = 0;
  int visit_index = 1;
  double effort_km = 0.0;
  bool detected = false;
  bool operator==(const VisitRecord&) const = default;
};

/// Gridded park: features per cell-month, visit-level patrol records and,
/// for synthetic parks, the true occupancy state.
///
/// Feature vectors are the static covariates followed by the dynamic ones.
/// Immutable after construction.
class ParkDataset {
 public:
  struct Columns {
    std::vector<std::string> static_names;
    std::vector<std::string> dynamic_names;
  };

  ParkDataset() = default;
  /// `static_features` is N x k; `dynamic_features` holds one N x m tensor per month.
  /// `ground_truth_z`, when present, is indexed [month * N + cell].
  ParkDataset(GridGraph graph, std::vector<YearMonth> months, Columns columns, Tensor static_features,
              std::vector<Tensor> dynamic_features, std::vector<VisitRecord> visits,
              std::optional<std::vector<std::uint8_t>> ground_truth_z = std::nullopt);

  const GridGraph& graph() const noexcept { return graph_; }
  int cell_count() const noexcept { return graph_.node_count(); }
  int month_count() const noexcept { return static_cast<int>(months_.size()); }
  const std::vector<YearMonth>& months() const noexcept { return months_; }
  const Columns& columns() const noexcept { return columns_; }
  int static_dim() const noexcept { return static_cast<int>(columns_.static_names.size()); }
  int dynamic_dim() const noexcept { return static_cast<int>(columns_.dynamic_names.size()); }
  int feature_dim() const noexcept { return static_dim() + dynamic_dim(); }

  /// x_{i,t}, length feature_dim().
  std::span<const double> features(int cell, int month) const;
  /// N x d matrix of x_{., t}.
  Tensor feature_matrix(int month) const;

  /// All visits ordered by (month, cell, visit_index).
  std::span<const VisitRecord> visits() const noexcept { return visits_; }
  std::span<const VisitRecord> visits(int cell, int month) const;

  bool has_ground_truth() const noexcept { return ground_truth_.has_value(); }
  bool ground_truth(int cell, int month) const;

  /// Aggregate effort of the month preceding months().front(); zeros unless
  /// the dataset was carved out of a longer one.
  std::span<const double> initial_lag_effort() const noexcept { return initial_lag_; }

  std::optional<int> month_index(YearMonth ym) const;
  /// Distinct years in ascending order.
  std::vector<int> years() const;

  /// Months [begin, end) as a new dataset; the lag carried in is the effort of month begin-1.
  ParkDataset slice_months(int begin, int end) const;
  /// Same data with every x replaced by the given feature tensors (one N x d per month).
  ParkDataset with_features(std::vector<Tensor> features) const;

  void check_cell_month(int cell, int month) const;

  bool operator==(const ParkDataset& o) const;

 private:
  void build_index();

  GridGraph graph_;
  std::vector<YearMonth> months_;
  Columns columns_;
  std::vector<double> x_;  // [month][cell][feature]
  std::vector<VisitRecord> visits_;
  std::vector<std::size_t> visit_offsets_;  // size T*N+1, indexed month * N + cell
  std::optional<std::vector<std::uint8_t>> ground_truth_;
  std::vector<double> initial_lag_;
};

/// a^m_{i,t}: total effort of the cell-month's visits, 0 without visits.
double aggregate_monthly_effort(const ParkDataset& dataset, int cell, int month);
/// S_{i,t}: 1 iff any visit of the cell-month detected.
bool monthly_label(const ParkDataset& dataset, int cell, int month);
/// a^m_{i,t-1}; the dataset's initial lag for the first month.
double lagged_effort(const ParkDataset& dataset, int cell, int month);
/// Per node: sum of a^m_{j,t-1} over 4-neighbours j.
std::vector<double> adjacent_lagged_effort(const ParkDataset& dataset, int month);

struct TrainTestSplit {
  ParkDataset train;
  ParkDataset test;
};

/// Train on the `train_window_years` calendar years before `test_year`, test on `test_year`.
TrainTestSplit window_split(const ParkDataset& dataset, int test_year, int train_window_years = 3);

/// Greedy high-risk regions from detection counts over months [month_begin, month_end).
///
/// Seeds are the `seed_count` cells with the most detections; each region then
/// absorbs the adjacent cell with the highest count (lowest index on ties)
/// until it has `max_region_size` cells or no neighbours remain.
std::vector<std::vector<int>> select_high_risk_regions(const ParkDataset& dataset, int seed_count, int max_region_size,
                                                       int month_begin, int month_end);
/// Counts over every month of the dataset.
std::vector<std::vector<int>> select_high_risk_regions(const ParkDataset& dataset, int seed_count = 20,
                                                       int max_region_size = 25);

/// C_t: rows c_{i,t} = [x_{i,t}, a^m_{i,t-1}], N x (d+1).
struct ConditionContext {
  int month = 0;
  Tensor matrix;
};

/// C'_t: rows c'_{i,t} = [x_{i,t}, S_{i,t}, a^m_{i,t}], N x (d+2). Training only.
struct EncoderContext {
  int month = 0;
  Tensor matrix;
};

ConditionContext assemble_condition(const ParkDataset& dataset, int month);
EncoderContext assemble_encoder_context(const ParkDataset& dataset, int month);

/// Column-wise z-score statistics over x.
struct FeatureStats {
  std::vector<double> mean;
  std::vector<double> sd;
  bool operator==(const FeatureStats&) const = default;
};

FeatureStats fit_feature_stats(const ParkDataset& dataset);
/// Copy of the dataset with standardized x. Zero-variance columns are only centered.
ParkDataset standardize(const ParkDataset& dataset, const FeatureStats& stats);

}  // namespace wildflow
