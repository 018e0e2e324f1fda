#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "wildflow/park_data.hpp"
#include "wildflow/pipeline.hpp"

namespace wildflow {

/// Effort (km) of each planned visit, one list per cell.
using PlannedVisits = std::vector<std::vector<double>>;

/// The visits actually recorded in `month`, used as the plan in retrospective evaluation.
PlannedVisits realized_visits(const ParkDataset& dataset, int month);

struct MonthPrediction {
  std::vector<double> r;
  std::vector<double> p_any;
};

/// Occupancy probability r per cell for month `month` (needs month >= 1 for the lag).
std::vector<double> predict_occupancy(const TrainedModel& model, const ParkDataset& dataset, int month);
/// r and the detection-aware score p_any = r (1 - prod_j (1 - p_j)) under `planned`.
MonthPrediction predict_month(const TrainedModel& model, const ParkDataset& dataset, int month,
                              const PlannedVisits& planned);

/// Average precision: sum over recall steps of precision, tied scores taken as one block.
/// Throws UndefinedMetric without positive labels.
double aupr(std::span<const double> scores, std::span<const std::uint8_t> labels);

struct CellScore {
  int cell = 0;
  int year = 0;
  int month = 0;
  double score = 0.0;
  bool label = false;
  double log_loss = 0.0;
  bool operator==(const CellScore&) const = default;
};

struct EvalReport {
  std::string model_kind;
  int test_year = 0;
  std::uint64_t seed = 0;
  std::string aupr_estimator = "average_precision";
  double aupr = 0.0;
  double mean_log_loss = 0.0;
  double prevalence = 0.0;
  std::vector<CellScore> cells;  // ordered by (year, month, cell)
  bool operator==(const EvalReport&) const = default;
};

/// How high-risk regions are chosen for each test month.
struct RegionOptions {
  int seed_count = 20;
  int max_region_size = 25;
  /// Detection history used to rank cells: the `history_months` months before the test month.
  int history_months = 36;
  /// Recompute regions every test month; otherwise once from the months before the test year.
  bool monthly = true;
};

/// Pools the test-year cell-months that fall inside the selected regions and scores them.
EvalReport evaluate(const TrainedModel& model, const ParkDataset& dataset, int test_year,
                    const RegionOptions& regions = {});
/// Same with fixed regions for every test month.
EvalReport evaluate(const TrainedModel& model, const ParkDataset& dataset, int test_year,
                    const std::vector<std::vector<int>>& regions);

/// report.json and report_cells.csv.
void write_report(const EvalReport& report, const std::filesystem::path& dir);
EvalReport read_report(const std::filesystem::path& dir);

struct CaseStudyRow {
  std::string feature;
  double subset_median = 0.0;
  double all_median = 0.0;
};

struct CaseStudy {
  double quantile = 0.1;
  std::size_t subset_size = 0;
  std::size_t total = 0;
  /// Indices into report_a.cells of the selected cell-months, in selection order.
  std::vector<std::size_t> subset;
  std::vector<CaseStudyRow> rows;
};

/// l_diff = log_loss(a) - log_loss(b) per cell-month; keeps the ceil(q M) lowest
/// (stable by l_diff, cell, month) and compares feature medians. Features are
/// dataset columns or "lag_effort" / "adjacent_effort".
CaseStudy case_study(const EvalReport& report_a, const EvalReport& report_b, const ParkDataset& dataset,
                     std::span<const std::string> features, double quantile = 0.1);

void write_case_study(const CaseStudy& study, const std::filesystem::path& path);

}  // namespace wildflow
