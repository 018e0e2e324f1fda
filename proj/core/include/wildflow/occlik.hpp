#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "wildflow/park_data.hpp"
#include "wildflow/tape.hpp"

namespace wildflow {

/// Floor applied to probabilities inside logarithms.
inline constexpr double kProbabilityFloor = 1e-12;

/// One cell-month: occupancy probability r and its visits (p_j, y_j).
struct CellMonthObservation {
  double r = 0.0;
  std::vector<double> p;
  std::vector<std::uint8_t> y;

  /// S = max_j y_j, 0 without visits.
  bool detected() const noexcept;
  /// Throws InvalidArgument if r is outside [0,1], p and y differ in length,
  /// some p_j is outside (0,1) or some y_j is not binary.
  void validate() const;
};

/// log[(1-r)(1-S) + r prod_j p_j^y_j (1-p_j)^(1-y_j)].
double occ_loglik(const CellMonthObservation& obs);
/// S=1 form: log r + sum_j [y_j log p_j + (1-y_j) log(1-p_j)].
double occ_loglik_detected(const CellMonthObservation& obs);
/// S=0 form: log[(1-r) + r prod_j (1-p_j)], evaluated directly.
double occ_loglik_undetected(const CellMonthObservation& obs);

/// r (1 - prod_j (1-p_j)); 0 for an empty visit list.
double p_any(double r, std::span<const double> p);

/// Binary cross-entropy with the score clamped to [1e-12, 1-1e-12].
double log_loss(double score, bool label);

/// Visits of a set of cell-months, grouped contiguously.
///
/// Cell-month k owns visits [offsets[k], offsets[k+1]).
struct VisitBatch {
  std::vector<std::size_t> offsets{0};
  std::vector<std::uint8_t> detected;

  std::size_t cell_months() const noexcept { return offsets.size() - 1; }
  std::size_t visit_count() const noexcept { return detected.size(); }
  void add_cell_month(std::span<const std::uint8_t> outcomes);
};

/// Visits of every cell of `month`, cell-months in node order.
VisitBatch month_visit_batch(const ParkDataset& dataset, int month);

/// -sum_k occ_loglik for the batch, from occupancy logits (K x 1) and
/// per-visit detection logits (V x 1). Gradients flow into both.
Var batch_negative_loglik(Tape& tape, Var occupancy_logits, Var detection_logits, const VisitBatch& batch);

/// The same likelihood with every detection probability fixed at 1:
/// -sum over visited cell-months of [S log r + (1-S) log(1-r)].
Var certain_detection_negative_loglik(Tape& tape, Var occupancy_logits, const VisitBatch& batch);

}  // namespace wildflow
