#include "wildflow/occlik.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "wildflow/errors.hpp"

namespace wildflow {

namespace {

double floored_log(double x) { return std::log(std::max(x, kProbabilityFloor)); }

double log_sum_exp(double a, double b) {
  const double hi = std::max(a, b);
  return hi + std::log(std::exp(a - hi) + std::exp(b - hi));
}

}  // namespace

bool CellMonthObservation::detected() const noexcept {
  return std::any_of(y.begin(), y.end(), [](std::uint8_t v) { return v != 0; });
}

void CellMonthObservation::validate() const {
  if (!(r >= 0.0 && r <= 1.0)) throw InvalidArgument("occupancy probability r=" + std::to_string(r) + " outside [0,1]");
  if (p.size() != y.size()) {
    throw InvalidArgument("observation has " + std::to_string(p.size()) + " detection probabilities but " +
                          std::to_string(y.size()) + " outcomes");
  }
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (!(p[j] > 0.0 && p[j] < 1.0)) {
      throw InvalidArgument("detection probability p[" + std::to_string(j) + "]=" + std::to_string(p[j]) +
                            " outside (0,1)");
    }
    if (y[j] > 1) throw InvalidArgument("visit outcome y[" + std::to_string(j) + "] is not binary");
  }
}

double occ_loglik_detected(const CellMonthObservation& obs) {
  double ll = floored_log(obs.r);
  for (std::size_t j = 0; j < obs.p.size(); ++j) ll += obs.y[j] ? std::log(obs.p[j]) : std::log(1.0 - obs.p[j]);
  return ll;
}

double occ_loglik_undetected(const CellMonthObservation& obs) {
  double miss = 1.0;
  for (double pj : obs.p) miss *= 1.0 - pj;
  return floored_log((1.0 - obs.r) + obs.r * miss);
}

double occ_loglik(const CellMonthObservation& obs) {
  obs.validate();
  if (obs.p.empty()) return 0.0;
  if (obs.detected()) return occ_loglik_detected(obs);
  double log_miss = 0.0;
  for (double pj : obs.p) log_miss += std::log(1.0 - pj);
  const double absent = floored_log(1.0 - obs.r);
  const double present = floored_log(obs.r) + log_miss;
  return log_sum_exp(absent, present);
}

double p_any(double r, std::span<const double> p) {
  if (p.empty()) return 0.0;
  double miss = 1.0;
  for (double pj : p) miss *= 1.0 - pj;
  return r * (1.0 - miss);
}

double log_loss(double score, bool label) {
  const double s = std::clamp(score, kProbabilityFloor, 1.0 - kProbabilityFloor);
  return label ? -std::log(s) : -std::log(1.0 - s);
}

void VisitBatch::add_cell_month(std::span<const std::uint8_t> outcomes) {
  detected.insert(detected.end(), outcomes.begin(), outcomes.end());
  offsets.push_back(detected.size());
}

VisitBatch month_visit_batch(const ParkDataset& dataset, int month) {
  VisitBatch batch;
  std::vector<std::uint8_t> outcomes;
  for (int i = 0; i < dataset.cell_count(); ++i) {
    outcomes.clear();
    for (const VisitRecord& v : dataset.visits(i, month)) outcomes.push_back(v.detected ? 1 : 0);
    batch.add_cell_month(outcomes);
  }
  return batch;
}

namespace {

void check_column(const Tensor& t, std::size_t rows, const char* what) {
  if (t.rank() != 2 || t.cols() != 1 || t.rows() != rows) {
    throw InvalidArgument(std::string(what) + " must be " + std::to_string(rows) + "x1, got " +
                          shape_string(t.shape()));
  }
}

}  // namespace

Var batch_negative_loglik(Tape& tape, Var occupancy_logits, Var detection_logits, const VisitBatch& batch) {
  const Tensor& psi = tape.value(occupancy_logits);
  const Tensor& ell = tape.value(detection_logits);
  const std::size_t k_count = batch.cell_months();
  check_column(psi, k_count, "occupancy logits");
  check_column(ell, batch.visit_count(), "detection logits");

  // Logit-space gradients of each cell-month's log-likelihood.
  std::vector<double> d_psi(k_count, 0.0);
  std::vector<double> d_ell(batch.visit_count(), 0.0);
  double total = 0.0;
  for (std::size_t k = 0; k < k_count; ++k) {
    const std::size_t begin = batch.offsets[k], end = batch.offsets[k + 1];
    if (begin == end) continue;
    const double z = psi[k];
    const double r = sigmoid(z);
    const double log_r = -softplus(-z);
    bool any = false;
    for (std::size_t j = begin; j < end; ++j) any = any || batch.detected[j] != 0;
    if (any) {
      double ll = log_r;
      for (std::size_t j = begin; j < end; ++j) {
        const double l = ell[j];
        ll += batch.detected[j] ? -softplus(-l) : -softplus(l);
        d_ell[j] = (batch.detected[j] ? 1.0 : 0.0) - sigmoid(l);
      }
      total += ll;
      d_psi[k] = 1.0 - r;
    } else {
      double log_miss = 0.0;
      for (std::size_t j = begin; j < end; ++j) log_miss += -softplus(ell[j]);
      const double absent = -softplus(z);
      const double present = log_r + log_miss;
      const double ll = log_sum_exp(absent, present);
      const double w0 = std::exp(absent - ll), w1 = std::exp(present - ll);
      total += ll;
      d_psi[k] = -r * w0 + (1.0 - r) * w1;
      for (std::size_t j = begin; j < end; ++j) d_ell[j] = -w1 * sigmoid(ell[j]);
    }
  }

  return tape.record(Tensor::scalar(-total), {occupancy_logits, detection_logits},
                     [occupancy_logits, detection_logits, d_psi = std::move(d_psi), d_ell = std::move(d_ell)](
                         Tape& t, const Tensor& up) {
                       const double u = -up.item();
                       if (Tensor* g = t.adjoint(occupancy_logits))
                         for (std::size_t k = 0; k < d_psi.size(); ++k) (*g)[k] += u * d_psi[k];
                       if (Tensor* g = t.adjoint(detection_logits))
                         for (std::size_t j = 0; j < d_ell.size(); ++j) (*g)[j] += u * d_ell[j];
                     });
}

Var certain_detection_negative_loglik(Tape& tape, Var occupancy_logits, const VisitBatch& batch) {
  const Tensor& psi = tape.value(occupancy_logits);
  const std::size_t k_count = batch.cell_months();
  check_column(psi, k_count, "occupancy logits");
  std::vector<double> d_psi(k_count, 0.0);
  double total = 0.0;
  for (std::size_t k = 0; k < k_count; ++k) {
    const std::size_t begin = batch.offsets[k], end = batch.offsets[k + 1];
    if (begin == end) continue;
    bool any = false;
    for (std::size_t j = begin; j < end; ++j) any = any || batch.detected[j] != 0;
    const double z = psi[k];
    total += any ? -softplus(-z) : -softplus(z);
    d_psi[k] = (any ? 1.0 : 0.0) - sigmoid(z);
  }
  return tape.record(Tensor::scalar(-total), {occupancy_logits},
                     [occupancy_logits, d_psi = std::move(d_psi)](Tape& t, const Tensor& up) {
                       const double u = -up.item();
                       if (Tensor* g = t.adjoint(occupancy_logits))
                         for (std::size_t k = 0; k < d_psi.size(); ++k) (*g)[k] += u * d_psi[k];
                     });
}

}  // namespace wildflow
