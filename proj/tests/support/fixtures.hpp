#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "wildflow/optim.hpp"
#include "wildflow/park_data.hpp"
#include "wildflow/rng.hpp"
#include "wildflow/synthgen.hpp"
#include "wildflow/tape.hpp"
#include "wildflow/tensor.hpp"

namespace fixtures {

using namespace wildflow;

inline Tensor random_tensor(Tensor::Shape shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = scale * rng.normal();
  return t;
}

/// |a - b| / max(|a|, |b|, floor).
inline double relative_error(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Five-point central differences with step h.
inline std::vector<double> central_diff_grad(const std::function<double(std::span<const double>)>& f,
                                             std::span<const double> theta, double h = 1e-4) {
  std::vector<double> x(theta.begin(), theta.end());
  std::vector<double> grad(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double orig = x[k];
    double v[4];
    const double offsets[4] = {-2.0, -1.0, 1.0, 2.0};
    for (int j = 0; j < 4; ++j) {
      x[k] = orig + offsets[j] * h;
      v[j] = f(x);
    }
    x[k] = orig;
    grad[k] = (v[0] - 8.0 * v[1] + 8.0 * v[2] - v[3]) / (12.0 * h);
  }
  return grad;
}

struct GradientPair {
  Tensor analytic;
  std::vector<double> numeric;
};

/// Tape gradients and five-point central differences of a scalar function of
/// several tensors, one pair per input. `build` records the loss from parameter
/// Vars created for `inputs`.
inline std::vector<GradientPair> gradient_pairs(const std::function<Var(Tape&, const std::vector<Var>&)>& build,
                                                const std::vector<Tensor>& inputs, double h) {
  Tape tape;
  std::vector<Var> vars;
  for (const Tensor& t : inputs) vars.push_back(tape.parameter(t));
  tape.backward(build(tape, vars));
  std::vector<GradientPair> out;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto f = [&](std::span<const double> theta) {
      std::vector<Tensor> shifted = inputs;
      std::copy(theta.begin(), theta.end(), shifted[k].values().begin());
      Tape t2;
      std::vector<Var> v2;
      for (const Tensor& t : shifted) v2.push_back(t2.parameter(t));
      return t2.value(build(t2, v2)).item();
    };
    out.push_back({tape.grad(vars[k]), central_diff_grad(f, inputs[k].values(), h)});
  }
  return out;
}

/// Largest entrywise relative error between tape gradients and central differences.
///
/// Piecewise-linear graphs (relu, clip) need a step small enough not to cross a kink.
inline double max_gradient_error(const std::function<Var(Tape&, const std::vector<Var>&)>& build,
                                 std::vector<Tensor> inputs, double h = 1e-4) {
  double worst = 0.0;
  for (const GradientPair& g : gradient_pairs(build, inputs, h))
    for (std::size_t i = 0; i < g.numeric.size(); ++i)
      worst = std::max(worst, relative_error(g.analytic[i], g.numeric[i]));
  return worst;
}

/// Largest per-tensor ||analytic - numeric|| / (||analytic|| + ||numeric||), 0 when both vanish.
inline double max_gradient_norm_error(const std::function<Var(Tape&, const std::vector<Var>&)>& build,
                                      std::vector<Tensor> inputs, double h = 1e-4) {
  double worst = 0.0;
  for (const GradientPair& g : gradient_pairs(build, inputs, h)) {
    double diff = 0.0, na = 0.0, nn = 0.0;
    for (std::size_t i = 0; i < g.numeric.size(); ++i) {
      diff += (g.analytic[i] - g.numeric[i]) * (g.analytic[i] - g.numeric[i]);
      na += g.analytic[i] * g.analytic[i];
      nn += g.numeric[i] * g.numeric[i];
    }
    const double denom = std::sqrt(na) + std::sqrt(nn);
    if (denom > 0.0) worst = std::max(worst, std::sqrt(diff) / denom);
  }
  return worst;
}

/// Hand-built dataset on a rows x cols grid. Visits are (cell, month, effort, detected).
struct VisitSpec {
  int cell;
  int month;
  double effort;
  bool detected;
};

inline ParkDataset tiny_dataset(int rows, int cols, int months, std::vector<VisitSpec> visits, int static_dim = 1,
                                int dynamic_dim = 1, YearMonth start = {2020, 1}, std::uint64_t seed = 3) {
  Rng rng(seed);
  const std::size_t n = static_cast<std::size_t>(rows * cols);
  Tensor stat = random_tensor({n, static_cast<std::size_t>(static_dim)}, rng);
  std::vector<Tensor> dyn;
  std::vector<YearMonth> ym;
  YearMonth cur = start;
  for (int t = 0; t < months; ++t) {
    dyn.push_back(random_tensor({n, static_cast<std::size_t>(dynamic_dim)}, rng));
    ym.push_back(cur);
    cur = cur.next();
  }
  ParkDataset::Columns cols_names;
  for (int j = 0; j < static_dim; ++j) cols_names.static_names.push_back("s" + std::to_string(j));
  for (int j = 0; j < dynamic_dim; ++j) cols_names.dynamic_names.push_back("d" + std::to_string(j));
  std::vector<VisitRecord> records;
  std::vector<int> counter(n * static_cast<std::size_t>(months), 0);
  for (const VisitSpec& v : visits) {
    const bool inside = v.cell >= 0 && static_cast<std::size_t>(v.cell) < n && v.month >= 0 && v.month < months;
    const int index = inside ? ++counter[static_cast<std::size_t>(v.month) * n + v.cell] : 1;
    records.push_back(VisitRecord{v.cell, v.month, index, v.effort, v.detected});
  }
  return ParkDataset(build_grid_graph(rows, cols), std::move(ym), std::move(cols_names), std::move(stat),
                     std::move(dyn), std::move(records));
}

/// Small synthetic park for fast pipeline checks.
inline GeneratorConfig small_park_config(std::uint64_t seed = 42, int rows = 10, int cols = 10) {
  GeneratorConfig c = default_config();
  c.rows = rows;
  c.cols = cols;
  c.seed = seed;
  return c;
}

inline double spearman(std::span<const double> a, std::span<const double> b) {
  auto ranks = [](std::span<const double> v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) { return v[x] < v[y]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const std::vector<double> ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(ra.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace fixtures
