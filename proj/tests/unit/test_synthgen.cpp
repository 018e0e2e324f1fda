#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "wildflow/errors.hpp"
#include "wildflow/synthgen.hpp"
#include "wildflow/tape.hpp"

using namespace wildflow;

TEST_CASE("default config is valid and constant") {
  const GeneratorConfig a = default_config();
  CHECK_NOTHROW(a.validate());
  CHECK(a == default_config());
  CHECK(a.rows == 32);
  CHECK(a.cols == 32);
  CHECK(a.months == 48);
  CHECK(a.feature_dim() == 8);
  CHECK(a.beta_det == -0.3);
  CHECK(a.beta_disp == 0.15);
  CHECK(a.length_scale == 3.0);
  CHECK(a.patrol_intensity == 1.5);
  CHECK(a.alpha0 == -1.0);
  CHECK(a.alpha1 == 0.4);
  CHECK(a.alpha2 == 0.3);
  CHECK(a.seed == 42);
}

TEST_CASE("invalid configs are rejected") {
  GeneratorConfig c = default_config();
  c.months = 1;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  CHECK_THROWS_AS(generate_park(c), InvalidArgument);
  c = default_config();
  c.patrol_intensity = -0.5;
  CHECK_THROWS_AS(generate_park(c), InvalidArgument);
  c = default_config();
  c.weights.pop_back();
  CHECK_THROWS_AS(generate_park(c), InvalidArgument);
}

TEST_CASE("default park is bit-identical across runs") {
  CHECK(generate_park(default_config()) == generate_park(default_config()));
  GeneratorConfig other = default_config();
  other.seed = 43;
  CHECK_FALSE(generate_park(other) == generate_park(default_config()));
}

TEST_CASE("no patrols means no visits but full ground truth") {
  GeneratorConfig c = fixtures::small_park_config(1, 6, 6);
  c.patrol_intensity = 0.0;
  const ParkDataset ds = generate_park(c);
  CHECK(ds.visits().empty());
  CHECK(ds.has_ground_truth());
  for (int t = 0; t < ds.month_count(); ++t)
    for (int i = 0; i < ds.cell_count(); ++i) CHECK_FALSE(monthly_label(ds, i, t));
}

TEST_CASE("saturating detection makes the label equal occupancy on visited cells") {
  GeneratorConfig c = fixtures::small_park_config(2, 8, 8);
  c.alpha0 = 20.0;
  const ParkDataset ds = generate_park(c);
  int visited = 0;
  for (int t = 0; t < ds.month_count(); ++t)
    for (int i = 0; i < ds.cell_count(); ++i) {
      if (ds.visits(i, t).empty()) continue;
      ++visited;
      CHECK(monthly_label(ds, i, t) == ds.ground_truth(i, t));
    }
  CHECK(visited > 0);
}

TEST_CASE("null process occupies half the cells") {
  GeneratorConfig c = default_config();
  c.beta_det = 0.0;
  c.beta_disp = 0.0;
  c.weights.assign(8, 0.0);
  c.field_sd = 0.0;
  const ParkDataset ds = generate_park(c);
  long occupied = 0;
  for (int t = 0; t < ds.month_count(); ++t)
    for (int i = 0; i < ds.cell_count(); ++i) occupied += ds.ground_truth(i, t) ? 1 : 0;
  const double rate = static_cast<double>(occupied) / (32.0 * 32.0 * 48.0);
  CHECK(std::abs(rate - 0.5) <= 0.02);
}

TEST_CASE("detections only happen in occupied cells") {
  for (std::uint64_t seed : {1, 2, 3}) {
    const ParkDataset ds = generate_park(fixtures::small_park_config(seed));
    for (const VisitRecord& v : ds.visits())
      if (v.detected) CHECK(ds.ground_truth(v.cell, v.month));
  }
}

TEST_CASE("raising the effort slope never lowers detections") {
  int not_lower = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    GeneratorConfig lo = fixtures::small_park_config(seed, 8, 8);
    GeneratorConfig hi = lo;
    hi.alpha1 = 0.8;
    auto detections = [](const ParkDataset& ds) {
      long n = 0;
      for (const VisitRecord& v : ds.visits()) n += v.detected ? 1 : 0;
      return n;
    };
    if (detections(generate_park(hi)) >= detections(generate_park(lo))) ++not_lower;
  }
  // one-sided sign test at p < 0.05 needs at least 15 of 20
  CHECK(not_lower >= 15);
}

TEST_CASE("true logits follow the generating formula") {
  GeneratorConfig c = fixtures::small_park_config(9, 7, 6);
  c.months = 10;
  const SyntheticPark park = generate_synthetic_park(c);
  const ParkDataset& ds = park.dataset;
  const int n = ds.cell_count();
  for (int t = 0; t < ds.month_count(); ++t) {
    for (int i = 0; i < n; ++i) {
      double psi = park.spatial_field[i];
      const auto x = ds.features(i, t);
      for (int j = 0; j < ds.feature_dim(); ++j) psi += c.weights[j] * x[j];
      const double own = t == 0 ? 0.0 : aggregate_monthly_effort(ds, i, t - 1);
      double nbr = 0.0;
      for (int j : ds.graph().neighbors(i)) nbr += t == 0 ? 0.0 : aggregate_monthly_effort(ds, j, t - 1);
      psi += c.beta_det * own + c.beta_disp * nbr / ds.graph().degree(i);
      CHECK(park.true_logits[t * n + i] == doctest::Approx(psi).epsilon(1e-12));
    }
  }
}

TEST_CASE("spatial field is smooth at the configured length scale") {
  GeneratorConfig c = default_config();
  c.field_sd = 2.0;
  const SyntheticPark park = generate_synthetic_park(c);
  const auto& g = park.spatial_field;
  double mean = 0;
  for (double v : g) mean += v;
  mean /= static_cast<double>(g.size());
  double var = 0;
  for (double v : g) var += (v - mean) * (v - mean);
  var /= static_cast<double>(g.size());
  double cov = 0;
  const auto& edges = park.dataset.graph().edges();
  for (auto [u, v] : edges) cov += (g[u] - mean) * (g[v] - mean);
  cov /= static_cast<double>(edges.size());
  // squared-exponential kernel: correlation exp(-1 / (2 l^2)) = 0.946 at distance 1
  CHECK(cov / var > 0.85);
  CHECK(std::sqrt(var) > 0.5);
  CHECK(std::sqrt(var) < 4.0);
}

TEST_CASE("reactive patrols follow last month's detections") {
  GeneratorConfig c = default_config();
  c.patrol_mode = PatrolMode::reactive;
  const ParkDataset ds = generate_park(c);
  double with = 0, without = 0;
  long n_with = 0, n_without = 0;
  for (int t = 1; t < ds.month_count(); ++t)
    for (int i = 0; i < ds.cell_count(); ++i) {
      const double visits = static_cast<double>(ds.visits(i, t).size());
      if (monthly_label(ds, i, t - 1)) {
        with += visits;
        ++n_with;
      } else {
        without += visits;
        ++n_without;
      }
    }
  CHECK(with / n_with > 2.0 * (without / n_without));
}
