#include <doctest.h>

#include <cstdlib>
#include <set>

#include "fixtures.hpp"
#include "wildflow/errors.hpp"
#include "wildflow/park_data.hpp"
#include "wildflow/synthgen.hpp"

using namespace wildflow;
using fixtures::tiny_dataset;

TEST_CASE("grid graph sizes") {
  CHECK(build_grid_graph(1, 1).node_count() == 1);
  CHECK(build_grid_graph(1, 1).edges().empty());
  CHECK(build_grid_graph(2, 2).edges().size() == 4);
  const GridGraph g = build_grid_graph(3, 4);
  CHECK(g.node_count() == 12);
  CHECK(g.edges().size() == static_cast<std::size_t>(3 * 3 + 4 * 2));
  CHECK_THROWS_AS(build_grid_graph(0, 3), InvalidArgument);
}

TEST_CASE("grid edges join Manhattan neighbours only") {
  for (auto [rows, cols] : {std::pair{2, 2}, std::pair{3, 4}, std::pair{5, 7}}) {
    const GridGraph g = build_grid_graph(rows, cols);
    std::set<std::pair<int, int>> seen;
    for (auto [u, v] : g.edges()) {
      CHECK(u < v);
      CHECK(std::abs(g.row_of(u) - g.row_of(v)) + std::abs(g.col_of(u) - g.col_of(v)) == 1);
      CHECK(seen.insert({u, v}).second);
    }
    for (int i = 0; i < g.node_count(); ++i) {
      CHECK(g.degree(i) >= 2);
      CHECK(g.degree(i) <= 4);
      for (int j : g.neighbors(i)) CHECK(j != i);
    }
  }
}

TEST_CASE("aggregate effort and monthly label") {
  const ParkDataset ds = tiny_dataset(1, 3, 2,
                                      {{0, 0, 1.5, false},
                                       {0, 0, 2.0, false},
                                       {1, 0, 0.0, false},
                                       {1, 0, 0.0, false},
                                       {1, 0, 4.25, true},
                                       {2, 1, 1.0, false},
                                       {2, 1, 1.0, false}});
  CHECK(aggregate_monthly_effort(ds, 0, 0) == 3.5);
  CHECK(aggregate_monthly_effort(ds, 2, 0) == 0.0);
  CHECK(aggregate_monthly_effort(ds, 1, 0) == 4.25);
  CHECK(monthly_label(ds, 1, 0));
  CHECK_FALSE(monthly_label(ds, 2, 1));
  CHECK_FALSE(monthly_label(ds, 0, 1));
}

TEST_CASE("label equals max of visit outcomes on a generated park") {
  GeneratorConfig c = fixtures::small_park_config(5, 6, 6);
  c.months = 6;
  const ParkDataset ds = generate_park(c);
  for (int t = 0; t < ds.month_count(); ++t) {
    for (int i = 0; i < ds.cell_count(); ++i) {
      bool any = false;
      double sum = 0.0;
      for (const VisitRecord& v : ds.visits(i, t)) {
        any = any || v.detected;
        sum += v.effort_km;
        CHECK(v.effort_km >= 0.0);
      }
      CHECK(monthly_label(ds, i, t) == any);
      CHECK(aggregate_monthly_effort(ds, i, t) == sum);
    }
  }
}

TEST_CASE("condition context carries lagged effort") {
  const ParkDataset ds = tiny_dataset(1, 2, 3, {{0, 0, 2.0, false}, {0, 0, 3.0, true}, {1, 1, 1.0, false}}, 4, 6);
  const ConditionContext first = assemble_condition(ds, 0);
  CHECK(first.matrix.cols() == 11);
  CHECK(first.matrix(0, 10) == 0.0);
  CHECK(first.matrix(1, 10) == 0.0);
  const ConditionContext second = assemble_condition(ds, 1);
  CHECK(second.matrix(0, 10) == 5.0);
  CHECK(second.matrix(1, 10) == 0.0);
  CHECK(lagged_effort(ds, 0, 1) == 5.0);
  for (int j = 0; j < 10; ++j) CHECK(second.matrix(1, j) == ds.features(1, 1)[j]);
}

TEST_CASE("encoder context carries the current label and effort") {
  const ParkDataset ds = tiny_dataset(1, 2, 2, {{0, 1, 2.0, false}, {0, 1, 3.0, true}}, 4, 6);
  const EncoderContext ctx = assemble_encoder_context(ds, 1);
  CHECK(ctx.matrix.cols() == 12);
  CHECK(ctx.matrix(0, 10) == 1.0);
  CHECK(ctx.matrix(0, 11) == 5.0);
  CHECK(ctx.matrix(1, 10) == 0.0);
  CHECK(ctx.matrix(1, 11) == 0.0);
}

TEST_CASE("adjacent lagged effort sums neighbours") {
  const ParkDataset ds = tiny_dataset(1, 3, 2, {{0, 0, 2.0, false}, {2, 0, 1.0, false}, {1, 0, 7.0, false}});
  const std::vector<double> adj = adjacent_lagged_effort(ds, 1);
  CHECK(adj == std::vector<double>{7.0, 3.0, 7.0});
}

ParkDataset yearly_dataset(int first_year, int last_year) {
  return tiny_dataset(2, 2, 12 * (last_year - first_year + 1), {}, 1, 1, {first_year, 1});
}

TEST_CASE("three-year training window") {
  const ParkDataset ds = yearly_dataset(2014, 2021);
  const TrainTestSplit split = window_split(ds, 2017);
  CHECK(split.train.months().front() == YearMonth{2014, 1});
  CHECK(split.train.months().back() == YearMonth{2016, 12});
  CHECK(split.test.months().front() == YearMonth{2017, 1});
  CHECK(split.test.months().back() == YearMonth{2017, 12});
  CHECK(split.train.month_count() + split.test.month_count() == 48);

  const TrainTestSplit qenp = window_split(yearly_dataset(2011, 2016), 2014);
  CHECK(qenp.train.years() == std::vector<int>{2011, 2012, 2013});
  CHECK(qenp.test.years() == std::vector<int>{2014});

  CHECK_THROWS_AS(window_split(ds, 2014), InvalidArgument);
  CHECK_THROWS_AS(window_split(ds, 2030), InvalidArgument);
}

TEST_CASE("window split carries the lag month into the test slice") {
  const ParkDataset ds = tiny_dataset(1, 2, 24, {{1, 11, 4.0, false}}, 1, 1, {2020, 1});
  const TrainTestSplit split = window_split(ds, 2021, 1);
  CHECK(lagged_effort(split.test, 1, 0) == 4.0);
}

TEST_CASE("region with no growth is the top cell") {
  const ParkDataset ds = tiny_dataset(2, 2, 1, {{3, 0, 1.0, true}, {3, 0, 1.0, true}, {1, 0, 1.0, true}});
  const auto regions = select_high_risk_regions(ds, 1, 1);
  REQUIRE(regions.size() == 1);
  CHECK(regions[0] == std::vector<int>{3});
}

TEST_CASE("greedy region growth by count then index") {
  std::vector<fixtures::VisitSpec> visits;
  for (int k = 0; k < 5; ++k) visits.push_back({0, 0, 1.0, true});
  visits.push_back({1, 0, 1.0, true});
  const ParkDataset ds = tiny_dataset(2, 2, 1, visits);
  const auto regions = select_high_risk_regions(ds, 1, 3);
  REQUIRE(regions.size() == 1);
  std::vector<int> region = regions[0];
  std::sort(region.begin(), region.end());
  CHECK(region == std::vector<int>{0, 1, 2});
}

TEST_CASE("regions on a synthetic park are bounded and deterministic") {
  const ParkDataset ds = generate_park(default_config());
  const auto regions = select_high_risk_regions(ds, 20, 25);
  CHECK(regions.size() == 20);
  for (const auto& r : regions) {
    CHECK(r.size() <= 25);
    CHECK(std::set<int>(r.begin(), r.end()).size() == r.size());
  }
  CHECK(select_high_risk_regions(ds, 20, 25) == regions);
}

TEST_CASE("standardization is finite and centres features") {
  GeneratorConfig c = fixtures::small_park_config(8, 6, 6);
  c.months = 12;
  const ParkDataset ds = generate_park(c);
  const FeatureStats stats = fit_feature_stats(ds);
  const ParkDataset z = standardize(ds, stats);
  for (int j = 0; j < z.feature_dim(); ++j) {
    double mean = 0;
    int count = 0;
    for (int t = 0; t < z.month_count(); ++t)
      for (int i = 0; i < z.cell_count(); ++i) {
        const double v = z.features(i, t)[j];
        CHECK(std::isfinite(v));
        mean += v;
        ++count;
      }
    CHECK(std::abs(mean / count) < 1e-9);
  }
}

TEST_CASE("constructor rejects inconsistent inputs") {
  CHECK_THROWS_AS(tiny_dataset(1, 2, 2, {{5, 0, 1.0, false}}), InvalidArgument);
  CHECK_THROWS_AS(tiny_dataset(1, 2, 2, {{0, 0, -1.0, false}}), InvalidArgument);
  CHECK_THROWS_AS(tiny_dataset(1, 2, 2, {{0, 3, 1.0, false}}), InvalidArgument);
}
