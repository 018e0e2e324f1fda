#include <doctest.h>

#include <cmath>
#include <limits>

#include "fixtures.hpp"
#include "wildflow/errors.hpp"
#include "wildflow/flowmatch.hpp"

using namespace wildflow;
using fixtures::random_tensor;

namespace {

ConditionContext context_of(Tensor m) {
  ConditionContext c;
  c.matrix = std::move(m);
  return c;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// dpsi/ds = cos(s) psi, psi(1) = psi0 exp(sin 1).
std::vector<double> analytic_flow(int steps, Integrator scheme) {
  const VelocityField field = [](std::span<const double> psi, double s) {
    std::vector<double> v(psi.begin(), psi.end());
    for (double& x : v) x *= std::cos(s);
    return v;
  };
  const std::vector<double> psi0{1.0, -0.5};
  return integrate_flow(field, psi0, steps, scheme);
}

double analytic_error(int steps, Integrator scheme) {
  const double e = std::exp(std::sin(1.0));
  const auto out = analytic_flow(steps, scheme);
  return std::max(std::abs(out[0] - e), std::abs(out[1] + 0.5 * e));
}

}  // namespace

TEST_CASE("composite base sampling") {
  Rng rng(4);
  LinearParams eta = LinearParams::zeros(3);
  eta.weight = random_tensor({3, 1}, rng);
  eta.bias[0] = 0.2;
  const ConditionContext c = context_of(random_tensor({5, 2}, rng));
  const std::vector<double> adj{1, 2, 3, 4, 5};
  Rng a(9);
  CHECK(sample_composite_base(eta, c, adj, 0.0, a) == linear_base_forward(eta, c, adj));

  Rng b1(12), b2(12);
  CHECK(sample_composite_base(eta, c, adj, 0.1, b1) == sample_composite_base(eta, c, adj, 0.1, b2));
}

TEST_CASE("composite base noise moments") {
  const LinearParams eta = LinearParams::zeros(2);
  const std::size_t n = 100000;
  const ConditionContext c = context_of(Tensor::zeros(n, 1));
  const std::vector<double> adj(n, 0.0);
  Rng rng(123);
  const auto psi = sample_composite_base(eta, c, adj, 1.0, rng);
  double mean = 0, sq = 0;
  for (double v : psi) mean += v;
  mean /= static_cast<double>(n);
  for (double v : psi) sq += (v - mean) * (v - mean);
  const double sd = std::sqrt(sq / static_cast<double>(n - 1));
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(sd - 1.0) < 0.02);
}

TEST_CASE("interpolation endpoints") {
  const std::vector<double> a{0.0, 1.0, -2.0}, b{2.0, 3.0, 2.0};
  CHECK(interpolate(a, b, 0.0) == a);
  CHECK(interpolate(a, b, 1.0) == b);
  CHECK(interpolate(a, b, 0.25)[0] == 0.5);
  CHECK_THROWS_AS(interpolate(a, std::vector<double>{1.0}, 0.5), InvalidArgument);
  CHECK_THROWS_AS(interpolate(a, b, 1.5), InvalidArgument);
}

TEST_CASE("flow matching loss examples") {
  GcnParams theta = GcnParams::zeros(5, 3);
  const NormalizedAdjacency one = normalized_adjacency(build_grid_graph(1, 1));
  theta.b2[0] = 1.75;
  const std::vector<double> psi0{-0.25}, psi1{1.5};
  CHECK(fm_loss(theta, one, psi0, psi1, 0.6, Tensor::zeros(1, 1)) == 0.0);

  const std::size_t n = 6;
  const NormalizedAdjacency grid = normalized_adjacency(build_grid_graph(2, 3));
  const std::vector<double> zeros(n, 0.0), ones(n, 1.0);
  CHECK(fm_loss(GcnParams::zeros(6, 4), grid, zeros, ones, 0.3, Tensor::zeros(n, 2)) ==
        doctest::Approx(static_cast<double>(n)));
}

TEST_CASE("flow matching loss gradient matches finite differences") {
  Rng rng(3);
  const NormalizedAdjacency a = normalized_adjacency(build_grid_graph(2, 2));
  const Tensor c = random_tensor({4, 2}, rng);
  for (int trial = 0; trial < 5; ++trial) {
    const GcnParams theta = GcnParams::init(6, 5, rng);
    std::vector<double> psi0(4), psi1(4);
    for (double& v : psi0) v = rng.normal();
    for (double& v : psi1) v = rng.normal();
    const double s = rng.uniform();
    const double err = fixtures::max_gradient_error(
        [&](Tape& t, const std::vector<Var>& v) { return fm_loss(t, GcnVars{v[0], v[1], v[2], v[3]}, a, psi0, psi1, s, c); },
        {theta.w1, theta.b1, theta.w2, theta.b2});
    CHECK(err < 1e-5);
  }
}

TEST_CASE("constant velocity integrates exactly") {
  GcnParams theta = GcnParams::zeros(5, 3);
  theta.b2[0] = 0.375;
  const NormalizedAdjacency a = normalized_adjacency(build_grid_graph(1, 3));
  const std::vector<double> psi0{0.5, -1.0, 2.0};
  for (Integrator scheme : {Integrator::euler, Integrator::rk4})
    for (int k : {1, 2, 7, 20, 64}) {
      const auto out = integrate_flow(theta, a, psi0, Tensor::zeros(3, 1), k, scheme);
      for (std::size_t i = 0; i < 3; ++i) CHECK(out[i] == doctest::Approx(psi0[i] + 0.375).epsilon(1e-14));
    }
}

TEST_CASE("identity field gives e") {
  const VelocityField identity = [](std::span<const double> psi, double) {
    return std::vector<double>(psi.begin(), psi.end());
  };
  const std::vector<double> one{1.0};
  const double e = std::exp(1.0);
  CHECK(std::abs(integrate_flow(identity, one, 1000, Integrator::euler)[0] - e) / e < 0.005);
  CHECK(integrate_flow(identity, one, 20, Integrator::rk4)[0] == doctest::Approx(e).epsilon(1e-6));
}

TEST_CASE("observed convergence orders") {
  const double euler_order = std::log2(analytic_error(20, Integrator::euler) / analytic_error(40, Integrator::euler));
  CHECK(std::abs(euler_order - 1.0) <= 0.3);
  const double rk4_order = std::log2(analytic_error(4, Integrator::rk4) / analytic_error(8, Integrator::rk4));
  CHECK(std::abs(rk4_order - 4.0) <= 0.3);
}

TEST_CASE("euler step doubling on a network field") {
  Rng rng(8);
  GcnParams theta = GcnParams::init(5, 16, rng);
  for (double& v : theta.w2.values()) v *= 0.5;
  const NormalizedAdjacency a = normalized_adjacency(build_grid_graph(3, 3));
  const Tensor c = random_tensor({9, 1}, rng);
  std::vector<double> psi0(9);
  for (double& v : psi0) v = rng.normal();
  const auto k1 = integrate_flow(theta, a, psi0, c, 40, Integrator::euler);
  const auto k2 = integrate_flow(theta, a, psi0, c, 80, Integrator::euler);
  const auto k4 = integrate_flow(theta, a, psi0, c, 160, Integrator::euler);
  const double ratio = max_abs_diff(k1, k2) / max_abs_diff(k2, k4);
  CHECK(ratio > 1.7);
  CHECK(ratio < 2.3);
}

TEST_CASE("non-finite state reports the step") {
  const VelocityField blowup = [](std::span<const double> psi, double s) {
    std::vector<double> v(psi.size(), s > 0.45 ? std::numeric_limits<double>::infinity() : 0.0);
    return v;
  };
  try {
    integrate_flow(blowup, std::vector<double>{0.0}, 10, Integrator::euler);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(e.step() == 6);
  }
  CHECK_THROWS_AS(integrate_flow(blowup, std::vector<double>{0.0}, 0, Integrator::euler), InvalidArgument);
}

namespace {

struct RiskSetup {
  NormalizedAdjacency adjacency = normalized_adjacency(build_grid_graph(3, 3));
  ConditionContext condition;
  std::vector<double> adj;
  LinearParams eta = LinearParams::zeros(3);
  GcnParams theta;

  explicit RiskSetup(std::uint64_t seed) {
    Rng rng(seed);
    condition = context_of(random_tensor({9, 2}, rng));
    for (int i = 0; i < 9; ++i) adj.push_back(rng.uniform());
    eta.weight = random_tensor({3, 1}, rng);
    theta = GcnParams::init(6, 8, rng);
  }

  std::vector<double> risk(const FlowConfig& cfg, bool composite = true) const {
    return sample_risk(theta, composite ? &eta : nullptr, adjacency, condition, adj, cfg);
  }
};

}  // namespace

TEST_CASE("risk sampling examples") {
  const RiskSetup s(5);
  FlowConfig cfg;
  cfg.sigma0 = 0.0;
  cfg.mc_samples = 6;
  const auto r = s.risk(cfg);
  cfg.mc_samples = 1;
  const auto single = s.risk(cfg);
  CHECK(max_abs_diff(r, single) < 1e-15);
  const auto psi1 = integrate_flow(s.theta, s.adjacency, linear_base_forward(s.eta, s.condition, s.adj),
                                   s.condition.matrix, cfg.steps, cfg.scheme);
  for (std::size_t i = 0; i < 9; ++i) CHECK(r[i] == doctest::Approx(sigmoid(std::clamp(psi1[i], -10.0, 10.0))));

  cfg.sigma0 = 0.3;
  cfg.seed = 77;
  CHECK(s.risk(cfg) == s.risk(cfg));

  const LinearParams zero_eta = LinearParams::zeros(3);
  FlowConfig zc;
  zc.sigma0 = 0.0;
  for (double v : sample_risk(GcnParams::zeros(6, 8), &zero_eta, s.adjacency, s.condition, s.adj, zc))
    CHECK(v == 0.5);
}

TEST_CASE("risk stays strictly inside the unit interval") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    RiskSetup s(seed);
    for (double& v : s.theta.b2.values()) v = 100.0;
    for (bool composite : {true, false})
      for (double r : s.risk(FlowConfig{}, composite)) {
        CHECK(r > 0.0);
        CHECK(r < 1.0);
      }
  }
}

TEST_CASE("doubling the draw count leaves the expectation unchanged") {
  const RiskSetup s(11);
  FlowConfig cfg;
  cfg.sigma0 = 1.0;
  // per-cell spread of single draws
  std::vector<double> mean(9, 0.0), sq(9, 0.0);
  const int draws = 200;
  for (int k = 0; k < draws; ++k) {
    FlowConfig one = cfg;
    one.mc_samples = 1;
    one.seed = 1000 + static_cast<std::uint64_t>(k);
    const auto r = s.risk(one);
    for (std::size_t i = 0; i < 9; ++i) {
      mean[i] += r[i] / draws;
      sq[i] += r[i] * r[i] / draws;
    }
  }
  const int m = 16;
  cfg.mc_samples = m;
  cfg.seed = 1;
  const auto rm = s.risk(cfg);
  cfg.mc_samples = 2 * m;
  cfg.seed = 2;
  const auto r2m = s.risk(cfg);
  for (std::size_t i = 0; i < 9; ++i) {
    const double sd = std::sqrt(std::max(sq[i] - mean[i] * mean[i], 0.0));
    CHECK(std::abs(rm[i] - r2m[i]) <= 3.0 * sd / std::sqrt(static_cast<double>(m)) + 1e-12);
  }
}

TEST_CASE("gaussian base ignores the linear predictor") {
  RiskSetup s(2);
  FlowConfig cfg;
  const auto before = s.risk(cfg, false);
  s.eta.bias[0] = 50.0;
  CHECK(s.risk(cfg, false) == before);
  CHECK_FALSE(s.risk(cfg, true) == before);
}

TEST_CASE("flow config validation") {
  FlowConfig c;
  CHECK_NOTHROW(c.validate());
  c.steps = 0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = FlowConfig{};
  c.mc_samples = 0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = FlowConfig{};
  c.sigma0 = -0.1;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  CHECK(integrator_from_string("rk4") == Integrator::rk4);
  CHECK_THROWS_AS(integrator_from_string("heun"), InvalidArgument);
}
