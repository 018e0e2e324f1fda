#include <benchmark/benchmark.h>

#include <map>
#include <vector>

#include "wildflow/eval.hpp"
#include "wildflow/flowmatch.hpp"
#include "wildflow/models.hpp"
#include "wildflow/occlik.hpp"
#include "wildflow/pipeline.hpp"
#include "wildflow/synthgen.hpp"

using namespace wildflow;

namespace {

Tensor random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor t({rows, cols});
  for (double& v : t.values()) v = rng.normal();
  return t;
}

const TrainingData& park_data(int side) {
  static std::map<int, TrainingData> cache;
  auto it = cache.find(side);
  if (it == cache.end()) {
    GeneratorConfig g = default_config();
    g.rows = side;
    g.cols = side;
    it = cache.emplace(side, prepare_training_data(window_split(generate_park(g), 2021).train)).first;
  }
  return it->second;
}

}  // namespace

static void BM_GcnForward(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const std::size_t n = static_cast<std::size_t>(side * side);
  Rng rng(1);
  const NormalizedAdjacency a = normalized_adjacency(build_grid_graph(side, side));
  const GcnParams p = GcnParams::init(10, 128, rng);
  const Tensor x = random_matrix(n, 10, rng);
  for (auto _ : state) benchmark::DoNotOptimize(gcn_forward(p, a, x, kLogitBound));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_GcnForward)->Arg(8)->Arg(16)->Arg(32)->Unit(benchmark::kMicrosecond);

static void BM_GcnBackward(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const std::size_t n = static_cast<std::size_t>(side * side);
  Rng rng(2);
  const NormalizedAdjacency a = normalized_adjacency(build_grid_graph(side, side));
  const GcnParams p = GcnParams::init(10, 128, rng);
  const Tensor x = random_matrix(n, 10, rng);
  for (auto _ : state) {
    Tape t;
    const GcnVars v = bind(t, p, true);
    Var out = gcn_forward(t, v, a, t.constant(x), kLogitBound);
    t.backward(sum(t, mul(t, out, out)));
    benchmark::DoNotOptimize(t.grad(v.w1));
  }
}
BENCHMARK(BM_GcnBackward)->Arg(8)->Arg(16)->Arg(32)->Unit(benchmark::kMicrosecond);

static void BM_BatchLikelihood(benchmark::State& state) {
  const std::size_t cells = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  VisitBatch batch;
  for (std::size_t i = 0; i < cells; ++i) {
    std::vector<std::uint8_t> y(rng.below(4));
    for (auto& v : y) v = rng.bernoulli(0.3) ? 1 : 0;
    batch.add_cell_month(y);
  }
  const Tensor psi = random_matrix(cells, 1, rng);
  const Tensor ell = random_matrix(batch.visit_count(), 1, rng);
  for (auto _ : state) {
    Tape t;
    Var a = t.parameter(psi), b = t.parameter(ell);
    t.backward(batch_negative_loglik(t, a, b, batch));
    benchmark::DoNotOptimize(t.grad(a));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(cells));
}
BENCHMARK(BM_BatchLikelihood)->Arg(256)->Arg(1024)->Arg(4096);

static void BM_Stage1Epoch(benchmark::State& state) {
  const TrainingData& data = park_data(static_cast<int>(state.range(0)));
  TrainConfig c;
  c.stage1_epochs = 1;
  for (auto _ : state) benchmark::DoNotOptimize(train_stage1(data, c));
}
BENCHMARK(BM_Stage1Epoch)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

static void BM_Stage2Epoch(benchmark::State& state) {
  const TrainingData& data = park_data(static_cast<int>(state.range(0)));
  TrainConfig c;
  c.stage1_epochs = 1;
  c.stage2_epochs = 1;
  const Stage1Result s1 = train_stage1(data, c);
  const auto targets = encoder_targets(data, s1.encoder);
  const LinearParams eta = LinearParams::zeros(static_cast<std::size_t>(data.static_dim + data.dynamic_dim + 2));
  for (auto _ : state) benchmark::DoNotOptimize(train_stage2_with_lr(data, targets, &eta, c, 1e-2));
}
BENCHMARK(BM_Stage2Epoch)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

static void BM_SampleRisk(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const TrainingData& data = park_data(side);
  Rng rng(4);
  const std::size_t cond = data.months.front().condition.matrix.cols();
  const GcnParams theta = GcnParams::init(4 + cond, 128, rng);
  const LinearParams eta = LinearParams::zeros(cond + 1);
  const PreparedMonth& m = data.months.front();
  FlowConfig f;
  for (auto _ : state)
    benchmark::DoNotOptimize(sample_risk(theta, &eta, data.adjacency, m.condition, m.adjacent_effort, f));
}
BENCHMARK(BM_SampleRisk)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

static void BM_Aupr(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  Rng rng(5);
  std::vector<double> scores(n);
  std::vector<std::uint8_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    scores[i] = rng.uniform();
    labels[i] = rng.bernoulli(0.3) ? 1 : 0;
  }
  for (auto _ : state) benchmark::DoNotOptimize(aupr(scores, labels));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_Aupr)->Arg(1 << 10)->Arg(1 << 14)->Arg(1 << 18);

BENCHMARK_MAIN();
