#include "wildflow/pipeline.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

#include "wildflow/errors.hpp"
#include "wildflow/optim.hpp"

namespace wildflow {

namespace {

// Stream tags for derive_seed.
enum : std::uint64_t {
  kStage1Init = 101,
  kStage2Init = 102,
  kStage2Noise = 103,
  kMlpInit = 104,
  kMlpShuffle = 105,
  kMlpDropout = 106,
  kGnnInit = 107,
  kInference = 108,
};

constexpr const char* kKindNames[] = {"wildflow", "logreg", "mlp", "gnn", "wildflow_no_base", "wildflow_no_det"};

}  // namespace

std::string to_string(ModelKind kind) { return kKindNames[static_cast<int>(kind)]; }

ModelKind model_kind_from_string(const std::string& name) {
  for (int k = 0; k < 6; ++k)
    if (name == kKindNames[k]) return static_cast<ModelKind>(k);
  if (name == "no_composite_base") return ModelKind::wildflow_no_base;
  if (name == "no_detection_head") return ModelKind::wildflow_no_det;
  throw InvalidArgument("unknown model kind '" + name + "'");
}

bool is_flow_kind(ModelKind kind) noexcept {
  return kind == ModelKind::wildflow || kind == ModelKind::wildflow_no_base || kind == ModelKind::wildflow_no_det;
}

void TrainConfig::validate() const {
  auto positive_int = [](int v, const char* name) {
    if (v < 1) throw InvalidArgument(std::string(name) + " must be >= 1");
  };
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw InvalidArgument(std::string(name) + " must be positive");
  };
  auto nonnegative = [](double v, const char* name) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidArgument(std::string(name) + " must be >= 0");
  };
  positive_int(stage1_epochs, "stage1 epochs");
  positive(stage1_lr, "stage1 lr");
  positive_int(stage2_epochs, "stage2 epochs");
  if (stage2_lr_grid.empty()) throw InvalidArgument("stage2 lr grid is empty");
  for (double lr : stage2_lr_grid) positive(lr, "stage2 lr");
  positive_int(hidden, "hidden");
  if (layers != 2) throw InvalidArgument("only 2-layer graph networks are supported, got layers=" + std::to_string(layers));
  positive(grad_clip, "grad_clip");
  nonnegative(sigma0, "sigma0");
  nonnegative(weight_decay, "weight_decay");
  positive_int(logreg_max_steps, "logreg max steps");
  positive(logreg_lr, "logreg lr");
  positive(logreg_tolerance, "logreg tolerance");
  positive_int(mlp_epochs, "mlp epochs");
  positive(mlp_lr, "mlp lr");
  positive_int(mlp_batch, "mlp batch");
  positive_int(mlp_hidden, "mlp hidden width");
  positive_int(mlp_layers, "mlp layers");
  if (!(mlp_dropout >= 0.0 && mlp_dropout < 1.0)) throw InvalidArgument("mlp dropout must be in [0,1)");
  nonnegative(mlp_weight_decay, "mlp weight_decay");
  positive_int(gnn_epochs, "gnn epochs");
  positive(gnn_lr, "gnn lr");
}

// ---------------------------------------------------------------- data preparation

PreparedMonth prepare_month(const ParkDataset& dataset, int month, const FeatureStats& stats) {
  const std::size_t n = static_cast<std::size_t>(dataset.cell_count());
  const std::size_t d = static_cast<std::size_t>(dataset.feature_dim());
  if (stats.mean.size() != d || stats.sd.size() != d) {
    throw InvalidArgument("feature stats cover " + std::to_string(stats.mean.size()) + " features, dataset has " +
                          std::to_string(d));
  }
  Tensor x = dataset.feature_matrix(month);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const double sd = stats.sd[j] > 1e-12 ? stats.sd[j] : 1.0;
      x(i, j) = (x(i, j) - stats.mean[j]) / sd;
    }

  PreparedMonth pm;
  pm.month = month;
  pm.condition.month = month;
  pm.condition.matrix = Tensor::zeros(n, d + 1);
  pm.encoder_context = Tensor::zeros(n, d + 2);
  for (std::size_t i = 0; i < n; ++i) {
    const int cell = static_cast<int>(i);
    for (std::size_t j = 0; j < d; ++j) {
      pm.condition.matrix(i, j) = x(i, j);
      pm.encoder_context(i, j) = x(i, j);
    }
    pm.condition.matrix(i, d) = lagged_effort(dataset, cell, month);
    pm.encoder_context(i, d) = monthly_label(dataset, cell, month) ? 1.0 : 0.0;
    pm.encoder_context(i, d + 1) = aggregate_monthly_effort(dataset, cell, month);
  }
  pm.adjacent_effort = adjacent_lagged_effort(dataset, month);
  pm.base_inputs = linear_base_inputs(pm.condition, pm.adjacent_effort);
  pm.visits = month_visit_batch(dataset, month);

  pm.visit_inputs = Tensor::zeros(pm.visits.visit_count(), d + 1);
  std::size_t row = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (const VisitRecord& v : dataset.visits(static_cast<int>(i), month)) {
      for (std::size_t j = 0; j < d; ++j) pm.visit_inputs(row, j) = x(i, j);
      pm.visit_inputs(row, d) = v.effort_km;
      ++row;
    }
  }
  return pm;
}

TrainingData prepare_training_data(const ParkDataset& train) {
  if (train.month_count() == 0 || train.cell_count() == 0) throw InvalidArgument("training split is empty");
  TrainingData data;
  data.stats = fit_feature_stats(train);
  data.graph = train.graph();
  data.adjacency = normalized_adjacency(train.graph());
  data.static_dim = train.static_dim();
  data.dynamic_dim = train.dynamic_dim();
  data.feature_names = train.columns().static_names;
  data.feature_names.insert(data.feature_names.end(), train.columns().dynamic_names.begin(),
                            train.columns().dynamic_names.end());
  for (int t = 0; t < train.month_count(); ++t) data.months.push_back(prepare_month(train, t, data.stats));
  return data;
}

namespace {

// ---------------------------------------------------------------- training helpers

struct Trainable {
  std::vector<Tensor*> params;
  std::vector<Var> vars;
};

void add_trainable(Trainable& t, Tape& tape, const NamedTensors& named) {
  for (const auto& [name, tensor] : named) {
    t.params.push_back(tensor);
    t.vars.push_back(tape.parameter(*tensor));
  }
}

Var var_at(const Trainable& t, std::size_t k) { return t.vars.at(k); }

LinearVars linear_vars(const Trainable& t, std::size_t first) { return {var_at(t, first), var_at(t, first + 1)}; }

GcnVars gcn_vars(const Trainable& t, std::size_t first) {
  return {var_at(t, first), var_at(t, first + 1), var_at(t, first + 2), var_at(t, first + 3)};
}

/// Backward, clip, AdamW step. Returns the loss value.
double optimizer_step(Tape& tape, Var loss, const Trainable& trainable, AdamW& opt, double clip,
                      const std::string& where) {
  const double value = tape.value(loss).item();
  if (!std::isfinite(value)) throw NumericError("non-finite loss at " + where, opt.step_count() + 1);
  tape.backward(loss);
  std::vector<Tensor> grads;
  grads.reserve(trainable.vars.size());
  for (Var v : trainable.vars) grads.push_back(tape.grad(v));
  if (clip > 0.0) clip_grad_norm(grads, clip);
  opt.step(trainable.params, grads);
  return value;
}

std::string where(const char* stage, int epoch, int month) {
  return std::string(stage) + " epoch " + std::to_string(epoch) + " month " + std::to_string(month);
}

/// All months stacked into one design for the per-cell models.
struct StackedData {
  Tensor base_inputs;   // K x (d+2)
  Tensor visit_inputs;  // V x (d+1)
  VisitBatch visits;
};

StackedData stack_months(const TrainingData& data) {
  std::size_t k_total = 0, v_total = 0, width = 0, vwidth = 0;
  for (const PreparedMonth& m : data.months) {
    k_total += m.base_inputs.rows();
    v_total += m.visit_inputs.rows();
    width = m.base_inputs.cols();
    vwidth = m.visit_inputs.cols();
  }
  StackedData s{Tensor::zeros(k_total, width), Tensor::zeros(v_total, vwidth), {}};
  std::size_t kr = 0, vr = 0;
  for (const PreparedMonth& m : data.months) {
    std::copy(m.base_inputs.data().begin(), m.base_inputs.data().end(), s.base_inputs.data().begin() + kr * width);
    std::copy(m.visit_inputs.data().begin(), m.visit_inputs.data().end(), s.visit_inputs.data().begin() + vr * vwidth);
    kr += m.base_inputs.rows();
    vr += m.visit_inputs.rows();
    for (std::size_t k = 0; k < m.visits.cell_months(); ++k) {
      const auto begin = m.visits.detected.begin() + static_cast<std::ptrdiff_t>(m.visits.offsets[k]);
      const auto end = m.visits.detected.begin() + static_cast<std::ptrdiff_t>(m.visits.offsets[k + 1]);
      s.visits.add_cell_month(std::vector<std::uint8_t>(begin, end));
    }
  }
  return s;
}

bool any_detection(const TrainingData& data) {
  for (const PreparedMonth& m : data.months)
    for (std::uint8_t y : m.visits.detected)
      if (y) return true;
  return false;
}

std::size_t total_cell_months(const TrainingData& data) {
  std::size_t k = 0;
  for (const PreparedMonth& m : data.months) k += m.visits.cell_months();
  return k;
}

}  // namespace

// ---------------------------------------------------------------- linear base / logreg

LinearFit pretrain_linear_base(const TrainingData& data, const TrainConfig& config) {
  config.validate();
  if (data.months.empty()) throw InvalidArgument("training split is empty");
  const StackedData stacked = stack_months(data);
  const double inv_k = 1.0 / static_cast<double>(stacked.visits.cell_months());

  LinearFit fit;
  fit.degenerate = !any_detection(data);
  fit.occupancy = LinearParams::zeros(stacked.base_inputs.cols());
  fit.detection = LinearParams::zeros(stacked.visit_inputs.cols());
  AdamW opt({.lr = config.logreg_lr, .weight_decay = 0.0});

  for (int step = 1; step <= config.logreg_max_steps; ++step) {
    // cosine-decayed learning rate
    const double progress = static_cast<double>(step - 1) / config.logreg_max_steps;
    opt.set_lr(config.logreg_lr * (0.001 + 0.999 * 0.5 * (1.0 + std::cos(std::numbers::pi * progress))));
    Tape tape;
    Trainable tr;
    add_trainable(tr, tape, fit.occupancy.tensors("base"));
    add_trainable(tr, tape, fit.detection.tensors("detection"));
    Var psi = clip(tape, linear_forward(tape, linear_vars(tr, 0), tape.constant(stacked.base_inputs)), kLogitBound);
    Var ell = detection_logits(tape, linear_vars(tr, 2), tape.constant(stacked.visit_inputs));
    Var loss = scale(tape, batch_negative_loglik(tape, psi, ell, stacked.visits), inv_k);
    const double value = tape.value(loss).item();
    if (!std::isfinite(value)) throw NumericError("non-finite loss in linear base fit", static_cast<std::size_t>(step));
    tape.backward(loss);
    std::vector<Tensor> grads;
    for (Var v : tr.vars) grads.push_back(tape.grad(v));
    fit.loss = value;
    fit.steps = step;
    fit.grad_norm = global_norm(grads);
    fit.log.push_back({step, "linear", value});
    if (fit.grad_norm < config.logreg_tolerance) break;
    opt.step(tr.params, grads);
  }
  return fit;
}

// ---------------------------------------------------------------- stage 1

Stage1Result train_stage1(const TrainingData& data, const TrainConfig& config, Stage1Objective objective) {
  config.validate();
  if (data.months.empty()) throw InvalidArgument("training split is empty");
  const std::size_t d = static_cast<std::size_t>(data.static_dim + data.dynamic_dim);
  Rng init(derive_seed(config.seed, kStage1Init));
  Stage1Result result;
  result.encoder = GcnParams::init(d + 2, static_cast<std::size_t>(config.hidden), init);
  const bool with_detection = objective == Stage1Objective::occupancy;
  if (with_detection) result.detection = LinearParams::zeros(d + 1);

  AdamW opt({.lr = config.stage1_lr, .weight_decay = config.weight_decay});
  for (int epoch = 1; epoch <= config.stage1_epochs; ++epoch) {
    double total = 0.0;
    for (const PreparedMonth& m : data.months) {
      Tape tape;
      Trainable tr;
      add_trainable(tr, tape, result.encoder.tensors("encoder"));
      if (with_detection) add_trainable(tr, tape, result.detection->tensors("detection"));
      Var psi = gcn_forward(tape, gcn_vars(tr, 0), data.adjacency, tape.constant(m.encoder_context), kLogitBound);
      Var nll = with_detection
                    ? batch_negative_loglik(tape, psi,
                                            detection_logits(tape, linear_vars(tr, 4), tape.constant(m.visit_inputs)),
                                            m.visits)
                    : certain_detection_negative_loglik(tape, psi, m.visits);
      Var loss = scale(tape, nll, 1.0 / static_cast<double>(m.visits.cell_months()));
      total += optimizer_step(tape, loss, tr, opt, config.grad_clip, where("stage1", epoch, m.month));
    }
    result.log.push_back({epoch, "stage1", total / static_cast<double>(data.months.size())});
  }
  return result;
}

std::vector<std::vector<double>> encoder_targets(const TrainingData& data, const GcnParams& encoder) {
  std::vector<std::vector<double>> targets;
  targets.reserve(data.months.size());
  for (const PreparedMonth& m : data.months)
    targets.push_back(gcn_forward(encoder, data.adjacency, m.encoder_context, kLogitBound));
  return targets;
}

// ---------------------------------------------------------------- stage 2

Stage2Result train_stage2_with_lr(const TrainingData& data, std::span<const std::vector<double>> targets,
                                  const LinearParams* eta, const TrainConfig& config, double lr) {
  config.validate();
  if (targets.size() != data.months.size()) {
    throw InvalidArgument("need one target vector per training month, got " + std::to_string(targets.size()) +
                          " for " + std::to_string(data.months.size()));
  }
  const std::size_t width = data.months.front().condition.matrix.cols() + 4;
  Rng init(derive_seed(config.seed, kStage2Init));
  Rng noise(derive_seed(config.seed, kStage2Noise));
  Stage2Result result;
  result.lr = lr;
  result.velocity = GcnParams::init(width, static_cast<std::size_t>(config.hidden), init);

  AdamW opt({.lr = lr, .weight_decay = config.weight_decay});
  for (int epoch = 1; epoch <= config.stage2_epochs; ++epoch) {
    double total = 0.0;
    for (std::size_t k = 0; k < data.months.size(); ++k) {
      const PreparedMonth& m = data.months[k];
      const std::size_t n = m.condition.matrix.rows();
      if (targets[k].size() != n) throw InvalidArgument("target length does not match the graph");
      const std::vector<double> psi0 = eta ? sample_composite_base(*eta, m.condition, m.adjacent_effort,
                                                                   config.sigma0, noise)
                                           : sample_gaussian_base(n, noise);
      const double s = noise.uniform();
      Tape tape;
      Trainable tr;
      add_trainable(tr, tape, result.velocity.tensors("velocity"));
      Var fm = fm_loss(tape, gcn_vars(tr, 0), data.adjacency, psi0, targets[k], s, m.condition.matrix);
      Var loss = scale(tape, fm, 1.0 / static_cast<double>(n));
      total += optimizer_step(tape, loss, tr, opt, config.grad_clip, where("stage2", epoch, m.month));
    }
    result.final_loss = total / static_cast<double>(data.months.size());
    result.log.push_back({epoch, "stage2", result.final_loss});
  }
  return result;
}

Stage2Result train_stage2(const TrainingData& data, std::span<const std::vector<double>> targets,
                          const LinearParams* eta, const TrainConfig& config) {
  config.validate();
  std::optional<Stage2Result> best;
  for (double lr : config.stage2_lr_grid) {
    Stage2Result r = train_stage2_with_lr(data, targets, eta, config, lr);
    if (!best || r.final_loss < best->final_loss) best = std::move(r);
  }
  return std::move(*best);
}

Stage2Result train_stage2(const TrainingData& data, const GcnParams& encoder, const LinearParams* eta,
                          const TrainConfig& config) {
  const auto targets = encoder_targets(data, encoder);
  return train_stage2(data, targets, eta, config);
}

// ---------------------------------------------------------------- trained model

namespace {

void require(bool present, bool wanted, const char* bundle, ModelKind kind) {
  if (present != wanted) {
    throw InvalidArgument("model kind " + to_string(kind) + (wanted ? " requires " : " must not carry ") + bundle);
  }
}

void check_width(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw InvalidArgument(std::string(what) + " expects input width " + std::to_string(got) + ", model has " +
                          std::to_string(want));
  }
}

template <typename Bundle, typename Out>
void append(Out& out, Bundle& bundle, const char* prefix) {
  if (!bundle) return;
  auto named = bundle->tensors(prefix);
  out.insert(out.end(), named.begin(), named.end());
}

}  // namespace

void TrainedModel::validate() const {
  const bool flow = is_flow_kind(kind);
  require(base.has_value(), kind == ModelKind::wildflow || kind == ModelKind::wildflow_no_det ||
                                kind == ModelKind::logreg,
          "a linear base", kind);
  require(detection.has_value(), kind != ModelKind::wildflow_no_det, "a detection head", kind);
  require(encoder.has_value(), flow, "an encoder", kind);
  require(velocity.has_value(), flow, "a velocity field", kind);
  require(gnn.has_value(), kind == ModelKind::gnn, "a gnn", kind);
  require(mlp.has_value(), kind == ModelKind::mlp, "an mlp", kind);
  const std::size_t d = static_cast<std::size_t>(feature_dim());
  if (stats.mean.size() != d || stats.sd.size() != d) throw InvalidArgument("feature stats do not match feature_dim");
  if (base) check_width(base->width(), d + 2, "linear base");
  if (detection) check_width(detection->width(), d + 1, "detection head");
  if (encoder) check_width(encoder->input_width(), d + 2, "encoder");
  if (velocity) check_width(velocity->input_width(), d + 5, "velocity field");
  if (gnn) check_width(gnn->input_width(), d + 1, "gnn");
  if (mlp) check_width(mlp->input_width(), d + 2, "mlp");
}

ConstNamedTensors TrainedModel::tensors() const {
  ConstNamedTensors out;
  append(out, base, "base");
  append(out, detection, "detection");
  append(out, encoder, "encoder");
  append(out, velocity, "velocity");
  append(out, gnn, "gnn");
  append(out, mlp, "mlp");
  return out;
}

NamedTensors TrainedModel::tensors() {
  NamedTensors out;
  append(out, base, "base");
  append(out, detection, "detection");
  append(out, encoder, "encoder");
  append(out, velocity, "velocity");
  append(out, gnn, "gnn");
  append(out, mlp, "mlp");
  return out;
}

FlowConfig default_flow_config(const TrainConfig& config) {
  FlowConfig f;
  f.sigma0 = config.sigma0;
  f.seed = derive_seed(config.seed, kInference);
  return f;
}

TrainedModel model_skeleton(ModelKind kind, const TrainingData& data, const TrainConfig& config) {
  TrainedModel m;
  m.kind = kind;
  m.stats = data.stats;
  m.grid_rows = data.graph.rows();
  m.grid_cols = data.graph.cols();
  m.static_dim = data.static_dim;
  m.dynamic_dim = data.dynamic_dim;
  m.feature_names = data.feature_names;
  m.train_config = config;
  m.flow = default_flow_config(config);
  return m;
}

namespace {

void append_log(std::vector<LogEntry>& log, const std::vector<LogEntry>& more) {
  log.insert(log.end(), more.begin(), more.end());
}

TrainedModel train_logreg(const TrainingData& data, const TrainConfig& config) {
  TrainedModel m = model_skeleton(ModelKind::logreg, data, config);
  LinearFit fit = pretrain_linear_base(data, config);
  m.base = std::move(fit.occupancy);
  m.detection = std::move(fit.detection);
  m.log = std::move(fit.log);
  return m;
}

TrainedModel train_gnn(const TrainingData& data, const TrainConfig& config) {
  TrainedModel m = model_skeleton(ModelKind::gnn, data, config);
  const std::size_t d = static_cast<std::size_t>(data.static_dim + data.dynamic_dim);
  Rng init(derive_seed(config.seed, kGnnInit));
  GcnParams gnn = GcnParams::init(d + 1, static_cast<std::size_t>(config.hidden), init);
  LinearParams det = LinearParams::zeros(d + 1);
  AdamW opt({.lr = config.gnn_lr, .weight_decay = config.weight_decay});
  for (int epoch = 1; epoch <= config.gnn_epochs; ++epoch) {
    double total = 0.0;
    for (const PreparedMonth& pm : data.months) {
      Tape tape;
      Trainable tr;
      add_trainable(tr, tape, gnn.tensors("gnn"));
      add_trainable(tr, tape, det.tensors("detection"));
      Var psi = gcn_forward(tape, gcn_vars(tr, 0), data.adjacency, tape.constant(pm.condition.matrix), kLogitBound);
      Var ell = detection_logits(tape, linear_vars(tr, 4), tape.constant(pm.visit_inputs));
      Var loss = scale(tape, batch_negative_loglik(tape, psi, ell, pm.visits),
                       1.0 / static_cast<double>(pm.visits.cell_months()));
      total += optimizer_step(tape, loss, tr, opt, config.grad_clip, where("gnn", epoch, pm.month));
    }
    m.log.push_back({epoch, "gnn", total / static_cast<double>(data.months.size())});
  }
  m.gnn = std::move(gnn);
  m.detection = std::move(det);
  return m;
}

TrainedModel train_mlp(const TrainingData& data, const TrainConfig& config) {
  TrainedModel m = model_skeleton(ModelKind::mlp, data, config);
  const StackedData stacked = stack_months(data);
  const std::size_t k_total = stacked.visits.cell_months();
  const std::size_t width = stacked.base_inputs.cols();
  const std::size_t vwidth = stacked.visit_inputs.cols();
  const std::size_t hidden = static_cast<std::size_t>(config.mlp_hidden);
  Rng init(derive_seed(config.seed, kMlpInit));
  Rng shuffle(derive_seed(config.seed, kMlpShuffle));
  Rng dropout(derive_seed(config.seed, kMlpDropout));
  MlpParams mlp = MlpParams::init(width, hidden, static_cast<std::size_t>(config.mlp_layers), init);
  LinearParams det = LinearParams::zeros(vwidth);
  AdamW opt({.lr = config.mlp_lr, .weight_decay = config.mlp_weight_decay});
  const double keep = 1.0 - config.mlp_dropout;

  std::vector<std::size_t> order(k_total);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (int epoch = 1; epoch <= config.mlp_epochs; ++epoch) {
    for (std::size_t i = k_total; i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);
    double total = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < k_total; start += static_cast<std::size_t>(config.mlp_batch)) {
      const std::size_t stop = std::min(k_total, start + static_cast<std::size_t>(config.mlp_batch));
      const std::size_t b = stop - start;
      Tensor inputs = Tensor::zeros(b, width);
      VisitBatch visits;
      std::vector<double> visit_rows;
      for (std::size_t r = 0; r < b; ++r) {
        const std::size_t k = order[start + r];
        for (std::size_t j = 0; j < width; ++j) inputs(r, j) = stacked.base_inputs(k, j);
        const std::size_t v0 = stacked.visits.offsets[k], v1 = stacked.visits.offsets[k + 1];
        visits.add_cell_month(std::span<const std::uint8_t>(stacked.visits.detected.data() + v0, v1 - v0));
        for (std::size_t v = v0; v < v1; ++v)
          for (std::size_t j = 0; j < vwidth; ++j) visit_rows.push_back(stacked.visit_inputs(v, j));
      }
      Tensor visit_inputs({visits.visit_count(), vwidth}, std::move(visit_rows));
      std::vector<Tensor> masks;
      if (config.mlp_dropout > 0.0) {
        for (int l = 0; l + 1 < config.mlp_layers; ++l) {
          Tensor mask = Tensor::zeros(b, hidden);
          for (double& v : mask.values()) v = dropout.uniform() < keep ? 1.0 / keep : 0.0;
          masks.push_back(std::move(mask));
        }
      }
      Tape tape;
      Trainable tr;
      add_trainable(tr, tape, mlp.tensors("mlp"));
      const std::size_t mlp_count = tr.vars.size();
      add_trainable(tr, tape, det.tensors("detection"));
      MlpVars mv;
      for (std::size_t l = 0; l < mlp_count; l += 2) {
        mv.weights.push_back(tr.vars[l]);
        mv.biases.push_back(tr.vars[l + 1]);
      }
      Var psi = mlp_forward(tape, mv, tape.constant(std::move(inputs)), kLogitBound, masks);
      Var ell = detection_logits(tape, linear_vars(tr, mlp_count), tape.constant(std::move(visit_inputs)));
      Var loss = scale(tape, batch_negative_loglik(tape, psi, ell, visits), 1.0 / static_cast<double>(b));
      total += optimizer_step(tape, loss, tr, opt, config.grad_clip, where("mlp", epoch, batches));
      ++batches;
    }
    m.log.push_back({epoch, "mlp", total / batches});
  }
  m.mlp = std::move(mlp);
  m.detection = std::move(det);
  return m;
}

TrainedModel train_flow(ModelKind kind, const TrainingData& data, const TrainConfig& config) {
  TrainedModel m = model_skeleton(kind, data, config);
  if (kind != ModelKind::wildflow_no_base) {
    LinearFit fit = pretrain_linear_base(data, config);
    m.base = std::move(fit.occupancy);
    append_log(m.log, fit.log);
  }
  const Stage1Objective objective =
      kind == ModelKind::wildflow_no_det ? Stage1Objective::certain_detection : Stage1Objective::occupancy;
  Stage1Result s1 = train_stage1(data, config, objective);
  append_log(m.log, s1.log);
  Stage2Result s2 = train_stage2(data, s1.encoder, m.base ? &*m.base : nullptr, config);
  append_log(m.log, s2.log);
  m.encoder = std::move(s1.encoder);
  m.detection = std::move(s1.detection);
  m.velocity = std::move(s2.velocity);
  return m;
}

}  // namespace

TrainedModel train_model(ModelKind kind, const TrainingData& data, const TrainConfig& config) {
  config.validate();
  if (data.months.empty() || total_cell_months(data) == 0) throw InvalidArgument("training split is empty");
  TrainedModel m;
  switch (kind) {
    case ModelKind::logreg: m = train_logreg(data, config); break;
    case ModelKind::mlp: m = train_mlp(data, config); break;
    case ModelKind::gnn: m = train_gnn(data, config); break;
    default: m = train_flow(kind, data, config); break;
  }
  m.validate();
  return m;
}

TrainedModel train_model(ModelKind kind, const ParkDataset& train, const TrainConfig& config) {
  config.validate();
  return train_model(kind, prepare_training_data(train), config);
}

TrainedModel train_baseline(ModelKind kind, const ParkDataset& train, const TrainConfig& config) {
  if (kind != ModelKind::logreg && kind != ModelKind::mlp && kind != ModelKind::gnn) {
    throw InvalidArgument("train_baseline expects logreg, mlp or gnn, got " + to_string(kind));
  }
  return train_model(kind, train, config);
}

TrainedModel train_ablation(ModelKind kind, const ParkDataset& train, const TrainConfig& config) {
  if (kind != ModelKind::wildflow_no_base && kind != ModelKind::wildflow_no_det) {
    throw InvalidArgument("train_ablation expects no_composite_base or no_detection_head, got " + to_string(kind));
  }
  return train_model(kind, train, config);
}

}  // namespace wildflow
