#include "wildflow/models.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "wildflow/errors.hpp"

namespace wildflow {

// ---------------------------------------------------------------- adjacency

NormalizedAdjacency normalized_adjacency(const GridGraph& graph) {
  const int n = graph.node_count();
  std::vector<double> inv_sqrt(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) inv_sqrt[i] = 1.0 / std::sqrt(static_cast<double>(graph.degree(i) + 1));

  NormalizedAdjacency a;
  a.dense = Tensor::zeros(static_cast<std::size_t>(n), static_cast<std::size_t>(n));
  a.row_offsets.push_back(0);
  for (int i = 0; i < n; ++i) {
    std::vector<int> cols(graph.neighbors(i).begin(), graph.neighbors(i).end());
    cols.push_back(i);
    std::sort(cols.begin(), cols.end());
    for (int j : cols) {
      const double w = inv_sqrt[i] * inv_sqrt[j];
      a.dense(i, j) = w;
      a.columns.push_back(j);
      a.weights.push_back(w);
    }
    a.row_offsets.push_back(static_cast<int>(a.columns.size()));
  }
  return a;
}

NormalizedAdjacency adjacency_from_dense(Tensor dense) {
  const std::size_t n = dense.rows();
  if (dense.cols() != n) throw InvalidArgument("adjacency must be square, got " + shape_string(dense.shape()));
  NormalizedAdjacency a;
  a.row_offsets.push_back(0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (dense(i, j) != dense(j, i)) throw InvalidArgument("adjacency must be symmetric");
      if (dense(i, j) != 0.0) {
        a.columns.push_back(static_cast<int>(j));
        a.weights.push_back(dense(i, j));
      }
    }
    a.row_offsets.push_back(static_cast<int>(a.columns.size()));
  }
  a.dense = std::move(dense);
  return a;
}

namespace {

void spmm(const NormalizedAdjacency& a, const Tensor& x, Tensor& out) {
  const std::size_t w = x.cols();
  for (int i = 0; i < a.size(); ++i) {
    double* dst = &out(static_cast<std::size_t>(i), 0);
    for (int k = a.row_offsets[i]; k < a.row_offsets[i + 1]; ++k) {
      const double aw = a.weights[k];
      const double* src = x.data().data() + static_cast<std::size_t>(a.columns[k]) * w;
      for (std::size_t j = 0; j < w; ++j) dst[j] += aw * src[j];
    }
  }
}

}  // namespace

Var propagate(Tape& tape, const NormalizedAdjacency& adjacency, Var x) {
  const Tensor& xv = tape.value(x);
  if (xv.rank() != 2 || static_cast<int>(xv.rows()) != adjacency.size()) {
    throw InvalidArgument("propagate: shape mismatch " + shape_string(adjacency.dense.shape()) + " vs " +
                          shape_string(xv.shape()));
  }
  Tensor out = Tensor::zeros(xv.rows(), xv.cols());
  spmm(adjacency, xv, out);
  // A_hat is symmetric, so the adjoint is A_hat applied to the upstream gradient.
  return tape.record(std::move(out), {x}, [&adjacency, x](Tape& t, const Tensor& up) {
    if (Tensor* g = t.adjoint(x)) spmm(adjacency, up, *g);
  });
}

// ---------------------------------------------------------------- parameter bundles

namespace {

Tensor glorot(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  Tensor w = Tensor::zeros(fan_in, fan_out);
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& v : w.values()) v = (2.0 * rng.uniform() - 1.0) * limit;
  return w;
}

}  // namespace

LinearParams LinearParams::zeros(std::size_t width) { return {Tensor::zeros(width, 1), Tensor::zeros(1, 1)}; }

NamedTensors LinearParams::tensors(const std::string& prefix) {
  return {{prefix + ".weight", &weight}, {prefix + ".bias", &bias}};
}

ConstNamedTensors LinearParams::tensors(const std::string& prefix) const {
  return {{prefix + ".weight", &weight}, {prefix + ".bias", &bias}};
}

GcnParams GcnParams::init(std::size_t input_width, std::size_t hidden, Rng& rng) {
  if (input_width == 0 || hidden == 0) throw InvalidArgument("GCN widths must be positive");
  GcnParams p;
  p.w1 = glorot(input_width, hidden, rng);
  p.b1 = Tensor::zeros(1, hidden);
  p.w2 = glorot(hidden, 1, rng);
  p.b2 = Tensor::zeros(1, 1);
  return p;
}

GcnParams GcnParams::zeros(std::size_t input_width, std::size_t hidden) {
  return {Tensor::zeros(input_width, hidden), Tensor::zeros(1, hidden), Tensor::zeros(hidden, 1), Tensor::zeros(1, 1)};
}

NamedTensors GcnParams::tensors(const std::string& prefix) {
  return {{prefix + ".w1", &w1}, {prefix + ".b1", &b1}, {prefix + ".w2", &w2}, {prefix + ".b2", &b2}};
}

ConstNamedTensors GcnParams::tensors(const std::string& prefix) const {
  return {{prefix + ".w1", &w1}, {prefix + ".b1", &b1}, {prefix + ".w2", &w2}, {prefix + ".b2", &b2}};
}

MlpParams MlpParams::init(std::size_t input_width, std::size_t hidden, std::size_t layers, Rng& rng) {
  if (input_width == 0) throw InvalidArgument("MLP input width must be positive");
  if (hidden == 0) throw InvalidArgument("MLP hidden width must be positive");
  if (layers < 1) throw InvalidArgument("MLP needs at least one layer");
  MlpParams p;
  std::size_t in = input_width;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t out = l + 1 == layers ? 1 : hidden;
    p.weights.push_back(glorot(in, out, rng));
    p.biases.push_back(Tensor::zeros(1, out));
    in = out;
  }
  return p;
}

NamedTensors MlpParams::tensors(const std::string& prefix) {
  NamedTensors out;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    out.emplace_back(prefix + ".w" + std::to_string(l + 1), &weights[l]);
    out.emplace_back(prefix + ".b" + std::to_string(l + 1), &biases[l]);
  }
  return out;
}

ConstNamedTensors MlpParams::tensors(const std::string& prefix) const {
  ConstNamedTensors out;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    out.emplace_back(prefix + ".w" + std::to_string(l + 1), &weights[l]);
    out.emplace_back(prefix + ".b" + std::to_string(l + 1), &biases[l]);
  }
  return out;
}

namespace {
Var bind_one(Tape& tape, const Tensor& t, bool trainable) { return trainable ? tape.parameter(t) : tape.constant(t); }
}  // namespace

LinearVars bind(Tape& tape, const LinearParams& p, bool trainable) {
  return {bind_one(tape, p.weight, trainable), bind_one(tape, p.bias, trainable)};
}

GcnVars bind(Tape& tape, const GcnParams& p, bool trainable) {
  return {bind_one(tape, p.w1, trainable), bind_one(tape, p.b1, trainable), bind_one(tape, p.w2, trainable),
          bind_one(tape, p.b2, trainable)};
}

MlpVars bind(Tape& tape, const MlpParams& p, bool trainable) {
  MlpVars v;
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    v.weights.push_back(bind_one(tape, p.weights[l], trainable));
    v.biases.push_back(bind_one(tape, p.biases[l], trainable));
  }
  return v;
}

// ---------------------------------------------------------------- forwards

Tensor linear_base_inputs(const ConditionContext& condition, std::span<const double> adjacent_effort) {
  const Tensor& c = condition.matrix;
  if (adjacent_effort.size() != c.rows()) {
    throw InvalidArgument("adjacent effort has " + std::to_string(adjacent_effort.size()) + " entries for " +
                          std::to_string(c.rows()) + " nodes");
  }
  Tensor out = Tensor::zeros(c.rows(), c.cols() + 1);
  for (std::size_t i = 0; i < c.rows(); ++i) {
    for (std::size_t j = 0; j < c.cols(); ++j) out(i, j) = c(i, j);
    out(i, c.cols()) = adjacent_effort[i];
  }
  return out;
}

Tensor detection_inputs(std::span<const std::span<const double>> features, std::span<const double> efforts) {
  if (features.size() != efforts.size()) throw InvalidArgument("one feature row per visit effort required");
  if (features.empty()) return Tensor({0, 0});
  const std::size_t d = features[0].size();
  Tensor out = Tensor::zeros(features.size(), d + 1);
  for (std::size_t v = 0; v < features.size(); ++v) {
    if (features[v].size() != d) throw InvalidArgument("ragged visit features");
    for (std::size_t j = 0; j < d; ++j) out(v, j) = features[v][j];
    out(v, d) = efforts[v];
  }
  return out;
}

Var linear_forward(Tape& tape, const LinearVars& params, Var inputs) {
  const Tensor& x = tape.value(inputs);
  const Tensor& w = tape.value(params.weight);
  if (x.rank() != 2 || x.cols() != w.rows()) {
    throw InvalidArgument("linear: input width mismatch " + shape_string(x.shape()) + " vs weight " +
                          shape_string(w.shape()));
  }
  return add_bias(tape, matmul(tape, inputs, params.weight), params.bias);
}

Var linear_base_forward(Tape& tape, const LinearVars& eta, const ConditionContext& condition,
                        std::span<const double> adjacent_effort) {
  return linear_forward(tape, eta, tape.constant(linear_base_inputs(condition, adjacent_effort)));
}

Var detection_logits(Tape& tape, const LinearVars& phi, Var visit_inputs) {
  return clip(tape, linear_forward(tape, phi, visit_inputs), kLogitBound);
}

Var gcn_forward(Tape& tape, const GcnVars& params, const NormalizedAdjacency& adjacency, Var node_features,
                std::optional<double> clip_bound) {
  const Tensor& x = tape.value(node_features);
  const Tensor& w1 = tape.value(params.w1);
  if (x.rank() != 2 || x.cols() != w1.rows()) {
    throw InvalidArgument("gcn: node features " + shape_string(x.shape()) + " do not match first layer " +
                          shape_string(w1.shape()));
  }
  Var h = relu(tape, add_bias(tape, matmul(tape, propagate(tape, adjacency, node_features), params.w1), params.b1));
  Var out = add_bias(tape, propagate(tape, adjacency, matmul(tape, h, params.w2)), params.b2);
  return clip_bound ? clip(tape, out, *clip_bound) : out;
}

std::vector<double> time_embedding(double s) {
  const double angle = 2.0 * std::numbers::pi * s;
  return {std::sin(angle), std::cos(angle), s};
}

Var velocity_forward(Tape& tape, const GcnVars& theta, const NormalizedAdjacency& adjacency, Var psi, double s,
                     const Tensor& condition) {
  if (!(s >= 0.0 && s <= 1.0)) throw InvalidArgument("flow time s=" + std::to_string(s) + " outside [0,1]");
  const Tensor& pv = tape.value(psi);
  if (pv.rank() != 2 || pv.cols() != 1 || pv.rows() != condition.rows()) {
    throw InvalidArgument("velocity: psi " + shape_string(pv.shape()) + " does not match condition " +
                          shape_string(condition.shape()));
  }
  const auto tau = time_embedding(s);
  Tensor rest = Tensor::zeros(condition.rows(), tau.size() + condition.cols());
  for (std::size_t i = 0; i < condition.rows(); ++i) {
    for (std::size_t j = 0; j < tau.size(); ++j) rest(i, j) = tau[j];
    for (std::size_t j = 0; j < condition.cols(); ++j) rest(i, tau.size() + j) = condition(i, j);
  }
  Var inputs = concat_cols(tape, {psi, tape.constant(std::move(rest))});
  return gcn_forward(tape, theta, adjacency, inputs, std::nullopt);
}

Var mlp_forward(Tape& tape, const MlpVars& params, Var inputs, double clip_bound, std::span<const Tensor> dropout_masks) {
  const std::size_t layers = params.weights.size();
  if (!dropout_masks.empty() && dropout_masks.size() + 1 != layers) {
    throw InvalidArgument("need one dropout mask per hidden layer");
  }
  Var h = inputs;
  for (std::size_t l = 0; l < layers; ++l) {
    const Tensor& x = tape.value(h);
    const Tensor& w = tape.value(params.weights[l]);
    if (x.cols() != w.rows()) {
      throw InvalidArgument("mlp: shape mismatch " + shape_string(x.shape()) + " vs " + shape_string(w.shape()));
    }
    h = add_bias(tape, matmul(tape, h, params.weights[l]), params.biases[l]);
    if (l + 1 < layers) {
      h = relu(tape, h);
      if (!dropout_masks.empty()) h = mul(tape, h, tape.constant(dropout_masks[l]));
    }
  }
  return clip(tape, h, clip_bound);
}

std::vector<double> linear_base_forward(const LinearParams& eta, const ConditionContext& condition,
                                        std::span<const double> adjacent_effort) {
  Tape tape;
  return tape.value(linear_base_forward(tape, bind(tape, eta, false), condition, adjacent_effort)).data();
}

double detection_forward(const LinearParams& phi, std::span<const double> x, double effort) {
  if (x.size() + 1 != phi.width()) {
    throw InvalidArgument("detection head expects " + std::to_string(phi.width() - 1) + " features, got " +
                          std::to_string(x.size()));
  }
  if (!(effort >= 0.0)) throw InvalidArgument("visit effort must be >= 0");
  double z = phi.bias[0] + phi.weight[x.size()] * effort;
  for (std::size_t j = 0; j < x.size(); ++j) z += phi.weight[j] * x[j];
  return sigmoid(std::clamp(z, -kLogitBound, kLogitBound));
}

std::vector<double> gcn_forward(const GcnParams& params, const NormalizedAdjacency& adjacency,
                                const Tensor& node_features, std::optional<double> clip_bound) {
  Tape tape;
  return tape.value(gcn_forward(tape, bind(tape, params, false), adjacency, tape.constant(node_features), clip_bound))
      .data();
}

std::vector<double> velocity_forward(const GcnParams& theta, const NormalizedAdjacency& adjacency,
                                     std::span<const double> psi, double s, const Tensor& condition) {
  Tape tape;
  Var p = tape.constant(Tensor::column(std::vector<double>(psi.begin(), psi.end())));
  return tape.value(velocity_forward(tape, bind(tape, theta, false), adjacency, p, s, condition)).data();
}

}  // namespace wildflow
