#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wildflow/park_data.hpp"
#include "wildflow/rng.hpp"
#include "wildflow/tape.hpp"
#include "wildflow/tensor.hpp"

namespace wildflow {

/// Logit bound applied before every sigmoid that produces a probability.
inline constexpr double kLogitBound = 10.0;

/// D^{-1/2} (A + I) D^{-1/2} with D the degree matrix of A + I.
///
/// Kept dense (the documented form) and as CSR rows for propagation.
struct NormalizedAdjacency {
  Tensor dense;
  std::vector<int> row_offsets;
  std::vector<int> columns;
  std::vector<double> weights;

  int size() const noexcept { return static_cast<int>(row_offsets.size()) - 1; }
};

NormalizedAdjacency normalized_adjacency(const GridGraph& graph);
/// Wraps an arbitrary symmetric N x N operator (used for relabelled graphs).
NormalizedAdjacency adjacency_from_dense(Tensor dense);

/// Y = A_hat X, recorded on the tape (A_hat is constant and symmetric).
Var propagate(Tape& tape, const NormalizedAdjacency& adjacency, Var x);

using NamedTensors = std::vector<std::pair<std::string, Tensor*>>;
using ConstNamedTensors = std::vector<std::pair<std::string, const Tensor*>>;

/// Affine map inputs * weight + bias; used for the linear occupancy base,
/// the detection head and the logistic baseline.
struct LinearParams {
  Tensor weight;  // width x 1
  Tensor bias;    // 1 x 1

  static LinearParams zeros(std::size_t width);
  std::size_t width() const { return weight.rows(); }
  NamedTensors tensors(const std::string& prefix);
  ConstNamedTensors tensors(const std::string& prefix) const;
};

/// Two graph-convolution layers: relu(A X W1 + b1), then A H W2 + b2.
struct GcnParams {
  Tensor w1;  // in x hidden
  Tensor b1;  // 1 x hidden
  Tensor w2;  // hidden x 1
  Tensor b2;  // 1 x 1

  /// Glorot-uniform weights, zero biases.
  static GcnParams init(std::size_t input_width, std::size_t hidden, Rng& rng);
  static GcnParams zeros(std::size_t input_width, std::size_t hidden);
  std::size_t input_width() const { return w1.rows(); }
  std::size_t hidden() const { return w1.cols(); }
  NamedTensors tensors(const std::string& prefix);
  ConstNamedTensors tensors(const std::string& prefix) const;
};

/// Fully connected ReLU network with one logit output (3 affine layers by default).
struct MlpParams {
  std::vector<Tensor> weights;
  std::vector<Tensor> biases;

  static MlpParams init(std::size_t input_width, std::size_t hidden, std::size_t layers, Rng& rng);
  std::size_t input_width() const { return weights.front().rows(); }
  NamedTensors tensors(const std::string& prefix);
  ConstNamedTensors tensors(const std::string& prefix) const;
};

struct LinearVars {
  Var weight, bias;
};
struct GcnVars {
  Var w1, b1, w2, b2;
};
struct MlpVars {
  std::vector<Var> weights, biases;
};

/// Registers the parameters on the tape: as trainable parameters, or as constants when frozen.
LinearVars bind(Tape& tape, const LinearParams& params, bool trainable);
GcnVars bind(Tape& tape, const GcnParams& params, bool trainable);
MlpVars bind(Tape& tape, const MlpParams& params, bool trainable);

/// Rows of [c_{i,t}, adjacent lagged effort], N x (d+2): the input of the linear base.
Tensor linear_base_inputs(const ConditionContext& condition, std::span<const double> adjacent_effort);
/// Rows of [x_{i,t}, a_{i,t,j}], one per visit.
Tensor detection_inputs(std::span<const std::span<const double>> features, std::span<const double> efforts);

Var linear_forward(Tape& tape, const LinearVars& params, Var inputs);
/// psi_i = eta_w . [c_{i,t}, adj_i] + eta_b, as an N x 1 column.
Var linear_base_forward(Tape& tape, const LinearVars& eta, const ConditionContext& condition,
                        std::span<const double> adjacent_effort);
/// Clipped detection logits g_phi(x, a) for each row of `visit_inputs`.
Var detection_logits(Tape& tape, const LinearVars& phi, Var visit_inputs);
/// Per-node logits; clipped to +-clip_bound when given.
Var gcn_forward(Tape& tape, const GcnVars& params, const NormalizedAdjacency& adjacency, Var node_features,
                std::optional<double> clip_bound);
/// tau(s) = (sin 2 pi s, cos 2 pi s, s).
std::vector<double> time_embedding(double s);
/// GCN over per-node inputs [psi_i, tau(s), c_{i,t}]; unclipped velocity, N x 1.
Var velocity_forward(Tape& tape, const GcnVars& theta, const NormalizedAdjacency& adjacency, Var psi, double s,
                     const Tensor& condition);
/// MLP logits clipped to +-clip_bound. `dropout_masks`, when non-empty, scale each hidden layer.
Var mlp_forward(Tape& tape, const MlpVars& params, Var inputs, double clip_bound,
                std::span<const Tensor> dropout_masks = {});

// Tape-free conveniences.

std::vector<double> linear_base_forward(const LinearParams& eta, const ConditionContext& condition,
                                        std::span<const double> adjacent_effort);
/// sigmoid(clip(phi . [x, effort] + b, 10)).
double detection_forward(const LinearParams& phi, std::span<const double> x, double effort);
std::vector<double> gcn_forward(const GcnParams& params, const NormalizedAdjacency& adjacency,
                                const Tensor& node_features, std::optional<double> clip_bound);
std::vector<double> velocity_forward(const GcnParams& theta, const NormalizedAdjacency& adjacency,
                                     std::span<const double> psi, double s, const Tensor& condition);

}  // namespace wildflow
