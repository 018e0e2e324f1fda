#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wildflow/flowmatch.hpp"
#include "wildflow/models.hpp"
#include "wildflow/occlik.hpp"
#include "wildflow/park_data.hpp"

namespace wildflow {

enum class ModelKind { wildflow, logreg, mlp, gnn, wildflow_no_base, wildflow_no_det };

std::string to_string(ModelKind kind);
/// Accepts the canonical names plus "no_composite_base" and "no_detection_head".
ModelKind model_kind_from_string(const std::string& name);
bool is_flow_kind(ModelKind kind) noexcept;

struct TrainConfig {
  int stage1_epochs = 100;
  double stage1_lr = 1e-2;
  int stage2_epochs = 120;
  std::vector<double> stage2_lr_grid{1e-2, 1e-3};
  int hidden = 128;
  int layers = 2;
  double grad_clip = 5.0;
  double sigma0 = 0.1;
  double weight_decay = 0.0;

  int logreg_max_steps = 2000;
  double logreg_lr = 0.05;
  double logreg_tolerance = 1e-6;

  int mlp_epochs = 100;
  double mlp_lr = 5e-3;
  int mlp_batch = 512;
  int mlp_hidden = 128;
  int mlp_layers = 3;
  double mlp_dropout = 0.1;
  double mlp_weight_decay = 1e-4;

  int gnn_epochs = 120;
  double gnn_lr = 3e-3;

  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct LogEntry {
  int epoch = 0;
  std::string stage;
  double loss = 0.0;
  bool operator==(const LogEntry&) const = default;
};

/// One training month, with standardized features.
struct PreparedMonth {
  int month = 0;
  ConditionContext condition;     // C_t
  Tensor encoder_context;         // C'_t
  std::vector<double> adjacent_effort;
  Tensor base_inputs;             // [C_t, adjacent effort]
  Tensor visit_inputs;            // one row [x, effort] per visit
  VisitBatch visits;
};

/// Standardization statistics, normalized adjacency and per-month tensors of a training split.
struct TrainingData {
  FeatureStats stats;
  GridGraph graph;
  NormalizedAdjacency adjacency;
  int static_dim = 0;
  int dynamic_dim = 0;
  std::vector<std::string> feature_names;
  std::vector<PreparedMonth> months;
};

/// Fits standardization statistics on `train` and prepares every month.
TrainingData prepare_training_data(const ParkDataset& train);
/// Prepares month `month` of `dataset` with the given statistics.
PreparedMonth prepare_month(const ParkDataset& dataset, int month, const FeatureStats& stats);

struct LinearFit {
  LinearParams occupancy;
  LinearParams detection;
  double loss = 0.0;  // mean negative log-likelihood per cell-month
  int steps = 0;
  double grad_norm = 0.0;
  bool degenerate = false;  // no detections anywhere
  std::vector<LogEntry> log;
};

/// Joint linear occupancy model and detection head, full-batch AdamW until the
/// gradient norm drops below config.logreg_tolerance or logreg_max_steps.
LinearFit pretrain_linear_base(const TrainingData& data, const TrainConfig& config);

enum class Stage1Objective {
  occupancy,          ///< visit-level occupancy likelihood with the detection head
  certain_detection,  ///< Bernoulli likelihood of S with detection fixed at 1
};

struct Stage1Result {
  GcnParams encoder;
  std::optional<LinearParams> detection;
  std::vector<LogEntry> log;
};

Stage1Result train_stage1(const TrainingData& data, const TrainConfig& config,
                          Stage1Objective objective = Stage1Objective::occupancy);

/// psi_hat^(1)_t = clip(f_omega(G, C'_t)) for every prepared month.
std::vector<std::vector<double>> encoder_targets(const TrainingData& data, const GcnParams& encoder);

struct Stage2Result {
  GcnParams velocity;
  double lr = 0.0;
  double final_loss = 0.0;  // mean over months of the last epoch
  std::vector<LogEntry> log;
};

/// Trains v_theta towards `targets` for every lr of the grid and keeps the one with
/// the lowest last-epoch loss. `eta` null means a N(0, I) base.
Stage2Result train_stage2(const TrainingData& data, std::span<const std::vector<double>> targets,
                          const LinearParams* eta, const TrainConfig& config);
Stage2Result train_stage2(const TrainingData& data, const GcnParams& encoder, const LinearParams* eta,
                          const TrainConfig& config);
/// Single-lr run.
Stage2Result train_stage2_with_lr(const TrainingData& data, std::span<const std::vector<double>> targets,
                                  const LinearParams* eta, const TrainConfig& config, double lr);

/// A trained occupancy model with everything needed for prediction.
struct TrainedModel {
  ModelKind kind = ModelKind::wildflow;
  FeatureStats stats;
  int grid_rows = 0;
  int grid_cols = 0;
  int static_dim = 0;
  int dynamic_dim = 0;
  std::vector<std::string> feature_names;
  TrainConfig train_config;
  FlowConfig flow;

  std::optional<LinearParams> base;       // eta; the occupancy model itself for logreg
  std::optional<LinearParams> detection;  // phi
  std::optional<GcnParams> encoder;       // omega
  std::optional<GcnParams> velocity;      // theta
  std::optional<GcnParams> gnn;
  std::optional<MlpParams> mlp;
  std::vector<LogEntry> log;

  int feature_dim() const noexcept { return static_dim + dynamic_dim; }
  /// Throws InvalidArgument unless the kind carries exactly its bundles with consistent shapes.
  void validate() const;
  /// Parameter tensors in checkpoint order.
  ConstNamedTensors tensors() const;
  NamedTensors tensors();
};

/// Flow configuration used at inference by default.
FlowConfig default_flow_config(const TrainConfig& config);

/// Shared skeleton (metadata, no parameters) for a model trained on `data`.
TrainedModel model_skeleton(ModelKind kind, const TrainingData& data, const TrainConfig& config);

TrainedModel train_baseline(ModelKind kind, const ParkDataset& train, const TrainConfig& config);
TrainedModel train_ablation(ModelKind kind, const ParkDataset& train, const TrainConfig& config);
/// Any kind.
TrainedModel train_model(ModelKind kind, const ParkDataset& train, const TrainConfig& config);
TrainedModel train_model(ModelKind kind, const TrainingData& data, const TrainConfig& config);

}  // namespace wildflow
