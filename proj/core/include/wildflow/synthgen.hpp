#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wildflow/park_data.hpp"

namespace wildflow {

enum class PatrolMode {
  uniform,   ///< every cell gets Poisson(lambda) visits
  reactive,  ///< visits follow last month's detections
};

std::string to_string(PatrolMode mode);
PatrolMode patrol_mode_from_string(const std::string& name);

/// Parameters of the synthetic park process.
///
/// Occupancy logit per cell-month:
///   psi* = w.x + beta_det * a^m_{i,t-1} + beta_disp * mean_{j~i} a^m_{j,t-1} + g_i
/// with g a squared-exponential Gaussian field (length_scale, field_sd) drawn once.
/// Visit detection probability: z * sigmoid(alpha0 + alpha1 * effort + alpha2 * x[0]).
struct GeneratorConfig {
  int rows = 32;
  int cols = 32;
  int months = 48;
  int start_year = 2018;
  int static_dim = 5;
  int dynamic_dim = 3;
  std::vector<double> weights;  // length static_dim + dynamic_dim
  double beta_det = -0.3;
  double beta_disp = 0.15;
  double length_scale = 3.0;
  double field_sd = 1.0;
  double ar_coefficient = 0.8;
  double alpha0 = -1.0;
  double alpha1 = 0.4;
  double alpha2 = 0.3;
  double patrol_intensity = 1.5;
  double effort_mean_km = 2.0;
  PatrolMode patrol_mode = PatrolMode::uniform;
  /// Fraction of reactive visits routed by last month's detections.
  double reactive_share = 0.8;
  std::uint64_t seed = 42;

  int feature_dim() const noexcept { return static_dim + dynamic_dim; }
  /// Throws InvalidArgument describing the first violated constraint.
  void validate() const;
  bool operator==(const GeneratorConfig&) const = default;
};

GeneratorConfig default_config();

/// A generated park together with the latent quantities behind it.
struct SyntheticPark {
  ParkDataset dataset;
  /// psi*_{i,t}, indexed [month * N + cell].
  std::vector<double> true_logits;
  /// g_i.
  std::vector<double> spatial_field;
};

/// Deterministic in the config (seed included).
SyntheticPark generate_synthetic_park(const GeneratorConfig& config);
ParkDataset generate_park(const GeneratorConfig& config);

}  // namespace wildflow
