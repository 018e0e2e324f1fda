#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "wildflow/models.hpp"
#include "wildflow/park_data.hpp"
#include "wildflow/rng.hpp"
#include "wildflow/tape.hpp"

namespace wildflow {

enum class Integrator { euler, rk4 };
/// What the Monte Carlo mean in sample_risk averages over.
enum class RiskAverage { probability, logit };

std::string to_string(Integrator scheme);
Integrator integrator_from_string(const std::string& name);
std::string to_string(RiskAverage average);
RiskAverage risk_average_from_string(const std::string& name);

struct FlowConfig {
  double sigma0 = 0.1;
  int steps = 20;
  Integrator scheme = Integrator::euler;
  int mc_samples = 8;
  std::uint64_t seed = 0;
  RiskAverage average = RiskAverage::probability;

  void validate() const;
  bool operator==(const FlowConfig&) const = default;
};

/// psi0 = b_eta(C_t) + eps, eps ~ N(0, sigma0^2 I).
std::vector<double> sample_composite_base(const LinearParams& eta, const ConditionContext& condition,
                                          std::span<const double> adjacent_effort, double sigma0, Rng& rng);
/// psi0 ~ N(0, I).
std::vector<double> sample_gaussian_base(std::size_t n, Rng& rng);

/// (1-s) psi0 + s psi1.
std::vector<double> interpolate(std::span<const double> psi0, std::span<const double> psi1, double s);

/// ||v_theta(psi_s, s) - (psi1 - psi0)||^2 with psi_s = interpolate(psi0, psi1, s).
Var fm_loss(Tape& tape, const GcnVars& theta, const NormalizedAdjacency& adjacency, std::span<const double> psi0,
            std::span<const double> psi1, double s, const Tensor& condition);
double fm_loss(const GcnParams& theta, const NormalizedAdjacency& adjacency, std::span<const double> psi0,
               std::span<const double> psi1, double s, const Tensor& condition);

using VelocityField = std::function<std::vector<double>(std::span<const double> psi, double s)>;

/// Fixed-step integration of dpsi/ds = v(psi, s) over [0,1] in `steps` steps.
/// Throws NumericError carrying the 1-based step index once the state turns non-finite.
std::vector<double> integrate_flow(const VelocityField& field, std::span<const double> psi0, int steps,
                                   Integrator scheme);
std::vector<double> integrate_flow(const GcnParams& theta, const NormalizedAdjacency& adjacency,
                                   std::span<const double> psi0, const Tensor& condition, int steps,
                                   Integrator scheme);

/// Monte Carlo occupancy risk: mean over config.mc_samples flows started from the
/// composite base, or from N(0, I) when `eta` is null. Draws use Rng(config.seed).
/// Terminal logits are clipped to +-kLogitBound before the sigmoid.
std::vector<double> sample_risk(const GcnParams& theta, const LinearParams* eta, const NormalizedAdjacency& adjacency,
                                const ConditionContext& condition, std::span<const double> adjacent_effort,
                                const FlowConfig& config);

}  // namespace wildflow
