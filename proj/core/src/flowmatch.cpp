#include "wildflow/flowmatch.hpp"

#include <algorithm>
#include <cmath>

#include "wildflow/errors.hpp"

namespace wildflow {

std::string to_string(Integrator scheme) { return scheme == Integrator::euler ? "euler" : "rk4"; }

Integrator integrator_from_string(const std::string& name) {
  if (name == "euler") return Integrator::euler;
  if (name == "rk4") return Integrator::rk4;
  throw InvalidArgument("unknown integration scheme '" + name + "'");
}

std::string to_string(RiskAverage average) { return average == RiskAverage::probability ? "probability" : "logit"; }

RiskAverage risk_average_from_string(const std::string& name) {
  if (name == "probability") return RiskAverage::probability;
  if (name == "logit") return RiskAverage::logit;
  throw InvalidArgument("unknown risk average '" + name + "'");
}

void FlowConfig::validate() const {
  if (!(sigma0 >= 0.0) || !std::isfinite(sigma0)) throw InvalidArgument("sigma0 must be finite and >= 0");
  if (steps < 1) throw InvalidArgument("integration steps must be >= 1");
  if (mc_samples < 1) throw InvalidArgument("mc_samples must be >= 1");
}

std::vector<double> sample_composite_base(const LinearParams& eta, const ConditionContext& condition,
                                          std::span<const double> adjacent_effort, double sigma0, Rng& rng) {
  if (!(sigma0 >= 0.0)) throw InvalidArgument("sigma0 must be >= 0");
  std::vector<double> psi = linear_base_forward(eta, condition, adjacent_effort);
  if (sigma0 > 0.0)
    for (double& v : psi) v += sigma0 * rng.normal();
  return psi;
}

std::vector<double> sample_gaussian_base(std::size_t n, Rng& rng) {
  std::vector<double> psi(n);
  for (double& v : psi) v = rng.normal();
  return psi;
}

std::vector<double> interpolate(std::span<const double> psi0, std::span<const double> psi1, double s) {
  if (psi0.size() != psi1.size()) {
    throw InvalidArgument("interpolate: lengths " + std::to_string(psi0.size()) + " and " +
                          std::to_string(psi1.size()) + " differ");
  }
  if (!(s >= 0.0 && s <= 1.0)) throw InvalidArgument("flow time s=" + std::to_string(s) + " outside [0,1]");
  std::vector<double> out(psi0.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (1.0 - s) * psi0[i] + s * psi1[i];
  return out;
}

Var fm_loss(Tape& tape, const GcnVars& theta, const NormalizedAdjacency& adjacency, std::span<const double> psi0,
            std::span<const double> psi1, double s, const Tensor& condition) {
  std::vector<double> target(psi0.size());
  const std::vector<double> psi_s = interpolate(psi0, psi1, s);
  for (std::size_t i = 0; i < target.size(); ++i) target[i] = psi1[i] - psi0[i];
  Var v = velocity_forward(tape, theta, adjacency, tape.constant(Tensor::column(psi_s)), s, condition);
  return squared_error(tape, v, tape.constant(Tensor::column(std::move(target))));
}

double fm_loss(const GcnParams& theta, const NormalizedAdjacency& adjacency, std::span<const double> psi0,
               std::span<const double> psi1, double s, const Tensor& condition) {
  Tape tape;
  return tape.value(fm_loss(tape, bind(tape, theta, false), adjacency, psi0, psi1, s, condition)).item();
}

namespace {

void axpy(std::vector<double>& y, double a, const std::vector<double>& x) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

std::vector<double> shifted(const std::vector<double>& y, double a, const std::vector<double>& x) {
  std::vector<double> out = y;
  axpy(out, a, x);
  return out;
}

}  // namespace

std::vector<double> integrate_flow(const VelocityField& field, std::span<const double> psi0, int steps,
                                   Integrator scheme) {
  if (steps < 1) throw InvalidArgument("integration steps must be >= 1");
  const double h = 1.0 / steps;
  std::vector<double> psi(psi0.begin(), psi0.end());
  auto eval = [&](const std::vector<double>& y, double s) {
    std::vector<double> v = field(y, s);
    if (v.size() != y.size()) throw InvalidArgument("velocity field returned the wrong length");
    return v;
  };
  for (int k = 0; k < steps; ++k) {
    const double s = k * h;
    if (scheme == Integrator::euler) {
      axpy(psi, h, eval(psi, s));
    } else {
      const double s_mid = s + 0.5 * h;
      const double s_end = k + 1 == steps ? 1.0 : (k + 1) * h;
      const auto k1 = eval(psi, s);
      const auto k2 = eval(shifted(psi, 0.5 * h, k1), s_mid);
      const auto k3 = eval(shifted(psi, 0.5 * h, k2), s_mid);
      const auto k4 = eval(shifted(psi, h, k3), s_end);
      for (std::size_t i = 0; i < psi.size(); ++i) psi[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    for (double v : psi)
      if (!std::isfinite(v)) throw NumericError("non-finite flow state", static_cast<std::size_t>(k + 1));
  }
  return psi;
}

std::vector<double> integrate_flow(const GcnParams& theta, const NormalizedAdjacency& adjacency,
                                   std::span<const double> psi0, const Tensor& condition, int steps,
                                   Integrator scheme) {
  const VelocityField field = [&](std::span<const double> psi, double s) {
    return velocity_forward(theta, adjacency, psi, s, condition);
  };
  return integrate_flow(field, psi0, steps, scheme);
}

std::vector<double> sample_risk(const GcnParams& theta, const LinearParams* eta, const NormalizedAdjacency& adjacency,
                                const ConditionContext& condition, std::span<const double> adjacent_effort,
                                const FlowConfig& config) {
  config.validate();
  const std::size_t n = condition.matrix.rows();
  Rng rng(config.seed);
  std::vector<double> acc(n, 0.0);
  for (int m = 0; m < config.mc_samples; ++m) {
    const std::vector<double> psi0 = eta ? sample_composite_base(*eta, condition, adjacent_effort, config.sigma0, rng)
                                         : sample_gaussian_base(n, rng);
    const std::vector<double> psi1 =
        integrate_flow(theta, adjacency, psi0, condition.matrix, config.steps, config.scheme);
    for (std::size_t i = 0; i < n; ++i) {
      const double z = std::clamp(psi1[i], -kLogitBound, kLogitBound);
      acc[i] += config.average == RiskAverage::probability ? sigmoid(z) : z;
    }
  }
  for (double& v : acc) {
    v /= config.mc_samples;
    if (config.average == RiskAverage::logit) v = sigmoid(v);
  }
  return acc;
}

}  // namespace wildflow
