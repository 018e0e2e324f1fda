#include "wildflow/optim.hpp"

#include <cmath>

#include "wildflow/errors.hpp"

namespace wildflow {

AdamW::AdamW(AdamWOptions options) : options_(options) {
  if (!(options_.lr > 0.0) || options_.weight_decay < 0.0 || options_.eps <= 0.0) {
    throw InvalidArgument("AdamW: lr and eps must be positive, weight decay nonnegative");
  }
}

void AdamW::step(std::span<Tensor* const> params, std::span<const Tensor> grads) {
  if (params.size() != grads.size()) {
    throw InvalidArgument("AdamW: " + std::to_string(params.size()) + " parameters but " +
                          std::to_string(grads.size()) + " gradients");
  }
  if (m_.empty()) {
    for (const Tensor* p : params) {
      m_.emplace_back(p->shape());
      v_.emplace_back(p->shape());
    }
  }
  if (m_.size() != params.size()) throw InvalidArgument("AdamW: parameter set changed between steps");
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (!params[k]->same_shape(grads[k]) || !m_[k].same_shape(grads[k])) {
      throw InvalidArgument("AdamW: shape mismatch " + shape_string(params[k]->shape()) + " vs " +
                            shape_string(grads[k].shape()));
    }
    if (!grads[k].all_finite()) throw NumericError("non-finite gradient", step_ + 1);
  }

  ++step_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  const double decay = 1.0 - options_.lr * options_.weight_decay;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto p = params[k]->values();
    auto g = grads[k].values();
    auto m = m_[k].values();
    auto v = v_[k].values();
    for (std::size_t i = 0; i < p.size(); ++i) {
      p[i] *= decay;
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= options_.lr * mhat / (std::sqrt(vhat) + options_.eps);
    }
  }
}

double global_norm(std::span<const Tensor> grads) {
  double sq = 0.0;
  for (const Tensor& g : grads)
    for (double v : g.values()) sq += v * v;
  return std::sqrt(sq);
}

double clip_grad_norm(std::span<Tensor> grads, double max_norm) {
  const double norm = global_norm(grads);
  if (norm > max_norm && norm > 0.0) {
    const double factor = max_norm / norm;
    for (Tensor& g : grads)
      for (double& v : g.values()) v *= factor;
  }
  return norm;
}

std::vector<double> finite_diff_grad(const std::function<double(std::span<const double>)>& f,
                                     std::span<const double> theta, double h) {
  std::vector<double> x(theta.begin(), theta.end());
  std::vector<double> grad(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double orig = x[k];
    x[k] = orig + h;
    const double up = f(x);
    x[k] = orig - h;
    const double down = f(x);
    x[k] = orig;
    grad[k] = (up - down) / (2.0 * h);
  }
  return grad;
}

}  // namespace wildflow
