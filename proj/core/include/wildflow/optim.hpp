#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "wildflow/tensor.hpp"

namespace wildflow {

struct AdamWOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

/// AdamW with decoupled weight decay.
///
/// Per step k and parameter theta with gradient g:
///   theta <- theta - lr * wd * theta
///   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2
///   theta <- theta - lr * (m / (1 - b1^k)) / (sqrt(v / (1 - b2^k)) + eps)
class AdamW {
 public:
  explicit AdamW(AdamWOptions options = {});

  /// Updates every tensor in `params` in place. Shapes of params and grads
  /// must agree pairwise and stay fixed across calls. Throws NumericError with
  /// the step index if any gradient entry is non-finite; params are untouched then.
  void step(std::span<Tensor* const> params, std::span<const Tensor> grads);

  std::size_t step_count() const noexcept { return step_; }
  const AdamWOptions& options() const noexcept { return options_; }
  void set_lr(double lr) noexcept { options_.lr = lr; }
  const std::vector<Tensor>& first_moment() const noexcept { return m_; }
  const std::vector<Tensor>& second_moment() const noexcept { return v_; }

 private:
  AdamWOptions options_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::size_t step_ = 0;
};

/// Global L2 norm across all gradient tensors.
double global_norm(std::span<const Tensor> grads);

/// Rescales grads by max_norm/g when their global norm g exceeds max_norm.
/// Returns the norm before clipping.
double clip_grad_norm(std::span<Tensor> grads, double max_norm = 5.0);

/// Central-difference gradient (f(x + h e_k) - f(x - h e_k)) / 2h.
std::vector<double> finite_diff_grad(const std::function<double(std::span<const double>)>& f,
                                     std::span<const double> theta, double h = 1e-5);

}  // namespace wildflow
