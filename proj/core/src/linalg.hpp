#pragma once

// GEMM kernels backed by Eigen, operating on row-major Tensors.

#include <Eigen/Core>

#include "wildflow/tensor.hpp"

namespace wildflow::linalg {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

inline ConstMap view(const Tensor& t) {
  return ConstMap(t.values().data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

inline MutMap view(Tensor& t) {
  return MutMap(t.values().data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

/// out = a * b
inline Tensor gemm(const Tensor& a, const Tensor& b) {
  Tensor out = Tensor::zeros(a.rows(), b.cols());
  view(out).noalias() = view(a) * view(b);
  return out;
}

/// out += a^T * b
inline void gemm_tn_acc(const Tensor& a, const Tensor& b, Tensor& out) {
  view(out).noalias() += view(a).transpose() * view(b);
}

/// out += a * b^T
inline void gemm_nt_acc(const Tensor& a, const Tensor& b, Tensor& out) {
  view(out).noalias() += view(a) * view(b).transpose();
}

}  // namespace wildflow::linalg
