#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <limits>
#include <span>
#include <vector>

#include "wildflow/tensor.hpp"

namespace wildflow {

/// Handle to a value recorded on a Tape.
struct Var {
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
  std::size_t id = npos;
  bool valid() const noexcept { return id != npos; }
};

/// Reverse-mode gradient record.
///
/// Values are appended in evaluation order, so the node list is already a
/// topological order; backward() sweeps it once in reverse. Nodes that do not
/// depend on any parameter carry no adjoint and are skipped.
class Tape {
 public:
  /// Propagates the node's upstream adjoint into its inputs via accumulate().
  using Backward = std::function<void(Tape&, const Tensor& upstream)>;

  Var parameter(Tensor value);
  Var constant(Tensor value);
  Var record(Tensor value, std::initializer_list<Var> inputs, Backward backward);
  Var record(Tensor value, std::span<const Var> inputs, Backward backward);

  const Tensor& value(Var v) const;
  bool requires_grad(Var v) const;
  /// Adjoint of v after backward(); zeros if v received no gradient.
  Tensor grad(Var v) const;

  /// Adds g into v's adjoint. No-op when v does not require a gradient.
  void accumulate(Var v, const Tensor& g);
  /// Mutable adjoint buffer for in-place accumulation, or nullptr when v needs none.
  Tensor* adjoint(Var v);

  /// Seeds d(loss)=seed and sweeps the tape. Loss must be a single value.
  void backward(Var loss, double seed = 1.0);

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool has_grad = false;
    Backward backward;
  };

  const Node& node(Var v) const;
  Node& node(Var v);

  std::vector<Node> nodes_;
};

// Primitive operations. Each checks shapes, records the forward value and
// registers its adjoint. Shape mismatches throw InvalidArgument naming both shapes.

Var matmul(Tape& t, Var a, Var b);
Var add(Tape& t, Var a, Var b);
Var sub(Tape& t, Var a, Var b);
Var mul(Tape& t, Var a, Var b);
Var scale(Tape& t, Var a, double c);
/// Adds a 1xC row to every row of an RxC matrix.
Var add_bias(Tape& t, Var x, Var bias);
Var sum(Tape& t, Var a);
Var mean(Tape& t, Var a);
/// Horizontal concatenation of matrices with equal row counts.
Var concat_cols(Tape& t, std::span<const Var> parts);
Var concat_cols(Tape& t, std::initializer_list<Var> parts);
Var slice_cols(Tape& t, Var a, std::size_t begin, std::size_t end);
Var sigmoid(Tape& t, Var a);
Var relu(Tape& t, Var a);
/// Hard clamp to [-bound, bound]; adjoint is 1 strictly inside, 0 outside.
Var clip(Tape& t, Var a, double bound);
/// sum((a - b)^2) as a 1x1 value.
Var squared_error(Tape& t, Var a, Var b);

/// Numerically stable logistic function.
double sigmoid(double x) noexcept;
/// log(1 + exp(x)) without overflow.
double softplus(double x) noexcept;

}  // namespace wildflow
