#include "wildflow/tape.hpp"

#include <algorithm>
#include <cmath>

#include "linalg.hpp"
#include "wildflow/errors.hpp"

namespace wildflow {

// ---------------------------------------------------------------- Tape

const Tape::Node& Tape::node(Var v) const {
  if (v.id >= nodes_.size()) throw InvalidArgument("variable does not belong to this tape");
  return nodes_[v.id];
}

Tape::Node& Tape::node(Var v) {
  if (v.id >= nodes_.size()) throw InvalidArgument("variable does not belong to this tape");
  return nodes_[v.id];
}

Var Tape::parameter(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, true, false, {}});
  return Var{nodes_.size() - 1};
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, false, false, {}});
  return Var{nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, Backward backward) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(backward));
}

Var Tape::record(Tensor value, std::span<const Var> inputs, Backward backward) {
  bool needs = false;
  for (Var in : inputs) needs = needs || node(in).requires_grad;
  nodes_.push_back(Node{std::move(value), {}, needs, false, needs ? std::move(backward) : Backward{}});
  return Var{nodes_.size() - 1};
}

const Tensor& Tape::value(Var v) const { return node(v).value; }

bool Tape::requires_grad(Var v) const { return node(v).requires_grad; }

Tensor Tape::grad(Var v) const {
  const Node& n = node(v);
  if (n.has_grad) return n.grad;
  return Tensor(n.value.shape());
}

Tensor* Tape::adjoint(Var v) {
  Node& n = node(v);
  if (!n.requires_grad) return nullptr;
  if (!n.has_grad) {
    n.grad = Tensor(n.value.shape());
    n.has_grad = true;
  }
  return &n.grad;
}

void Tape::accumulate(Var v, const Tensor& g) {
  Tensor* adj = adjoint(v);
  if (adj == nullptr) return;
  if (!adj->same_shape(g)) {
    throw InvalidArgument("adjoint shape " + shape_string(g.shape()) + " does not match value shape " +
                          shape_string(adj->shape()));
  }
  auto dst = adj->values();
  auto src = g.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void Tape::backward(Var loss, double seed) {
  const Node& out = node(loss);
  if (out.value.size() != 1) {
    throw InvalidArgument("backward() needs a scalar loss, got shape " + shape_string(out.value.shape()));
  }
  for (Node& n : nodes_) {
    n.has_grad = false;
    n.grad = Tensor();
  }
  if (!out.requires_grad) return;
  adjoint(loss)->fill(seed);
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.has_grad || !n.backward) continue;
    // Closures only touch their inputs' adjoints, which precede this node.
    n.backward(*this, n.grad);
  }
}

// ---------------------------------------------------------------- helpers

double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) noexcept {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

namespace {

void require_same_shape(const Tape& t, Var a, Var b, const char* op) {
  const auto& sa = t.value(a).shape();
  const auto& sb = t.value(b).shape();
  if (sa != sb) {
    throw InvalidArgument(std::string(op) + ": shape mismatch " + shape_string(sa) + " vs " + shape_string(sb));
  }
}

template <typename F>
Tensor map_values(const Tensor& in, F f) {
  Tensor out(in.shape());
  auto src = in.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = f(src[i]);
  return out;
}

}  // namespace

// ---------------------------------------------------------------- primitives

Var matmul(Tape& t, Var a, Var b) {
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  if (av.rank() != 2 || bv.rank() != 2 || av.cols() != bv.rows()) {
    throw InvalidArgument("matmul: shape mismatch " + shape_string(av.shape()) + " vs " + shape_string(bv.shape()));
  }
  return t.record(linalg::gemm(av, bv), {a, b}, [a, b](Tape& tape, const Tensor& up) {
    if (Tensor* ga = tape.adjoint(a)) linalg::gemm_nt_acc(up, tape.value(b), *ga);
    if (Tensor* gb = tape.adjoint(b)) linalg::gemm_tn_acc(tape.value(a), up, *gb);
  });
}

Var add(Tape& t, Var a, Var b) {
  require_same_shape(t, a, b, "add");
  Tensor out = t.value(a);
  auto dst = out.values();
  auto src = t.value(b).values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  return t.record(std::move(out), {a, b}, [a, b](Tape& tape, const Tensor& up) {
    tape.accumulate(a, up);
    tape.accumulate(b, up);
  });
}

Var sub(Tape& t, Var a, Var b) {
  require_same_shape(t, a, b, "sub");
  Tensor out = t.value(a);
  auto dst = out.values();
  auto src = t.value(b).values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] -= src[i];
  return t.record(std::move(out), {a, b}, [a, b](Tape& tape, const Tensor& up) {
    tape.accumulate(a, up);
    if (Tensor* gb = tape.adjoint(b)) {
      auto g = gb->values();
      auto u = up.values();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= u[i];
    }
  });
}

Var mul(Tape& t, Var a, Var b) {
  require_same_shape(t, a, b, "mul");
  Tensor out = t.value(a);
  auto dst = out.values();
  auto src = t.value(b).values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] *= src[i];
  return t.record(std::move(out), {a, b}, [a, b](Tape& tape, const Tensor& up) {
    auto u = up.values();
    if (Tensor* ga = tape.adjoint(a)) {
      auto g = ga->values();
      auto bv = tape.value(b).values();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += u[i] * bv[i];
    }
    if (Tensor* gb = tape.adjoint(b)) {
      auto g = gb->values();
      auto av = tape.value(a).values();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += u[i] * av[i];
    }
  });
}

Var scale(Tape& t, Var a, double c) {
  Tensor out = map_values(t.value(a), [c](double v) { return c * v; });
  return t.record(std::move(out), {a}, [a, c](Tape& tape, const Tensor& up) {
    if (Tensor* ga = tape.adjoint(a)) {
      auto g = ga->values();
      auto u = up.values();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += c * u[i];
    }
  });
}

Var add_bias(Tape& t, Var x, Var bias) {
  const Tensor& xv = t.value(x);
  const Tensor& bv = t.value(bias);
  if (xv.rank() != 2 || bv.rank() != 2 || bv.rows() != 1 || bv.cols() != xv.cols()) {
    throw InvalidArgument("add_bias: shape mismatch " + shape_string(xv.shape()) + " vs " +
                          shape_string(bv.shape()));
  }
  Tensor out = xv;
  const std::size_t r = xv.rows(), c = xv.cols();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out(i, j) += bv[j];
  return t.record(std::move(out), {x, bias}, [x, bias, r, c](Tape& tape, const Tensor& up) {
    tape.accumulate(x, up);
    if (Tensor* gb = tape.adjoint(bias)) {
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) (*gb)[j] += up(i, j);
    }
  });
}

Var sum(Tape& t, Var a) {
  double s = 0.0;
  for (double v : t.value(a).values()) s += v;
  return t.record(Tensor::scalar(s), {a}, [a](Tape& tape, const Tensor& up) {
    if (Tensor* ga = tape.adjoint(a)) {
      const double u = up[0];
      for (double& g : ga->values()) g += u;
    }
  });
}

Var mean(Tape& t, Var a) {
  const std::size_t n = t.value(a).size();
  if (n == 0) throw InvalidArgument("mean of an empty tensor");
  return scale(t, sum(t, a), 1.0 / static_cast<double>(n));
}

Var concat_cols(Tape& t, std::initializer_list<Var> parts) {
  return concat_cols(t, std::span<const Var>(parts.begin(), parts.size()));
}

Var concat_cols(Tape& t, std::span<const Var> parts) {
  if (parts.empty()) throw InvalidArgument("concat_cols: no inputs");
  const std::size_t r = t.value(parts[0]).rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (Var p : parts) {
    const Tensor& v = t.value(p);
    if (v.rows() != r) {
      throw InvalidArgument("concat_cols: shape mismatch " + shape_string(t.value(parts[0]).shape()) + " vs " +
                            shape_string(v.shape()));
    }
    widths.push_back(v.cols());
    total += v.cols();
  }
  Tensor out = Tensor::zeros(r, total);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& v = t.value(parts[k]);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < widths[k]; ++j) out(i, offset + j) = v(i, j);
    offset += widths[k];
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return t.record(std::move(out), parts, [inputs, widths, r](Tape& tape, const Tensor& up) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
      if (Tensor* g = tape.adjoint(inputs[k])) {
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < widths[k]; ++j) (*g)(i, j) += up(i, off + j);
      }
      off += widths[k];
    }
  });
}

Var slice_cols(Tape& t, Var a, std::size_t begin, std::size_t end) {
  const Tensor& av = t.value(a);
  if (begin > end || end > av.cols()) {
    throw InvalidArgument("slice_cols: range [" + std::to_string(begin) + "," + std::to_string(end) +
                          ") outside shape " + shape_string(av.shape()));
  }
  const std::size_t r = av.rows(), w = end - begin;
  Tensor out = Tensor::zeros(r, w);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < w; ++j) out(i, j) = av(i, begin + j);
  return t.record(std::move(out), {a}, [a, begin, r, w](Tape& tape, const Tensor& up) {
    if (Tensor* g = tape.adjoint(a)) {
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < w; ++j) (*g)(i, begin + j) += up(i, j);
    }
  });
}

Var sigmoid(Tape& t, Var a) {
  Tensor out = map_values(t.value(a), [](double v) { return sigmoid(v); });
  return t.record(std::move(out), {a}, [a](Tape& tape, const Tensor& up) {
    if (Tensor* g = tape.adjoint(a)) {
      auto x = tape.value(a).values();
      auto gv = g->values();
      for (std::size_t i = 0; i < gv.size(); ++i) {
        const double s = sigmoid(x[i]);
        gv[i] += up[i] * s * (1.0 - s);
      }
    }
  });
}

Var relu(Tape& t, Var a) {
  Tensor out = map_values(t.value(a), [](double v) { return v > 0.0 ? v : 0.0; });
  return t.record(std::move(out), {a}, [a](Tape& tape, const Tensor& up) {
    if (Tensor* g = tape.adjoint(a)) {
      auto x = tape.value(a).values();
      auto gv = g->values();
      for (std::size_t i = 0; i < gv.size(); ++i)
        if (x[i] > 0.0) gv[i] += up[i];
    }
  });
}

Var clip(Tape& t, Var a, double bound) {
  if (!(bound > 0.0)) throw InvalidArgument("clip: bound must be positive");
  Tensor out = map_values(t.value(a), [bound](double v) { return std::clamp(v, -bound, bound); });
  return t.record(std::move(out), {a}, [a, bound](Tape& tape, const Tensor& up) {
    if (Tensor* g = tape.adjoint(a)) {
      auto x = tape.value(a).values();
      auto gv = g->values();
      for (std::size_t i = 0; i < gv.size(); ++i)
        if (x[i] > -bound && x[i] < bound) gv[i] += up[i];
    }
  });
}

Var squared_error(Tape& t, Var a, Var b) {
  require_same_shape(t, a, b, "squared_error");
  auto av = t.value(a).values();
  auto bv = t.value(b).values();
  double s = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double d = av[i] - bv[i];
    s += d * d;
  }
  return t.record(Tensor::scalar(s), {a, b}, [a, b](Tape& tape, const Tensor& up) {
    auto x = tape.value(a).values();
    auto y = tape.value(b).values();
    const double u = up[0];
    if (Tensor* ga = tape.adjoint(a)) {
      auto g = ga->values();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += 2.0 * u * (x[i] - y[i]);
    }
    if (Tensor* gb = tape.adjoint(b)) {
      auto g = gb->values();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= 2.0 * u * (x[i] - y[i]);
    }
  });
}

}  // namespace wildflow
