#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "medfact/errors.hpp"
#include "medfact/numerics/matrix.hpp"

namespace medfact {

/// Reverse-mode differentiation over a fixed operator vocabulary.
///
/// A Tape records every operation applied to its variables in creation
/// order, which is a topological order, so backward() is a single reverse
/// sweep. Nodes that depend only on constants carry no gradient buffer.
namespace ad {

enum class Op {
  parameter,
  constant,
  matmul,
  add,
  sub,
  mul,
  relu,
  tanh,
  sigmoid,
  softmax_rows,
  concat_rows,
  concat_cols,
  slice_rows,
  slice_cols,
  sum,
  scale,
  l1_distance,
  bce_mean,
};

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Matrix& value() const;
  const Matrix& grad() const;
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  Tape() { nodes_.reserve(1024); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf whose gradient is wanted.
  Var parameter(Matrix value) { return push(Op::parameter, std::move(value), {}, true); }
  /// Leaf treated as fixed input.
  Var constant(Matrix value) { return push(Op::constant, std::move(value), {}, false); }

  std::size_t size() const { return nodes_.size(); }

  /// Accumulates d(root)/d(node) into every node that requires a gradient.
  /// The root must hold a 1x1 value.
  void backward(Var root) {
    const Node& r = nodes_.at(root.id());
    if (r.value.rows() != 1 || r.value.cols() != 1) {
      throw ContractError("backward: root must be a scalar (1x1), got " + r.value.shape());
    }
    for (auto& n : nodes_) n.grad = Matrix();
    if (!r.requires_grad) return;
    nodes_[root.id()].grad = Matrix(1, 1, 1.0);
    for (std::size_t i = root.id() + 1; i-- > 0;) {
      if (!nodes_[i].requires_grad || nodes_[i].grad.empty()) continue;
      propagate(i);
    }
  }

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  const Matrix& grad(std::size_t id) const {
    const Node& n = nodes_[id];
    if (n.grad.empty()) {
      zero_cache_ = Matrix(n.value.rows(), n.value.cols());
      return zero_cache_;
    }
    return n.grad;
  }

  // Operator constructors; see free functions below for the public spelling.
  Var make(Op op, Matrix value, std::vector<std::size_t> parents, double scalar = 0.0, std::size_t a = 0,
           std::size_t b = 0) {
    bool rg = false;
    for (auto p : parents) rg = rg || nodes_[p].requires_grad;
    Var v = push(op, std::move(value), std::move(parents), rg);
    nodes_.back().scalar = scalar;
    nodes_.back().a = a;
    nodes_.back().b = b;
    return v;
  }
  void attach_aux(Var v, Matrix aux) { nodes_[v.id()].aux = std::move(aux); }

 private:
  struct Node {
    Op op;
    Matrix value;
    std::vector<std::size_t> parents;
    bool requires_grad = false;
    Matrix grad;
    double scalar = 0.0;
    std::size_t a = 0, b = 0;
    Matrix aux;
  };

  Var push(Op op, Matrix value, std::vector<std::size_t> parents, bool requires_grad) {
    nodes_.push_back(Node{op, std::move(value), std::move(parents), requires_grad, {}, 0.0, 0, 0, {}});
    return Var(this, nodes_.size() - 1);
  }

  void accumulate(std::size_t id, const Matrix& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (n.grad.empty())
      n.grad = g;
    else
      n.grad += g;
  }

  Matrix& grad_buffer(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) n.grad = Matrix(n.value.rows(), n.value.cols());
    return n.grad;
  }

  void propagate(std::size_t i) {
    // Copy what we need: accumulate() may touch other nodes but never nodes_
    // capacity, so references into nodes_[i] stay valid.
    const Node& n = nodes_[i];
    const Matrix& g = n.grad;
    const Matrix& y = n.value;
    auto parent_requires = [&](std::size_t k) { return nodes_[n.parents[k]].requires_grad; };
    switch (n.op) {
      case Op::parameter:
      case Op::constant:
        break;
      case Op::matmul: {
        const Matrix& a = nodes_[n.parents[0]].value;
        const Matrix& b = nodes_[n.parents[1]].value;
        if (parent_requires(0)) accumulate(n.parents[0], matmul_nt(g, b));
        if (parent_requires(1)) accumulate(n.parents[1], matmul_tn(a, g));
        break;
      }
      case Op::add:
        accumulate(n.parents[0], g);
        accumulate(n.parents[1], g);
        break;
      case Op::sub:
        accumulate(n.parents[0], g);
        if (parent_requires(1)) accumulate(n.parents[1], g * -1.0);
        break;
      case Op::mul: {
        if (parent_requires(0)) accumulate(n.parents[0], hadamard(g, nodes_[n.parents[1]].value));
        if (parent_requires(1)) accumulate(n.parents[1], hadamard(g, nodes_[n.parents[0]].value));
        break;
      }
      case Op::relu: {
        Matrix d = g;
        auto dd = d.data();
        auto yy = y.data();
        for (std::size_t k = 0; k < dd.size(); ++k)
          if (!(yy[k] > 0.0)) dd[k] = 0.0;
        accumulate(n.parents[0], d);
        break;
      }
      case Op::tanh: {
        Matrix d = g;
        auto dd = d.data();
        auto yy = y.data();
        for (std::size_t k = 0; k < dd.size(); ++k) dd[k] *= 1.0 - yy[k] * yy[k];
        accumulate(n.parents[0], d);
        break;
      }
      case Op::sigmoid: {
        Matrix d = g;
        auto dd = d.data();
        auto yy = y.data();
        for (std::size_t k = 0; k < dd.size(); ++k) dd[k] *= yy[k] * (1.0 - yy[k]);
        accumulate(n.parents[0], d);
        break;
      }
      case Op::softmax_rows: {
        Matrix d(y.rows(), y.cols());
        for (std::size_t r = 0; r < y.rows(); ++r) {
          double dot = 0.0;
          for (std::size_t c = 0; c < y.cols(); ++c) dot += g(r, c) * y(r, c);
          for (std::size_t c = 0; c < y.cols(); ++c) d(r, c) = y(r, c) * (g(r, c) - dot);
        }
        accumulate(n.parents[0], d);
        break;
      }
      case Op::concat_rows: {
        std::size_t offset = 0;
        for (std::size_t k = 0; k < n.parents.size(); ++k) {
          const std::size_t pr = nodes_[n.parents[k]].value.rows();
          if (parent_requires(k)) {
            Matrix& dst = grad_buffer(n.parents[k]);
            for (std::size_t r = 0; r < pr; ++r)
              for (std::size_t c = 0; c < y.cols(); ++c) dst(r, c) += g(offset + r, c);
          }
          offset += pr;
        }
        break;
      }
      case Op::concat_cols: {
        std::size_t offset = 0;
        for (std::size_t k = 0; k < n.parents.size(); ++k) {
          const std::size_t pc = nodes_[n.parents[k]].value.cols();
          if (parent_requires(k)) {
            Matrix& dst = grad_buffer(n.parents[k]);
            for (std::size_t r = 0; r < y.rows(); ++r)
              for (std::size_t c = 0; c < pc; ++c) dst(r, c) += g(r, offset + c);
          }
          offset += pc;
        }
        break;
      }
      case Op::slice_rows: {
        Matrix& dst = grad_buffer(n.parents[0]);
        for (std::size_t r = 0; r < y.rows(); ++r)
          for (std::size_t c = 0; c < y.cols(); ++c) dst(n.a + r, c) += g(r, c);
        break;
      }
      case Op::slice_cols: {
        Matrix& dst = grad_buffer(n.parents[0]);
        for (std::size_t r = 0; r < y.rows(); ++r)
          for (std::size_t c = 0; c < y.cols(); ++c) dst(r, n.a + c) += g(r, c);
        break;
      }
      case Op::sum: {
        const Matrix& x = nodes_[n.parents[0]].value;
        accumulate(n.parents[0], Matrix(x.rows(), x.cols(), g(0, 0)));
        break;
      }
      case Op::scale:
        accumulate(n.parents[0], g * n.scalar);
        break;
      case Op::l1_distance: {
        const Matrix& a = nodes_[n.parents[0]].value;
        const Matrix& b = nodes_[n.parents[1]].value;
        Matrix d(a.rows(), a.cols());
        auto dd = d.data();
        auto x = a.data();
        auto z = b.data();
        for (std::size_t k = 0; k < dd.size(); ++k) {
          const double diff = x[k] - z[k];
          dd[k] = g(0, 0) * (diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0));
        }
        if (parent_requires(1)) accumulate(n.parents[1], d * -1.0);
        accumulate(n.parents[0], d);
        break;
      }
      case Op::bce_mean: {
        const Matrix& p = nodes_[n.parents[0]].value;
        const Matrix& labels = n.aux;
        const double eps = n.scalar;
        const double inv = 1.0 / static_cast<double>(p.size());
        Matrix d(p.rows(), p.cols());
        auto dd = d.data();
        auto pp = p.data();
        auto yy = labels.data();
        for (std::size_t k = 0; k < dd.size(); ++k) {
          if (pp[k] < eps || pp[k] > 1.0 - eps) continue;  // clamped region is flat
          dd[k] = g(0, 0) * inv * (pp[k] - yy[k]) / (pp[k] * (1.0 - pp[k]));
        }
        accumulate(n.parents[0], d);
        break;
      }
    }
  }

  std::vector<Node> nodes_;
  mutable Matrix zero_cache_;
};

inline const Matrix& Var::value() const { return tape_->value(id_); }
inline const Matrix& Var::grad() const { return tape_->grad(id_); }

inline void require_same_tape(Var a, Var b, const char* op) {
  if (&a.tape() != &b.tape()) throw ContractError(std::string(op) + ": operands live on different tapes");
}

inline Var matmul(Var a, Var b) {
  require_same_tape(a, b, "matmul");
  return a.tape().make(Op::matmul, medfact::matmul(a.value(), b.value()), {a.id(), b.id()});
}

inline Var add(Var a, Var b) {
  require_same_tape(a, b, "add");
  if (!a.value().same_shape(b.value()))
    throw ShapeError("add: shapes " + a.value().shape() + " and " + b.value().shape() + " differ");
  return a.tape().make(Op::add, a.value() + b.value(), {a.id(), b.id()});
}

inline Var sub(Var a, Var b) {
  require_same_tape(a, b, "sub");
  if (!a.value().same_shape(b.value()))
    throw ShapeError("sub: shapes " + a.value().shape() + " and " + b.value().shape() + " differ");
  return a.tape().make(Op::sub, a.value() - b.value(), {a.id(), b.id()});
}

/// Elementwise product.
inline Var mul(Var a, Var b) {
  require_same_tape(a, b, "mul");
  return a.tape().make(Op::mul, hadamard(a.value(), b.value()), {a.id(), b.id()});
}

inline Var relu(Var a) { return a.tape().make(Op::relu, medfact::relu(a.value()), {a.id()}); }
inline Var tanh(Var a) { return a.tape().make(Op::tanh, medfact::tanh(a.value()), {a.id()}); }
inline Var sigmoid(Var a) { return a.tape().make(Op::sigmoid, medfact::sigmoid(a.value()), {a.id()}); }
inline Var softmax_rows(Var a) { return a.tape().make(Op::softmax_rows, medfact::softmax_rows(a.value()), {a.id()}); }

inline Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractError("concat_rows: no operands");
  const std::size_t cols = parts[0].cols();
  std::size_t rows = 0;
  std::vector<std::size_t> ids;
  for (const Var& p : parts) {
    require_same_tape(parts[0], p, "concat_rows");
    if (p.cols() != cols) throw ShapeError("concat_rows: column counts differ (" + p.value().shape() + ")");
    rows += p.rows();
    ids.push_back(p.id());
  }
  Matrix out(rows, cols);
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const auto src = p.value().data();
    std::copy(src.begin(), src.end(), out.data().begin() + static_cast<std::ptrdiff_t>(offset * cols));
    offset += p.rows();
  }
  return parts[0].tape().make(Op::concat_rows, std::move(out), std::move(ids));
}

inline Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractError("concat_cols: no operands");
  const std::size_t rows = parts[0].rows();
  std::size_t cols = 0;
  std::vector<std::size_t> ids;
  for (const Var& p : parts) {
    require_same_tape(parts[0], p, "concat_cols");
    if (p.rows() != rows) throw ShapeError("concat_cols: row counts differ (" + p.value().shape() + ")");
    cols += p.cols();
    ids.push_back(p.id());
  }
  Matrix out(rows, cols);
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Matrix& v = p.value();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < v.cols(); ++c) out(r, offset + c) = v(r, c);
    offset += v.cols();
  }
  return parts[0].tape().make(Op::concat_cols, std::move(out), std::move(ids));
}

/// Rows [begin, begin + count).
inline Var slice_rows(Var a, std::size_t begin, std::size_t count) {
  const Matrix& v = a.value();
  if (begin + count > v.rows())
    throw ShapeError("slice_rows: rows [" + std::to_string(begin) + "," + std::to_string(begin + count) +
                     ") out of range for " + v.shape());
  Matrix out(count, v.cols());
  for (std::size_t r = 0; r < count; ++r)
    for (std::size_t c = 0; c < v.cols(); ++c) out(r, c) = v(begin + r, c);
  return a.tape().make(Op::slice_rows, std::move(out), {a.id()}, 0.0, begin, count);
}

/// Columns [begin, begin + count).
inline Var slice_cols(Var a, std::size_t begin, std::size_t count) {
  const Matrix& v = a.value();
  if (begin + count > v.cols())
    throw ShapeError("slice_cols: cols [" + std::to_string(begin) + "," + std::to_string(begin + count) +
                     ") out of range for " + v.shape());
  Matrix out(v.rows(), count);
  for (std::size_t r = 0; r < v.rows(); ++r)
    for (std::size_t c = 0; c < count; ++c) out(r, c) = v(r, begin + c);
  return a.tape().make(Op::slice_cols, std::move(out), {a.id()}, 0.0, begin, count);
}

/// Sum of all entries, as a 1x1.
inline Var sum(Var a) { return a.tape().make(Op::sum, Matrix(1, 1, a.value().sum()), {a.id()}); }

inline Var scale(Var a, double s) { return a.tape().make(Op::scale, a.value() * s, {a.id()}, s); }

/// Sum of absolute differences, as a 1x1.
inline Var l1_distance(Var a, Var b) {
  require_same_tape(a, b, "l1_distance");
  if (!a.value().same_shape(b.value()))
    throw ShapeError("l1_distance: shapes " + a.value().shape() + " and " + b.value().shape() + " differ");
  double s = 0.0;
  auto x = a.value().data();
  auto z = b.value().data();
  for (std::size_t k = 0; k < x.size(); ++k) s += std::abs(x[k] - z[k]);
  return a.tape().make(Op::l1_distance, Matrix(1, 1, s), {a.id(), b.id()});
}

inline constexpr double kProbabilityClamp = 1e-12;

/// Mean binary cross-entropy of probabilities `p` against 0/1 `labels` of the
/// same shape. Probabilities are clamped to [eps, 1 - eps].
inline Var bce_mean(Var p, const Matrix& labels, double eps = kProbabilityClamp) {
  if (!p.value().same_shape(labels))
    throw ShapeError("bce_mean: probabilities " + p.value().shape() + " vs labels " + labels.shape());
  double total = 0.0;
  auto pp = p.value().data();
  auto yy = labels.data();
  for (std::size_t k = 0; k < pp.size(); ++k) {
    const double q = std::clamp(pp[k], eps, 1.0 - eps);
    total += -yy[k] * std::log(q) - (1.0 - yy[k]) * std::log(1.0 - q);
  }
  Var out = p.tape().make(Op::bce_mean, Matrix(1, 1, total / static_cast<double>(pp.size())), {p.id()}, eps);
  p.tape().attach_aux(out, labels);
  return out;
}

/// Runs the reverse sweep from `root`; gradients are read back via Var::grad().
inline void backward(Var root) { root.tape().backward(root); }

}  // namespace ad
}  // namespace medfact
