#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "medfact/correlation.hpp"
#include "medfact/errors.hpp"
#include "medfact/numerics/autodiff.hpp"
#include "medfact/numerics/matrix.hpp"
#include "medfact/numerics/rng.hpp"

namespace medfact {

/// Two d x d GCN weights; no biases.
template <typename T>
struct Gcn {
  T w1, w2;

  template <typename Fn>
  void for_each(Fn&& fn) {
    fn(std::string("gcn.w1"), w1), fn(std::string("gcn.w2"), w2);
  }
  template <typename Fn>
  void for_each(Fn&& fn) const {
    fn(std::string("gcn.w1"), w1), fn(std::string("gcn.w2"), w2);
  }
  template <typename Fn>
  auto transform(Fn&& fn) const {
    using U = decltype(fn(w1));
    return Gcn<U>{fn(w1), fn(w2)};
  }
};

using GcnParams = Gcn<Matrix>;

inline GcnParams init_gcn(std::size_t embed_dim, SeededRng& rng) {
  auto init = [&] {
    Matrix m(embed_dim, embed_dim);
    const double a = 1.0 / std::sqrt(static_cast<double>(embed_dim));
    for (double& v : m.data()) v = rng.uniform(-a, a);
    return m;
  };
  GcnParams p;
  p.w1 = init();
  p.w2 = init();
  return p;
}

/// D^-1/2 A D^-1/2 with D the row sums of A. The model applies raw A unless
/// a caller opts in.
inline Matrix symmetric_normalized(const Matrix& a) {
  std::vector<double> s(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double d = 0.0;
    for (double v : a.row(i)) d += v;
    s[i] = d > 0.0 ? 1.0 / std::sqrt(d) : 0.0;
  }
  Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) = s[i] * a(i, j) * s[j];
  return out;
}

/// ReLU(A Z W).
inline Matrix gcn_layer(const Matrix& z, const Matrix& a, const Matrix& w) {
  if (a.rows() != a.cols() || a.cols() != z.rows())
    throw ShapeError("gcn_layer: adjacency " + a.shape() + " does not match Z " + z.shape());
  if (w.rows() != z.cols()) throw ShapeError("gcn_layer: W " + w.shape() + " does not match Z " + z.shape());
  return relu(matmul(matmul(a, z), w));
}

/// Z* = ReLU(A ReLU(A Z W1) W2).
inline Matrix interact(const Matrix& z, const CorrelationGraph& g, const GcnParams& p) {
  return gcn_layer(gcn_layer(z, g.adjacency, p.w1), g.adjacency, p.w2);
}

namespace ad {

/// Differentiable ReLU(A Z W) for one patient's (F+1) x d matrix.
inline Var gcn_layer(Var z, const Matrix& a, Var w) {
  if (a.rows() != a.cols() || a.cols() != z.rows())
    throw ShapeError("gcn_layer: adjacency " + a.shape() + " does not match Z " + z.value().shape());
  return relu(matmul(matmul(z.tape().constant(a), z), w));
}

/// Batched layer over per-node B x d blocks: out_i = ReLU(sum_j a_ij Z_j W).
/// Zero adjacency entries contribute nothing, so cross-group terms are
/// absent from the tape rather than multiplied by zero.
inline std::vector<Var> gcn_layer(const std::vector<Var>& nodes, const Matrix& a, Var w) {
  const std::size_t n = nodes.size();
  if (a.rows() != n || a.cols() != n)
    throw ShapeError("gcn_layer: adjacency " + a.shape() + " does not match " + std::to_string(n) + " nodes");
  std::vector<Var> projected;
  projected.reserve(n);
  for (const Var& z : nodes) projected.push_back(matmul(z, w));
  std::vector<Var> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::optional<Var> acc;
    for (std::size_t j = 0; j < n; ++j) {
      const double aij = a(i, j);
      if (aij == 0.0) continue;
      const Var term = aij == 1.0 ? projected[j] : scale(projected[j], aij);
      acc = acc ? add(*acc, term) : term;
    }
    out.push_back(acc ? relu(*acc) : relu(scale(projected[i], 0.0)));
  }
  return out;
}

inline std::vector<Var> interact(const std::vector<Var>& nodes, const Matrix& a, const Gcn<Var>& p) {
  return gcn_layer(gcn_layer(nodes, a, p.w1), a, p.w2);
}

}  // namespace ad
}  // namespace medfact
