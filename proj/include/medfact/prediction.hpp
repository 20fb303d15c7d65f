#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "medfact/errors.hpp"
#include "medfact/numerics/autodiff.hpp"
#include "medfact/numerics/matrix.hpp"
#include "medfact/numerics/rng.hpp"

namespace medfact {

/// Single-head attention projections (d x d_a) and the output map (d_a x 1).
template <typename T>
struct Head {
  T w_q, w_k, w_v, w_pred;

  template <typename Fn>
  void for_each(Fn&& fn) {
    fn(std::string("head.w_q"), w_q), fn(std::string("head.w_k"), w_k);
    fn(std::string("head.w_v"), w_v), fn(std::string("head.w_pred"), w_pred);
  }
  template <typename Fn>
  void for_each(Fn&& fn) const {
    fn(std::string("head.w_q"), w_q), fn(std::string("head.w_k"), w_k);
    fn(std::string("head.w_v"), w_v), fn(std::string("head.w_pred"), w_pred);
  }
  template <typename Fn>
  auto transform(Fn&& fn) const {
    using U = decltype(fn(w_q));
    return Head<U>{fn(w_q), fn(w_k), fn(w_v), fn(w_pred)};
  }
};

using HeadParams = Head<Matrix>;

inline HeadParams init_head(std::size_t embed_dim, std::size_t attention_dim, SeededRng& rng) {
  auto init = [&](std::size_t rows, std::size_t cols) {
    Matrix m(rows, cols);
    const double a = 1.0 / std::sqrt(static_cast<double>(rows));
    for (double& v : m.data()) v = rng.uniform(-a, a);
    return m;
  };
  HeadParams p;
  p.w_q = init(embed_dim, attention_dim);
  p.w_k = init(embed_dim, attention_dim);
  p.w_v = init(embed_dim, attention_dim);
  p.w_pred = init(attention_dim, 1);
  return p;
}

struct PredictionOutput {
  double probability = 0.5;
  std::vector<double> attention;       // F + 1 weights, static last
  std::vector<double> representation;  // e, length d_a
};

/// Static-query attention over the interacted rows of Z* ((F+1) x d, static
/// row last):
///   q = z_s W_q,  k_i = z_i W_k,  v_i = z_i W_v   (static row included)
///   tau_i = tanh(q . k_i),  alpha = softmax(tau)
///   e = sum_i alpha_i v_i,  y = sigmoid(e W_pred)
inline PredictionOutput attend_predict(const Matrix& z_star, const HeadParams& p) {
  if (z_star.rows() < 1 || z_star.cols() != p.w_q.rows() || p.w_k.rows() != z_star.cols() ||
      p.w_v.rows() != z_star.cols() || p.w_pred.rows() != p.w_v.cols() || p.w_pred.cols() != 1 ||
      p.w_q.cols() != p.w_k.cols())
    throw ShapeError("attend_predict: Z* " + z_star.shape() + " does not conform to head (W_q " + p.w_q.shape() +
                     ", W_k " + p.w_k.shape() + ", W_v " + p.w_v.shape() + ", W_pred " + p.w_pred.shape() + ")");
  const std::size_t n = z_star.rows();
  Matrix zs(1, z_star.cols());
  std::copy(z_star.row(n - 1).begin(), z_star.row(n - 1).end(), zs.data().begin());
  const Matrix q = matmul(zs, p.w_q);
  const Matrix keys = matmul(z_star, p.w_k);
  const Matrix values = matmul(z_star, p.w_v);
  Matrix tau(1, n);
  for (std::size_t i = 0; i < n; ++i) {
    double dot = 0.0;
    for (std::size_t c = 0; c < q.cols(); ++c) dot += q(0, c) * keys(i, c);
    tau(0, i) = std::tanh(dot);
  }
  const Matrix alpha = softmax_rows(tau);
  PredictionOutput out;
  out.attention.assign(alpha.data().begin(), alpha.data().end());
  out.representation.assign(values.cols(), 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < values.cols(); ++c) out.representation[c] += alpha(0, i) * values(i, c);
  double logit = 0.0;
  for (std::size_t c = 0; c < values.cols(); ++c) logit += out.representation[c] * p.w_pred(c, 0);
  out.probability = sigmoid(logit);
  return out;
}

/// -y ln p - (1 - y) ln(1 - p), with p clamped to [1e-12, 1 - 1e-12].
inline double bce_loss(double p, double y) {
  const double q = std::clamp(p, ad::kProbabilityClamp, 1.0 - ad::kProbabilityClamp);
  return -y * std::log(q) - (1.0 - y) * std::log(1.0 - q);
}

namespace ad {

struct BatchPrediction {
  Var probability;  // B x 1
  Var attention;    // B x (F+1)
};

/// Batched attend_predict over per-node B x d blocks (static node last).
inline BatchPrediction attend_predict(const std::vector<Var>& nodes, const Head<Var>& p) {
  if (nodes.empty()) throw ShapeError("attend_predict: no nodes");
  Tape& tape = p.w_q.tape();
  const std::size_t b = nodes[0].rows(), da = p.w_q.cols();
  const Var q = matmul(nodes.back(), p.w_q);
  const Var sum_cols = tape.constant(Matrix(da, 1, 1.0));
  const Var spread = tape.constant(Matrix(1, da, 1.0));
  std::vector<Var> scores, values;
  scores.reserve(nodes.size());
  values.reserve(nodes.size());
  for (const Var& z : nodes) {
    if (z.rows() != b) throw ShapeError("attend_predict: node blocks differ in batch size");
    scores.push_back(tanh(matmul(mul(q, matmul(z, p.w_k)), sum_cols)));
    values.push_back(matmul(z, p.w_v));
  }
  const Var alpha = softmax_rows(concat_cols(scores));
  std::optional<Var> e;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const Var weighted = mul(matmul(slice_cols(alpha, i, 1), spread), values[i]);
    e = e ? add(*e, weighted) : weighted;
  }
  return {sigmoid(matmul(*e, p.w_pred)), alpha};
}

}  // namespace ad
}  // namespace medfact
