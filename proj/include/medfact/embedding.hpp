#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "medfact/data/cohort.hpp"
#include "medfact/errors.hpp"
#include "medfact/numerics/autodiff.hpp"
#include "medfact/numerics/matrix.hpp"
#include "medfact/numerics/rng.hpp"

namespace medfact {

/// One GRU over a univariate series. Gate inputs are 1 x h (input size 1),
/// recurrent weights h x h, biases 1 x h.
///
/// Update convention:
///   z_t = sigmoid(x_t w_z + h_{t-1} u_z + b_z)
///   r_t = sigmoid(x_t w_r + h_{t-1} u_r + b_r)
///   c_t = tanh(x_t w_h + (r_t * h_{t-1}) u_h + b_h)
///   h_t = (1 - z_t) * h_{t-1} + z_t * c_t,   h_0 = 0
template <typename T>
struct GruChannel {
  T w_z, w_r, w_h;
  T u_z, u_r, u_h;
  T b_z, b_r, b_h;

  template <typename Fn>
  void for_each(Fn&& fn) {
    fn("w_z", w_z), fn("w_r", w_r), fn("w_h", w_h);
    fn("u_z", u_z), fn("u_r", u_r), fn("u_h", u_h);
    fn("b_z", b_z), fn("b_r", b_r), fn("b_h", b_h);
  }
  template <typename Fn>
  void for_each(Fn&& fn) const {
    fn("w_z", w_z), fn("w_r", w_r), fn("w_h", w_h);
    fn("u_z", u_z), fn("u_r", u_r), fn("u_h", u_h);
    fn("b_z", b_z), fn("b_r", b_r), fn("b_h", b_h);
  }
  template <typename Fn>
  auto transform(Fn&& fn) const {
    using U = decltype(fn(w_z));
    return GruChannel<U>{fn(w_z), fn(w_r), fn(w_h), fn(u_z), fn(u_r), fn(u_h), fn(b_z), fn(b_r), fn(b_h)};
  }
};

using GruChannelParams = GruChannel<Matrix>;

/// Per-feature GRUs, the static linear map W_s (S x h) and the projection
/// W_proj (h x d) shared by all F + 1 rows.
template <typename T>
struct Embedding {
  std::vector<GruChannel<T>> channels;
  T w_static;
  T w_proj;

  template <typename Fn>
  void for_each(Fn&& fn) {
    for (std::size_t i = 0; i < channels.size(); ++i)
      channels[i].for_each([&](const char* n, T& m) { fn("gru" + std::to_string(i) + "." + n, m); });
    fn(std::string("w_static"), w_static);
    fn(std::string("w_proj"), w_proj);
  }
  template <typename Fn>
  void for_each(Fn&& fn) const {
    for (std::size_t i = 0; i < channels.size(); ++i)
      channels[i].for_each([&](const char* n, const T& m) { fn("gru" + std::to_string(i) + "." + n, m); });
    fn(std::string("w_static"), w_static);
    fn(std::string("w_proj"), w_proj);
  }
  template <typename Fn>
  auto transform(Fn&& fn) const {
    using U = decltype(fn(w_proj));
    Embedding<U> out;
    for (const auto& c : channels) out.channels.push_back(c.transform(fn));
    out.w_static = fn(w_static);
    out.w_proj = fn(w_proj);
    return out;
  }
};

using EmbeddingParams = Embedding<Matrix>;

/// Uniform(-a, a) with a = 1/sqrt(fan_in).
inline Matrix uniform_init(std::size_t rows, std::size_t cols, std::size_t fan_in, SeededRng& rng) {
  Matrix m(rows, cols);
  const double a = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  for (double& v : m.data()) v = rng.uniform(-a, a);
  return m;
}

inline GruChannelParams init_gru_channel(std::size_t hidden, SeededRng& rng) {
  GruChannelParams p;
  p.w_z = uniform_init(1, hidden, 1, rng);
  p.w_r = uniform_init(1, hidden, 1, rng);
  p.w_h = uniform_init(1, hidden, 1, rng);
  p.u_z = uniform_init(hidden, hidden, hidden, rng);
  p.u_r = uniform_init(hidden, hidden, hidden, rng);
  p.u_h = uniform_init(hidden, hidden, hidden, rng);
  p.b_z = Matrix(1, hidden);
  p.b_r = Matrix(1, hidden);
  p.b_h = Matrix(1, hidden);
  return p;
}

/// With `tied_channels` every GRU channel starts from the same draw (they are
/// still trained independently), so all features begin in one embedding
/// coordinate system and cross-feature kernel similarities are comparable.
inline EmbeddingParams init_embedding(std::size_t features, std::size_t statics, std::size_t hidden,
                                      std::size_t embed_dim, SeededRng& rng, bool tied_channels = true) {
  EmbeddingParams p;
  if (tied_channels && features > 0) {
    p.channels.assign(features, init_gru_channel(hidden, rng));
  } else {
    for (std::size_t i = 0; i < features; ++i) p.channels.push_back(init_gru_channel(hidden, rng));
  }
  p.w_static = uniform_init(statics, hidden, statics, rng);
  p.w_proj = uniform_init(hidden, embed_dim, hidden, rng);
  return p;
}

// ---------------------------------------------------------------------------
// Single-patient forward path on plain matrices.

/// Final hidden state h_T (1 x h) of one channel over `series`.
inline Matrix gru_forward(std::span<const double> series, const GruChannelParams& p) {
  if (series.empty()) throw ContractError("gru_forward: empty series");
  const std::size_t h = p.u_z.rows();
  Matrix state(1, h);
  for (double x : series) {
    const Matrix z = sigmoid(p.w_z * x + matmul(state, p.u_z) + p.b_z);
    const Matrix r = sigmoid(p.w_r * x + matmul(state, p.u_r) + p.b_r);
    const Matrix c = tanh(p.w_h * x + matmul(hadamard(r, state), p.u_h) + p.b_h);
    for (std::size_t k = 0; k < h; ++k) state(0, k) = (1.0 - z(0, k)) * state(0, k) + z(0, k) * c(0, k);
  }
  return state;
}

inline std::vector<double> column(const Matrix& m, std::size_t c) {
  std::vector<double> out(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) out[r] = m(r, c);
  return out;
}

/// Z = [z_1 .. z_F, z_s]^T, (F+1) x d. Row i < F is ReLU(h_iT W_proj);
/// the last row is ReLU((s W_s) W_proj).
inline Matrix embed_patient(const PatientRecord& rec, const EmbeddingParams& p) {
  const std::size_t f = rec.dynamic.cols();
  if (f != p.channels.size())
    throw ContractError("embed_patient: record has " + std::to_string(f) + " dynamic features, parameters have " +
                        std::to_string(p.channels.size()) + " channels");
  if (rec.static_values.size() != p.w_static.rows())
    throw ContractError("embed_patient: record has " + std::to_string(rec.static_values.size()) +
                        " static features, W_s expects " + std::to_string(p.w_static.rows()));
  const std::size_t d = p.w_proj.cols();
  Matrix z(f + 1, d);
  for (std::size_t i = 0; i < f; ++i) {
    const auto series = column(rec.dynamic, i);
    const Matrix row = relu(matmul(gru_forward(series, p.channels[i]), p.w_proj));
    std::copy(row.data().begin(), row.data().end(), z.row(i).begin());
  }
  const Matrix hs = matmul(Matrix::row_vector(rec.static_values), p.w_static);
  const Matrix zs = relu(matmul(hs, p.w_proj));
  std::copy(zs.data().begin(), zs.data().end(), z.row(f).begin());
  return z;
}

// ---------------------------------------------------------------------------
// Batched differentiable path. A batch of B patients is laid out feature by
// feature: each channel's series become per-step B x 1 input columns, with
// B x h masks so shorter sequences keep their state once they end.

struct SequenceBatch {
  std::size_t size = 0;
  std::size_t steps = 0;
  /// inputs[i][t]: B x 1 values of feature i at step t (0 past the end).
  std::vector<std::vector<Matrix>> inputs;
  /// active[t]: B x 1, 1 where step t exists for that patient.
  std::vector<Matrix> active;
  Matrix statics;  // B x S
};

inline SequenceBatch make_sequence_batch(std::span<const PatientRecord* const> records) {
  SequenceBatch b;
  b.size = records.size();
  if (b.size == 0) return b;
  const std::size_t f = records[0]->dynamic.cols();
  const std::size_t s = records[0]->static_values.size();
  for (const auto* r : records) {
    if (r->visit_count() == 0) throw ContractError("batch: record '" + r->id + "' has no visits");
    if (r->dynamic.cols() != f || r->static_values.size() != s)
      throw ContractError("batch: record '" + r->id + "' has a different feature layout");
    b.steps = std::max(b.steps, r->visit_count());
  }
  b.inputs.assign(f, std::vector<Matrix>(b.steps, Matrix(b.size, 1)));
  b.active.assign(b.steps, Matrix(b.size, 1));
  b.statics = Matrix(b.size, s);
  for (std::size_t n = 0; n < b.size; ++n) {
    const auto& rec = *records[n];
    for (std::size_t t = 0; t < rec.visit_count(); ++t) {
      b.active[t](n, 0) = 1.0;
      for (std::size_t i = 0; i < f; ++i) b.inputs[i][t](n, 0) = rec.dynamic(t, i);
    }
    for (std::size_t j = 0; j < s; ++j) b.statics(n, j) = rec.static_values[j];
  }
  return b;
}

namespace ad {

/// Final hidden states (B x h) of one channel over a batch of sequences.
inline Var gru_forward(const GruChannel<Var>& p, const std::vector<Matrix>& inputs, const std::vector<Matrix>& active) {
  if (inputs.empty()) throw ContractError("gru_forward: empty series");
  Tape& tape = p.u_z.tape();
  const std::size_t b = inputs[0].rows(), h = p.u_z.rows();
  const Var ones = tape.constant(Matrix(b, 1, 1.0));
  const Var ones_h = tape.constant(Matrix(1, h, 1.0));
  const Var bz = matmul(ones, p.b_z), br = matmul(ones, p.b_r), bh = matmul(ones, p.b_h);
  Var state = tape.constant(Matrix(b, h));
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    const Var x = tape.constant(inputs[t]);
    const Var z = sigmoid(add(add(matmul(x, p.w_z), matmul(state, p.u_z)), bz));
    const Var r = sigmoid(add(add(matmul(x, p.w_r), matmul(state, p.u_r)), br));
    const Var c = tanh(add(add(matmul(x, p.w_h), matmul(mul(r, state), p.u_h)), bh));
    // Masked update: rows past their sequence end keep their state.
    const Var mask = tape.constant(medfact::matmul(active[t], ones_h.value()));
    state = add(state, mul(mul(mask, z), sub(c, state)));
  }
  return state;
}

/// Per-node embeddings for a batch: result[i] is B x d, i < F dynamic,
/// result[F] static.
inline std::vector<Var> embed_batch(const Embedding<Var>& p, const SequenceBatch& batch) {
  if (batch.inputs.size() != p.channels.size())
    throw ContractError("embed_batch: batch has " + std::to_string(batch.inputs.size()) +
                        " dynamic features, parameters have " + std::to_string(p.channels.size()) + " channels");
  Tape& tape = p.w_proj.tape();
  std::vector<Var> out;
  out.reserve(p.channels.size() + 1);
  for (std::size_t i = 0; i < p.channels.size(); ++i)
    out.push_back(relu(matmul(gru_forward(p.channels[i], batch.inputs[i], batch.active), p.w_proj)));
  const Var hs = matmul(tape.constant(batch.statics), p.w_static);
  out.push_back(relu(matmul(hs, p.w_proj)));
  return out;
}

}  // namespace ad
}  // namespace medfact
