#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "medfact/correlation.hpp"
#include "medfact/data/cohort.hpp"
#include "medfact/embedding.hpp"
#include "medfact/interaction.hpp"
#include "medfact/numerics/autodiff.hpp"
#include "medfact/prediction.hpp"

namespace medfact {

struct ModelDims {
  std::size_t features = 0;
  std::size_t statics = 0;
  std::size_t hidden = 16;
  std::size_t embed = 16;
  std::size_t attention = 16;
  bool tied_channels = true;  // GRU channels share their initial draw
};

/// Every trainable parameter group of the model. T is Matrix for stored
/// values and gradients, ad::Var when bound to a tape.
template <typename T>
struct Model {
  Embedding<T> embedding;
  Gcn<T> gcn;
  Head<T> head;

  /// Visits (name, parameter) in a fixed order shared by all T.
  template <typename Fn>
  void for_each(Fn&& fn) {
    embedding.for_each(fn);
    gcn.for_each(fn);
    head.for_each(fn);
  }
  template <typename Fn>
  void for_each(Fn&& fn) const {
    embedding.for_each(fn);
    gcn.for_each(fn);
    head.for_each(fn);
  }
  template <typename Fn>
  auto transform(Fn&& fn) const {
    using U = decltype(fn(gcn.w1));
    return Model<U>{embedding.transform(fn), gcn.transform(fn), head.transform(fn)};
  }
};

using ModelParams = Model<Matrix>;

inline ModelParams init_model(const ModelDims& dims, std::uint64_t seed) {
  SeededRng rng = SeededRng::derive(seed, 0x1417);
  ModelParams m;
  m.embedding = init_embedding(dims.features, dims.statics, dims.hidden, dims.embed, rng, dims.tied_channels);
  m.gcn = init_gcn(dims.embed, rng);
  m.head = init_head(dims.embed, dims.attention, rng);
  return m;
}

inline ModelDims dims_of(const ModelParams& m) {
  ModelDims d;
  d.features = m.embedding.channels.size();
  d.statics = m.embedding.w_static.rows();
  d.hidden = m.embedding.w_proj.rows();
  d.embed = m.embedding.w_proj.cols();
  d.attention = m.head.w_q.cols();
  return d;
}

/// Same structure, every entry zero.
inline ModelParams zeros_like(const ModelParams& m) {
  return m.transform([](const Matrix& x) { return Matrix(x.rows(), x.cols()); });
}

inline Model<ad::Var> bind_parameters(ad::Tape& tape, const ModelParams& m) {
  return m.transform([&](const Matrix& x) { return tape.parameter(x); });
}

inline Model<ad::Var> bind_constants(ad::Tape& tape, const ModelParams& m) {
  return m.transform([&](const Matrix& x) { return tape.constant(x); });
}

inline ModelParams gradients_of(const Model<ad::Var>& bound) {
  return bound.transform([](const ad::Var& v) { return v.grad(); });
}

struct BatchForward {
  std::vector<ad::Var> embeddings;  // per node, B x d (static last)
  std::vector<ad::Var> interacted;  // per node, B x d
  ad::BatchPrediction prediction;
};

/// Full forward pass for a batch under adjacency `a` ((F+1) x (F+1)).
inline BatchForward forward_batch(const Model<ad::Var>& m, const SequenceBatch& batch, const Matrix& a) {
  BatchForward out;
  out.embeddings = ad::embed_batch(m.embedding, batch);
  out.interacted = ad::interact(out.embeddings, a, m.gcn);
  out.prediction = ad::attend_predict(out.interacted, m.head);
  return out;
}

/// Mean cross-entropy loss of a batch; returns the loss node.
inline ad::Var batch_loss(const BatchForward& fwd, std::span<const PatientRecord* const> records) {
  Matrix labels(records.size(), 1);
  for (std::size_t n = 0; n < records.size(); ++n) labels(n, 0) = records[n]->label;
  return ad::bce_mean(fwd.prediction.probability, labels);
}

/// Single-patient prediction on plain matrices (no tape).
inline PredictionOutput predict_patient(const PatientRecord& rec, const ModelParams& m, const Matrix& a) {
  return attend_predict(interact(embed_patient(rec, m.embedding), CorrelationGraph{a}, m.gcn), m.head);
}

inline std::vector<const PatientRecord*> record_pointers(const Cohort& c, const std::vector<std::size_t>& indices) {
  std::vector<const PatientRecord*> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(&c.records.at(i));
  return out;
}

inline std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  return idx;
}

/// Predicted probabilities for `indices`, evaluated in chunks.
inline std::vector<double> predict(const Cohort& c, const std::vector<std::size_t>& indices, const ModelParams& m,
                                   const Matrix& a, std::size_t chunk = 256) {
  std::vector<double> out;
  out.reserve(indices.size());
  const auto recs = record_pointers(c, indices);
  for (std::size_t start = 0; start < recs.size(); start += chunk) {
    const std::size_t len = std::min(chunk, recs.size() - start);
    std::span<const PatientRecord* const> part(recs.data() + start, len);
    ad::Tape tape;
    const auto bound = bind_constants(tape, m);
    const auto fwd = forward_batch(bound, make_sequence_batch(part), a);
    const auto p = fwd.prediction.probability.value().data();
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

/// Per-patient F x d dynamic-feature embeddings (the rows fed to the
/// correlation estimate), evaluated in chunks.
inline std::vector<Matrix> dynamic_embeddings(const Cohort& c, const std::vector<std::size_t>& indices,
                                              const Embedding<Matrix>& emb, std::size_t chunk = 256) {
  const std::size_t f = emb.channels.size();
  const std::size_t d = emb.w_proj.cols();
  std::vector<Matrix> out;
  out.reserve(indices.size());
  const auto recs = record_pointers(c, indices);
  for (std::size_t start = 0; start < recs.size(); start += chunk) {
    const std::size_t len = std::min(chunk, recs.size() - start);
    std::span<const PatientRecord* const> part(recs.data() + start, len);
    ad::Tape tape;
    const auto bound = emb.transform([&](const Matrix& x) { return tape.constant(x); });
    const auto nodes = ad::embed_batch(bound, make_sequence_batch(part));
    for (std::size_t n = 0; n < len; ++n) {
      Matrix z(f, d);
      for (std::size_t i = 0; i < f; ++i) {
        const auto row = nodes[i].value().row(n);
        std::copy(row.begin(), row.end(), z.row(i).begin());
      }
      out.push_back(std::move(z));
    }
  }
  return out;
}

}  // namespace medfact
