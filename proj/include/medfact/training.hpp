#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "medfact/correlation.hpp"
#include "medfact/data/cohort.hpp"
#include "medfact/data/preprocess.hpp"
#include "medfact/data/split.hpp"
#include "medfact/errors.hpp"
#include "medfact/evaluation.hpp"
#include "medfact/model.hpp"
#include "medfact/numerics/rng.hpp"

namespace medfact {

// Adam ----------------------------------------------------------------------

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias correction. Moment buffers are created on the first step
/// and matched to parameters by position.
class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : opt_(options) {}

  std::size_t steps() const { return step_; }
  const AdamOptions& options() const { return opt_; }

  void step(std::span<Matrix* const> params, std::span<const Matrix* const> grads) {
    if (params.size() != grads.size()) throw ContractError("adam: parameter and gradient counts differ");
    if (m_.empty()) {
      for (const Matrix* p : params) {
        m_.emplace_back(p->rows(), p->cols());
        v_.emplace_back(p->rows(), p->cols());
      }
    }
    if (m_.size() != params.size()) throw ContractError("adam: parameter count changed between steps");
    ++step_;
    const double c1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(step_));
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto p = params[k]->data();
      auto g = grads[k]->data();
      auto m = m_[k].data();
      auto v = v_[k].data();
      if (g.size() != p.size() || m.size() != p.size())
        throw ShapeError("adam: parameter " + std::to_string(k) + " is " + params[k]->shape() + ", gradient " +
                         grads[k]->shape());
      for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = opt_.beta1 * m[i] + (1.0 - opt_.beta1) * g[i];
        v[i] = opt_.beta2 * v[i] + (1.0 - opt_.beta2) * g[i] * g[i];
        const double mhat = m[i] / c1;
        const double vhat = v[i] / c2;
        p[i] -= opt_.learning_rate * mhat / (std::sqrt(vhat) + opt_.epsilon);
      }
    }
  }

  void step(ModelParams& params, const ModelParams& grads) {
    std::vector<Matrix*> ps;
    std::vector<const Matrix*> gs;
    params.for_each([&](const std::string&, Matrix& m) { ps.push_back(&m); });
    grads.for_each([&](const std::string&, const Matrix& m) { gs.push_back(&m); });
    step(ps, gs);
  }

 private:
  AdamOptions opt_;
  std::vector<Matrix> m_, v_;
  std::size_t step_ = 0;
};

// Configuration -----------------------------------------------------------------

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  std::optional<std::size_t> k;  // unset: round(sqrt(F))
  double cluster_epoch_fraction = 0.2;
  Ablation ablation = Ablation::full;
  std::uint64_t seed = 0;
  KernelConfig kernel;
  std::size_t patience = 10;  // 0 disables early stopping
  std::size_t hidden = 16;
  std::size_t embed = 16;
  std::size_t attention = 0;  // 0: same as embed
  bool normalize_adjacency = false;
  bool tied_channels = true;

  void validate() const {
    if (epochs == 0) throw ValidationError("epochs must be positive");
    if (batch_size == 0) throw ValidationError("batch size must be positive");
    if (!(learning_rate > 0.0)) throw ValidationError("learning rate must be positive");
    if (!(cluster_epoch_fraction >= 0.0 && cluster_epoch_fraction <= 1.0))
      throw ValidationError("cluster epoch fraction must be in [0, 1]");
    if (k && *k == 0) throw ValidationError("K must be at least 1");
    if (kernel.sigma && !(*kernel.sigma > 0.0)) throw ValidationError("kernel sigma must be positive");
    if (hidden == 0 || embed == 0) throw ValidationError("hidden and embedding sizes must be positive");
  }
};

/// round(sqrt(F)), at least 1.
inline std::size_t default_k(std::size_t features) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(features)))));
}

/// Number of leading epochs after which the graph is re-estimated:
/// ceil(fraction * epochs).
inline std::size_t cluster_epochs(const TrainConfig& c) {
  return static_cast<std::size_t>(std::ceil(c.cluster_epoch_fraction * static_cast<double>(c.epochs) - 1e-12));
}

/// A seeded random permutation of the features split into K near-equal
/// contiguous groups.
inline ClusterAssignment random_balanced_partition(std::size_t features, std::size_t k, std::uint64_t seed) {
  std::vector<std::size_t> perm(features);
  for (std::size_t i = 0; i < features; ++i) perm[i] = i;
  SeededRng rng(seed);
  rng.shuffle(std::span<std::size_t>(perm));
  std::vector<std::vector<std::size_t>> groups(k);
  const std::size_t base = features / k, extra = features % k;
  std::size_t next = 0;
  for (std::size_t g = 0; g < k; ++g)
    for (std::size_t m = 0; m < base + (g < extra ? 1 : 0); ++m) groups[g].push_back(perm[next++]);
  return ClusterAssignment(std::move(groups));
}

// Results ---------------------------------------------------------------------

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  std::optional<double> val_auroc, val_auprc, val_min_p_se;
  bool regraphed = false;
  double sigma = 0.0;
  ClusterAssignment assignment;
  CorrelationGraph graph;
};

struct TrainedModel {
  TrainConfig config;
  ModelDims dims;
  ModelParams params;
  CorrelationMatrix correlation;
  ClusterAssignment assignment;
  CorrelationGraph graph;
  std::vector<std::string> dynamic_names, static_names;
  std::optional<NormalizationStats> normalization;
  std::size_t best_epoch = 0;
  std::vector<EpochRecord> history;

  /// Adjacency the forward pass multiplies by.
  Matrix propagation() const {
    return config.normalize_adjacency ? symmetric_normalized(graph.adjacency) : graph.adjacency;
  }
};

inline std::size_t regraph_count(const std::vector<EpochRecord>& h) {
  std::size_t n = 0;
  for (const auto& e : h) n += e.regraphed;
  return n;
}

// Training ----------------------------------------------------------------------

/// Mini-batch training with correlation re-estimation and re-clustering at
/// the end of each of the first cluster_epochs(config) epochs, after which
/// the graph is frozen.
///
/// `cohort` must already be preprocessed. Only `train` patients feed the
/// correlation estimate; `validation` drives early stopping on AUPRC and the
/// returned model is the best-validation snapshot (the last epoch when
/// validation is empty).
inline TrainedModel train(const Cohort& cohort, const std::vector<std::size_t>& train_idx,
                          const std::vector<std::size_t>& val_idx, const TrainConfig& config) {
  config.validate();
  if (train_idx.empty()) throw ContractError("train: empty training split");
  const std::size_t f = cohort.dynamic_count();
  const std::size_t k = config.k.value_or(default_k(f));
  if (k > f) throw ValidationError("K=" + std::to_string(k) + " exceeds the number of dynamic features " + std::to_string(f));

  ModelDims dims{f, cohort.static_count(), config.hidden, config.embed,
                 config.attention ? config.attention : config.embed, config.tied_channels};
  TrainedModel model;
  model.config = config;
  model.config.k = k;
  model.dims = dims;
  model.dynamic_names = cohort.dynamic_names;
  model.static_names = cohort.static_names;
  model.normalization = cohort.normalization;
  model.params = init_model(dims, config.seed);
  model.correlation = CorrelationMatrix::ones(f);
  model.assignment = random_balanced_partition(f, k, SeededRng::derive(config.seed, 2).next_u64());
  model.graph = graph_for(config.ablation, model.correlation, model.assignment);

  Adam adam(AdamOptions{config.learning_rate});
  SeededRng shuffle_rng = SeededRng::derive(config.seed, 1);
  SeededRng sample_rng = SeededRng::derive(config.seed, 3);
  const std::size_t regraph_epochs = cluster_epochs(config);

  std::vector<std::size_t> order = train_idx;
  Matrix prop = model.propagation();
  std::optional<TrainedModel> best;
  double best_auprc = -1.0;
  std::size_t since_best = 0;
  std::vector<EpochRecord> history;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    for (std::size_t start = 0, batch_no = 0; start < order.size(); start += config.batch_size, ++batch_no) {
      const std::size_t len = std::min(config.batch_size, order.size() - start);
      const auto recs = record_pointers(cohort, {order.begin() + static_cast<std::ptrdiff_t>(start),
                                                 order.begin() + static_cast<std::ptrdiff_t>(start + len)});
      ad::Tape tape;
      const auto bound = bind_parameters(tape, model.params);
      const auto fwd = forward_batch(bound, make_sequence_batch(recs), prop);
      const ad::Var loss = batch_loss(fwd, recs);
      const double lv = loss.value()(0, 0);
      if (!std::isfinite(lv))
        throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch_no));
      ad::backward(loss);
      adam.step(model.params, gradients_of(bound));
      loss_sum += lv * static_cast<double>(len);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    if (epoch < regraph_epochs && config.ablation != Ablation::cor_minus) {
      const auto pick = correlation_sample(train_idx.size(), config.kernel.sample_cap, sample_rng);
      std::vector<std::size_t> sample;
      sample.reserve(pick.size());
      for (auto p : pick) sample.push_back(train_idx[p]);
      const auto emb = dynamic_embeddings(cohort, sample, model.params.embedding);
      model.correlation = estimate_correlations(emb, config.kernel);
      if (config.ablation == Ablation::full)
        model.assignment = spectral_cluster(model.correlation, k, SeededRng::derive(config.seed, 100 + epoch).next_u64());
      model.graph = graph_for(config.ablation, model.correlation, model.assignment);
      prop = model.propagation();
      rec.regraphed = true;
    }
    rec.sigma = model.correlation.sigma;
    rec.assignment = model.assignment;
    rec.graph = model.graph;

    bool improved = false;
    if (!val_idx.empty()) {
      ScoredSet vs{predict(cohort, val_idx, model.params, prop), {}};
      for (auto i : val_idx) vs.labels.push_back(cohort.records[i].label);
      auto guarded = [&](auto fn) -> std::optional<double> {
        try {
          return fn(vs);
        } catch (const MetricUndefinedError&) {
          return std::nullopt;
        }
      };
      rec.val_auroc = guarded(auroc);
      rec.val_auprc = guarded(auprc);
      rec.val_min_p_se = guarded(min_p_se);
      const double score = rec.val_auprc.value_or(0.0);
      improved = score > best_auprc;
      if (improved) best_auprc = score;
    }
    history.push_back(rec);

    if (val_idx.empty() || improved) {
      model.best_epoch = epoch;
      best = model;
      since_best = 0;
    } else if (config.patience > 0 && ++since_best >= config.patience) {
      break;
    }
  }

  TrainedModel out = std::move(*best);
  out.history = std::move(history);
  return out;
}

// Convenience drivers ------------------------------------------------------------

struct HoldoutRun {
  SplitDescriptor split;
  Cohort processed;
  TrainedModel model;
  ScoredSet test_scores;
  std::optional<MetricReport> test_report;
};

/// Stratified 8:1:1 split, preprocessing fitted on the training part,
/// training, and evaluation on the test part.
inline HoldoutRun fit_holdout(const Cohort& raw, const TrainConfig& config, std::uint64_t split_seed,
                              std::size_t bootstrap_resamples = 0) {
  HoldoutRun run;
  run.split = holdout_split(raw.labels(), split_seed);
  run.processed = preprocess(raw, run.split.train());
  run.model = train(run.processed, run.split.train(), run.split.validation(), config);
  run.test_scores.scores = predict(run.processed, run.split.test(), run.model.params, run.model.propagation());
  for (auto i : run.split.test()) run.test_scores.labels.push_back(run.processed.records[i].label);
  try {
    run.test_report = evaluate_scores(run.test_scores, bootstrap_resamples, split_seed);
  } catch (const MetricUndefinedError&) {
    run.test_report.reset();
  }
  return run;
}

struct KFoldResult {
  std::vector<std::vector<std::size_t>> test_folds;
  std::vector<MetricReport> folds;
  MetricReport summary;  // mean and std across folds
};

/// k-fold cross-validation: each fold is held out once; the remaining folds
/// are split 8:1 (stratified) into training and early-stopping validation,
/// with preprocessing fitted on that training part.
inline KFoldResult kfold_evaluate(const Cohort& raw, std::size_t k, const TrainConfig& config, std::uint64_t split_seed) {
  const auto labels = raw.labels();
  const auto split = kfold_split(labels, k, split_seed);
  KFoldResult out;
  for (std::size_t fold = 0; fold < k; ++fold) {
    std::vector<std::size_t> rest;
    for (std::size_t g = 0; g < k; ++g)
      if (g != fold) rest.insert(rest.end(), split.parts[g].begin(), split.parts[g].end());
    const auto [tr, va] = inner_validation_split(rest, labels, split_seed + fold + 1);
    const Cohort processed = preprocess(raw, tr);
    const TrainedModel m = train(processed, tr, va, config);
    ScoredSet s{predict(processed, split.parts[fold], m.params, m.propagation()), {}};
    for (auto i : split.parts[fold]) s.labels.push_back(labels[i]);
    out.test_folds.push_back(split.parts[fold]);
    out.folds.push_back(evaluate_scores(s));
  }
  out.summary = aggregate(out.folds);
  return out;
}

}  // namespace medfact
