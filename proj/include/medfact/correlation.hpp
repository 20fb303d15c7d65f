#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "medfact/errors.hpp"
#include "medfact/numerics/eigen.hpp"
#include "medfact/numerics/matrix.hpp"
#include "medfact/numerics/rng.hpp"
#include "medfact/partition.hpp"

namespace medfact {

/// Kernel bandwidth: a fixed sigma, or (when unset) the median of the
/// pairwise L1 distances in the sample. `sample_cap` bounds how many
/// training patients feed one estimate.
struct KernelConfig {
  std::optional<double> sigma;
  std::size_t sample_cap = 2048;
};

/// F x F cohort-wise correlations; symmetric with unit diagonal.
struct CorrelationMatrix {
  Matrix r;
  double sigma = 0.0;  // resolved bandwidth used for the estimate

  std::size_t features() const { return r.rows(); }
  static CorrelationMatrix ones(std::size_t features) { return {Matrix(features, features, 1.0), 0.0}; }
};

/// (F+1) x (F+1) adjacency; node F is the static feature.
struct CorrelationGraph {
  Matrix adjacency;

  std::size_t static_index() const { return adjacency.rows() - 1; }
  friend bool operator==(const CorrelationGraph&, const CorrelationGraph&) = default;
};

enum class Ablation { full, cor_minus, clu_minus };

inline std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::full:
      return "full";
    case Ablation::cor_minus:
      return "cor-";
    case Ablation::clu_minus:
      return "clu-";
  }
  return "full";
}

inline Ablation parse_ablation(const std::string& s) {
  if (s == "full") return Ablation::full;
  if (s == "cor-" || s == "cor_minus") return Ablation::cor_minus;
  if (s == "clu-" || s == "clu_minus") return Ablation::clu_minus;
  throw ValidationError("unknown ablation mode '" + s + "' (expected full, cor-, clu-)");
}

inline double l1_distance(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) s += std::abs(x[k] - y[k]);
  return s;
}

/// k(x, y) = exp(-||x - y||_1 / sigma).
inline double laplacian_kernel(std::span<const double> x, std::span<const double> y, double sigma) {
  if (!(sigma > 0.0)) throw ContractError("laplacian_kernel: sigma must be positive");
  if (x.size() != y.size()) throw ContractError("laplacian_kernel: vectors differ in length");
  return std::exp(-l1_distance(x, y) / sigma);
}

/// Median of ||z_i - z_j||_1 over all unordered feature pairs and patients.
/// Falls back to the mean of the positive distances, then to 1, so the
/// result is always positive.
inline double median_l1_bandwidth(std::span<const Matrix> embeddings) {
  std::vector<double> d;
  for (const Matrix& z : embeddings)
    for (std::size_t i = 0; i < z.rows(); ++i)
      for (std::size_t j = i + 1; j < z.rows(); ++j) d.push_back(l1_distance(z.row(i), z.row(j)));
  if (d.empty()) return 1.0;
  const std::size_t mid = d.size() / 2;
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid), d.end());
  double med = d[mid];
  if (d.size() % 2 == 0) med = 0.5 * (med + *std::max_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid)));
  if (med > 0.0) return med;
  double sum = 0.0;
  std::size_t pos = 0;
  for (double v : d)
    if (v > 0.0) sum += v, ++pos;
  return pos ? sum / static_cast<double>(pos) : 1.0;
}

/// r_ij = (1/N) sum_n k(z_i^(n), z_j^(n)) over the per-patient F x d
/// dynamic-feature embeddings. Each unordered pair is computed once, so the
/// result is exactly symmetric; the diagonal is exactly 1.
inline CorrelationMatrix estimate_correlations(std::span<const Matrix> embeddings, const KernelConfig& config = {}) {
  if (embeddings.empty()) throw ContractError("estimate_correlations: empty sample");
  const std::size_t f = embeddings[0].rows();
  for (const Matrix& z : embeddings)
    if (!z.same_shape(embeddings[0])) throw ContractError("estimate_correlations: embeddings differ in shape");
  const double sigma = config.sigma ? *config.sigma : median_l1_bandwidth(embeddings);
  if (!(sigma > 0.0)) throw ContractError("estimate_correlations: sigma must be positive");

  CorrelationMatrix out{Matrix::identity(f), sigma};
  const double inv_n = 1.0 / static_cast<double>(embeddings.size());
  for (std::size_t i = 0; i < f; ++i) {
    for (std::size_t j = i + 1; j < f; ++j) {
      double acc = 0.0;
      for (const Matrix& z : embeddings) acc += std::exp(-l1_distance(z.row(i), z.row(j)) / sigma);
      out.r(i, j) = out.r(j, i) = acc * inv_n;
    }
  }
  return out;
}

/// Indices of the patients used for one estimate: all of [0, n) when
/// n <= cap, else a seeded subsample of size cap (ascending).
inline std::vector<std::size_t> correlation_sample(std::size_t n, std::size_t cap, SeededRng& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  if (cap == 0 || n <= cap) return idx;
  rng.shuffle(std::span<std::size_t>(idx));
  idx.resize(cap);
  std::sort(idx.begin(), idx.end());
  return idx;
}

// ---------------------------------------------------------------------------
// Spectral clustering.

struct KMeansResult {
  std::vector<std::size_t> labels;
  double inertia = 0.0;
};

namespace detail {

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return s;
}

/// Nearest centroid; ties go to the lowest index.
inline std::size_t nearest(std::span<const double> p, const Matrix& centroids, double* dist = nullptr) {
  std::size_t best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.rows(); ++c) {
    const double d = squared_distance(p, centroids.row(c));
    if (d < bd) bd = d, best = c;
  }
  if (dist) *dist = bd;
  return best;
}

inline Matrix kmeanspp_seed(const Matrix& points, std::size_t k, SeededRng& rng) {
  const std::size_t n = points.rows();
  Matrix centroids(k, points.cols());
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::size_t pick = rng.below(n);
  for (std::size_t c = 0; c < k; ++c) {
    std::copy(points.row(pick).begin(), points.row(pick).end(), centroids.row(c).begin());
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], squared_distance(points.row(i), centroids.row(c)));
      total += d2[i];
    }
    if (c + 1 == k) break;
    if (total <= 0.0) {
      pick = rng.below(n);
      continue;
    }
    double u = rng.uniform() * total;
    pick = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      if (d2[i] <= 0.0) continue;
      if (u < d2[i]) {
        pick = i;
        break;
      }
      u -= d2[i];
    }
    while (d2[pick] <= 0.0 && pick > 0) --pick;
  }
  return centroids;
}

inline void recompute_centroids(const Matrix& points, const std::vector<std::size_t>& labels, Matrix& centroids) {
  std::vector<double> counts(centroids.rows(), 0.0);
  centroids = Matrix(centroids.rows(), centroids.cols());
  for (std::size_t i = 0; i < points.rows(); ++i) {
    counts[labels[i]] += 1.0;
    for (std::size_t c = 0; c < points.cols(); ++c) centroids(labels[i], c) += points(i, c);
  }
  for (std::size_t g = 0; g < centroids.rows(); ++g)
    if (counts[g] > 0.0)
      for (double& v : centroids.row(g)) v /= counts[g];
}

/// Moves, for every empty cluster, the point farthest from its own centroid
/// (taken from a cluster with more than one member) into it.
inline void repair_empty(const Matrix& points, std::vector<std::size_t>& labels, Matrix& centroids) {
  const std::size_t k = centroids.rows();
  for (std::size_t g = 0; g < k; ++g) {
    std::vector<std::size_t> counts(k, 0);
    for (auto l : labels) ++counts[l];
    if (counts[g] > 0) continue;
    std::size_t far = points.rows();
    double fd = -1.0;
    for (std::size_t i = 0; i < points.rows(); ++i) {
      if (counts[labels[i]] < 2) continue;
      const double d = squared_distance(points.row(i), centroids.row(labels[i]));
      if (d > fd) fd = d, far = i;
    }
    if (far == points.rows()) continue;
    labels[far] = g;
    recompute_centroids(points, labels, centroids);
  }
}

}  // namespace detail

/// Lloyd's k-means with k-means++ seeding; best of `restarts` by inertia
/// (earliest restart wins ties).
inline KMeansResult kmeans(const Matrix& points, std::size_t k, SeededRng& rng, std::size_t restarts = 10,
                           std::size_t max_iter = 100) {
  const std::size_t n = points.rows();
  if (k == 0 || k > n) throw ContractError("kmeans: need 1 <= k <= points, got k=" + std::to_string(k));
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (std::size_t run = 0; run < restarts; ++run) {
    Matrix centroids = detail::kmeanspp_seed(points, k, rng);
    std::vector<std::size_t> labels(n, 0);
    for (std::size_t i = 0; i < n; ++i) labels[i] = detail::nearest(points.row(i), centroids);
    detail::recompute_centroids(points, labels, centroids);
    detail::repair_empty(points, labels, centroids);
    for (std::size_t it = 0; it < max_iter; ++it) {
      bool changed = false;
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t l = detail::nearest(points.row(i), centroids);
        if (l != labels[i]) labels[i] = l, changed = true;
      }
      detail::recompute_centroids(points, labels, centroids);
      detail::repair_empty(points, labels, centroids);
      if (!changed) break;
    }
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) inertia += detail::squared_distance(points.row(i), centroids.row(labels[i]));
    if (inertia < best.inertia) best = {labels, inertia};
  }
  return best;
}

/// Rows of the F x K normalized-cut spectral embedding, unit L2 norm (zero
/// rows stay zero).
inline Matrix spectral_embedding(const Matrix& r, std::size_t k) {
  const std::size_t f = r.rows();
  std::vector<double> inv_sqrt_deg(f);
  for (std::size_t i = 0; i < f; ++i) {
    double deg = 0.0;
    for (std::size_t j = 0; j < f; ++j) deg += r(i, j);
    inv_sqrt_deg[i] = deg > 0.0 ? 1.0 / std::sqrt(deg) : 0.0;
  }
  Matrix lap(f, f);
  for (std::size_t i = 0; i < f; ++i)
    for (std::size_t j = 0; j < f; ++j)
      lap(i, j) = (i == j ? 1.0 : 0.0) - inv_sqrt_deg[i] * r(i, j) * inv_sqrt_deg[j];
  Matrix u = symmetric_eigen(lap, k).vectors;
  for (std::size_t i = 0; i < f; ++i) {
    double norm = 0.0;
    for (double v : u.row(i)) norm += v * v;
    norm = std::sqrt(norm);
    if (norm > 0.0)
      for (double& v : u.row(i)) v /= norm;
  }
  return u;
}

/// Groups the F dynamic features into K clusters: normalized Laplacian
/// I - D^-1/2 R D^-1/2, eigenvectors of its K smallest eigenvalues,
/// row-normalised, then k-means (k-means++, 10 restarts, 100 iterations).
inline ClusterAssignment spectral_cluster(const CorrelationMatrix& corr, std::size_t k, std::uint64_t seed) {
  const std::size_t f = corr.features();
  if (k < 1 || k > f)
    throw ContractError("spectral_cluster: K=" + std::to_string(k) + " must be in [1, F=" + std::to_string(f) + "]");
  if (k == 1) return ClusterAssignment::whole(f);
  SeededRng rng(seed);
  return ClusterAssignment::from_labels(kmeans(spectral_embedding(corr.r, k), k, rng).labels);
}

/// Sum over groups of correlations between members and non-members; each
/// cross pair is counted from both sides.
inline double between_group_sum(const Matrix& r, const ClusterAssignment& a) {
  const auto labels = a.labels();
  double s = 0.0;
  for (std::size_t i = 0; i < r.rows(); ++i)
    for (std::size_t j = 0; j < r.cols(); ++j)
      if (labels[i] != labels[j]) s += r(i, j);
  return s;
}

// ---------------------------------------------------------------------------
// Graph construction.

/// Group-wise graph: intra-group dynamic edges weighted r_ij, unit edges
/// between every dynamic node and the static node, unit self-loops, zero
/// elsewhere.
inline CorrelationGraph build_graph(const CorrelationMatrix& corr, const ClusterAssignment& assignment) {
  const std::size_t f = corr.features();
  assignment.validate(f);
  Matrix a(f + 1, f + 1);
  for (const auto& group : assignment.groups())
    for (auto i : group)
      for (auto j : group) a(i, j) = i == j ? 1.0 : corr.r(i, j);
  for (std::size_t i = 0; i <= f; ++i) a(i, f) = a(f, i) = a(i, i) = 1.0;
  return {std::move(a)};
}

/// Fully connected, all weights 1 (no correlation differences).
inline CorrelationGraph fully_connected_graph(std::size_t features) {
  return {Matrix(features + 1, features + 1, 1.0)};
}

/// Fully connected with the dynamic block equal to R (no clustering).
inline CorrelationGraph correlation_weighted_graph(const CorrelationMatrix& corr) {
  const std::size_t f = corr.features();
  Matrix a(f + 1, f + 1, 1.0);
  for (std::size_t i = 0; i < f; ++i)
    for (std::size_t j = 0; j < f; ++j) a(i, j) = corr.r(i, j);
  return {std::move(a)};
}

/// Graph for the given ablation mode. `assignment` is ignored unless the
/// mode is full.
inline CorrelationGraph graph_for(Ablation mode, const CorrelationMatrix& corr, const ClusterAssignment& assignment) {
  switch (mode) {
    case Ablation::cor_minus:
      return fully_connected_graph(corr.features());
    case Ablation::clu_minus:
      return correlation_weighted_graph(corr);
    case Ablation::full:
      break;
  }
  return build_graph(corr, assignment);
}

}  // namespace medfact
