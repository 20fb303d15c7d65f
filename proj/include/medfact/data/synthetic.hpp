#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "medfact/data/cohort.hpp"
#include "medfact/errors.hpp"
#include "medfact/numerics/rng.hpp"
#include "medfact/partition.hpp"

namespace medfact {

/// Parameters of a planted-structure cohort.
struct SyntheticSpec {
  std::size_t features = 12;
  std::size_t static_features = 2;
  std::size_t groups = 3;
  std::size_t patients = 2000;
  std::size_t t_min = 12;
  std::size_t t_max = 20;
  double noise_std = 0.3;
  std::uint64_t seed = 7;

  // Latent dynamics and label model.
  double autocorrelation = 0.8;
  double target_positive_rate = 0.35;

  void validate() const {
    if (patients == 0) throw ValidationError("synthetic: patients must be positive");
    if (features == 0) throw ValidationError("synthetic: features must be positive");
    if (groups == 0 || groups > features)
      throw ValidationError("synthetic: groups must be in [1, features], got " + std::to_string(groups));
    if (t_min == 0 || t_max < t_min) throw ValidationError("synthetic: need 1 <= t_min <= t_max");
    if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) throw ValidationError("synthetic: noise_std must be >= 0");
    if (!(target_positive_rate > 0.0 && target_positive_rate < 1.0))
      throw ValidationError("synthetic: target_positive_rate must be in (0, 1)");
  }
};

struct SyntheticCohort {
  Cohort cohort;
  ClusterAssignment planted;
};

/// Contiguous near-even blocks: the first F mod K groups get one extra feature.
inline ClusterAssignment planted_blocks(std::size_t features, std::size_t groups) {
  std::vector<std::vector<std::size_t>> out(groups);
  const std::size_t base = features / groups, extra = features % groups;
  std::size_t next = 0;
  for (std::size_t g = 0; g < groups; ++g)
    for (std::size_t k = 0; k < base + (g < extra ? 1 : 0); ++k) out[g].push_back(next++);
  return ClusterAssignment(std::move(out));
}

inline std::string indexed_name(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%02zu", prefix, i);
  return buf;
}

/// Generates a cohort whose dynamic features are noisy rescaled copies of one
/// AR(1) latent series per planted group. Labels are Bernoulli draws from
/// sigmoid(w . [per-group temporal means of the latents] + b), with w drawn
/// once per cohort and b set by bisection so the expected positive rate
/// equals target_positive_rate.
inline SyntheticCohort generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const std::size_t f = spec.features, k = spec.groups, n = spec.patients;
  ClusterAssignment planted = planted_blocks(f, k);
  const auto group_of = planted.labels();

  // Cohort-level draws come from their own stream so per-patient streams
  // (indices 0..N-1) are unaffected by changes to F or K.
  SeededRng cohort_rng = SeededRng::derive(spec.seed, ~std::uint64_t{0});
  std::vector<double> scale(f);
  for (auto& s : scale) s = cohort_rng.uniform(0.5, 1.5);
  std::vector<double> weight(k);
  for (auto& w : weight) w = (cohort_rng.bernoulli(0.5) ? 1.0 : -1.0) * cohort_rng.uniform(1.5, 2.5);

  const double rho = spec.autocorrelation;
  const double stationary_std = 1.0 / std::sqrt(1.0 - rho * rho);

  Cohort cohort;
  for (std::size_t i = 0; i < f; ++i) cohort.dynamic_names.push_back(indexed_name("f", i));
  for (std::size_t i = 0; i < spec.static_features; ++i) cohort.static_names.push_back(indexed_name("s", i));
  cohort.records.resize(n);

  std::vector<double> score(n);
  std::vector<double> label_draw(n);
  for (std::size_t p = 0; p < n; ++p) {
    SeededRng rng = SeededRng::derive(spec.seed, p);
    const std::size_t t = spec.t_min + rng.below(spec.t_max - spec.t_min + 1);
    Matrix latent(t, k);
    std::vector<double> means(k, 0.0);
    for (std::size_t g = 0; g < k; ++g) {
      double l = rng.normal() * stationary_std;
      for (std::size_t s = 0; s < t; ++s) {
        if (s > 0) l = rho * l + rng.normal();
        latent(s, g) = l;
        means[g] += l;
      }
      means[g] /= static_cast<double>(t);
    }
    PatientRecord& rec = cohort.records[p];
    rec.id = indexed_name("p", p);
    rec.dynamic = Matrix(t, f);
    for (std::size_t s = 0; s < t; ++s)
      for (std::size_t i = 0; i < f; ++i)
        rec.dynamic(s, i) = scale[i] * latent(s, group_of[i]) + spec.noise_std * rng.normal();
    rec.static_values.resize(spec.static_features);
    for (auto& v : rec.static_values) v = rng.normal();
    double sc = 0.0;
    for (std::size_t g = 0; g < k; ++g) sc += weight[g] * means[g];
    score[p] = sc;
    label_draw[p] = rng.uniform();
  }

  auto expected_rate = [&](double bias) {
    double acc = 0.0;
    for (double s : score) acc += 1.0 / (1.0 + std::exp(-(s + bias)));
    return acc / static_cast<double>(n);
  };
  double lo = -50.0, hi = 50.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (expected_rate(mid) < spec.target_positive_rate ? lo : hi) = mid;
  }
  const double bias = 0.5 * (lo + hi);
  for (std::size_t p = 0; p < n; ++p) {
    const double prob = 1.0 / (1.0 + std::exp(-(score[p] + bias)));
    cohort.records[p].label = label_draw[p] < prob ? 1 : 0;
  }
  return {std::move(cohort), std::move(planted)};
}

}  // namespace medfact
