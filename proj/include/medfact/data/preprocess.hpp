#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "medfact/data/cohort.hpp"
#include "medfact/errors.hpp"

namespace medfact {

inline constexpr double kStdFloor = 1e-6;

/// Mean and (population) standard deviation of the observed values of every
/// feature over the training records. The std is floored at 1e-6.
inline NormalizationStats compute_normalization(const Cohort& cohort, const std::vector<std::size_t>& train) {
  if (train.empty()) throw PreprocessError("preprocess: training index set is empty");
  const std::size_t f = cohort.dynamic_count(), s = cohort.static_count();
  NormalizationStats st;

  auto finish = [](double mean, double sq, double count, const std::string& name, double& out_mean, double& out_sd) {
    if (count == 0.0) throw PreprocessError("preprocess: feature '" + name + "' is entirely missing in the training split");
    out_mean = mean;
    out_sd = std::sqrt(sq / count);
    if (!(out_sd >= kStdFloor)) out_sd = kStdFloor;
  };

  st.dynamic_mean.resize(f);
  st.dynamic_std.resize(f);
  for (std::size_t j = 0; j < f; ++j) {
    double sum = 0.0, count = 0.0, lo = HUGE_VAL, hi = -HUGE_VAL;
    for (auto i : train) {
      const Matrix& x = cohort.records.at(i).dynamic;
      for (std::size_t t = 0; t < x.rows(); ++t) {
        const double v = x(t, j);
        if (std::isnan(v)) continue;
        sum += v, count += 1.0;
        lo = std::min(lo, v), hi = std::max(hi, v);
      }
    }
    // A constant feature keeps its exact value as mean so it z-scores to 0.
    const double mean = count == 0.0 ? 0.0 : (lo == hi ? lo : sum / count);
    double sq = 0.0;
    for (auto i : train) {
      const Matrix& x = cohort.records.at(i).dynamic;
      for (std::size_t t = 0; t < x.rows(); ++t)
        if (!std::isnan(x(t, j))) sq += (x(t, j) - mean) * (x(t, j) - mean);
    }
    finish(mean, sq, count, cohort.dynamic_names[j], st.dynamic_mean[j], st.dynamic_std[j]);
  }

  st.static_mean.resize(s);
  st.static_std.resize(s);
  for (std::size_t j = 0; j < s; ++j) {
    double sum = 0.0, count = 0.0, lo = HUGE_VAL, hi = -HUGE_VAL;
    for (auto i : train) {
      const double v = cohort.records.at(i).static_values.at(j);
      if (std::isnan(v)) continue;
      sum += v, count += 1.0;
      lo = std::min(lo, v), hi = std::max(hi, v);
    }
    const double mean = count == 0.0 ? 0.0 : (lo == hi ? lo : sum / count);
    double sq = 0.0;
    for (auto i : train) {
      const double v = cohort.records.at(i).static_values.at(j);
      if (!std::isnan(v)) sq += (v - mean) * (v - mean);
    }
    finish(mean, sq, count, cohort.static_names[j], st.static_mean[j], st.static_std[j]);
  }
  return st;
}

/// Forward-fills each dynamic series within the patient, fills what remains
/// (leading gaps) with the training mean, and fills missing static values
/// with the training mean. No normalisation.
inline void impute_record(PatientRecord& rec, const NormalizationStats& st) {
  Matrix& x = rec.dynamic;
  for (std::size_t j = 0; j < x.cols(); ++j) {
    double last = std::nan("");
    for (std::size_t t = 0; t < x.rows(); ++t) {
      if (std::isnan(x(t, j)))
        x(t, j) = std::isnan(last) ? st.dynamic_mean[j] : last;
      else
        last = x(t, j);
    }
  }
  for (std::size_t j = 0; j < rec.static_values.size(); ++j)
    if (std::isnan(rec.static_values[j])) rec.static_values[j] = st.static_mean[j];
}

/// Imputes and z-scores every record with previously computed statistics.
inline Cohort apply_normalization(const Cohort& cohort, const NormalizationStats& st) {
  if (st.dynamic_mean.size() != cohort.dynamic_count() || st.static_mean.size() != cohort.static_count()) {
    throw ContractError("preprocess: statistics cover " + std::to_string(st.dynamic_mean.size()) + "+" +
                        std::to_string(st.static_mean.size()) + " features, cohort has " +
                        std::to_string(cohort.dynamic_count()) + "+" + std::to_string(cohort.static_count()));
  }
  Cohort out = cohort;
  out.normalization = st;
  for (auto& rec : out.records) {
    impute_record(rec, st);
    Matrix& x = rec.dynamic;
    for (std::size_t t = 0; t < x.rows(); ++t)
      for (std::size_t j = 0; j < x.cols(); ++j) x(t, j) = (x(t, j) - st.dynamic_mean[j]) / st.dynamic_std[j];
    for (std::size_t j = 0; j < rec.static_values.size(); ++j)
      rec.static_values[j] = (rec.static_values[j] - st.static_mean[j]) / st.static_std[j];
  }
  return out;
}

/// Statistics from `train`, applied to the whole cohort.
inline Cohort preprocess(const Cohort& cohort, const std::vector<std::size_t>& train) {
  return apply_normalization(cohort, compute_normalization(cohort, train));
}

}  // namespace medfact
