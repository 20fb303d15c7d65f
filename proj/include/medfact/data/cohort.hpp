#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "medfact/numerics/matrix.hpp"

namespace medfact {

/// One patient: T x F dynamic matrix (rows are visits in time order), the
/// static vector, and the patient-level binary label.
struct PatientRecord {
  std::string id;
  Matrix dynamic;
  std::vector<double> static_values;
  int label = 0;

  std::size_t visit_count() const { return dynamic.rows(); }
};

/// Per-feature statistics computed on a training split.
struct NormalizationStats {
  std::vector<double> dynamic_mean, dynamic_std;
  std::vector<double> static_mean, static_std;
};

struct Cohort {
  std::vector<PatientRecord> records;
  std::vector<std::string> dynamic_names;
  std::vector<std::string> static_names;
  std::optional<NormalizationStats> normalization;
  /// Patients removed at load time for having fewer than T_min visits.
  std::size_t dropped_short = 0;

  std::size_t size() const { return records.size(); }
  std::size_t dynamic_count() const { return dynamic_names.size(); }
  std::size_t static_count() const { return static_names.size(); }

  double positive_fraction() const {
    if (records.empty()) return 0.0;
    std::size_t pos = 0;
    for (const auto& r : records) pos += r.label == 1;
    return static_cast<double>(pos) / static_cast<double>(records.size());
  }

  /// Copy containing only the given records (in the given order).
  Cohort subset(const std::vector<std::size_t>& indices) const {
    Cohort out;
    out.dynamic_names = dynamic_names;
    out.static_names = static_names;
    out.normalization = normalization;
    out.records.reserve(indices.size());
    for (auto i : indices) out.records.push_back(records.at(i));
    return out;
  }

  std::vector<int> labels() const {
    std::vector<int> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(r.label);
    return out;
  }
};

/// Summary mirroring a dataset statistics table.
struct CohortSummary {
  std::size_t patients = 0;
  std::size_t visits = 0;
  double avg_visits = 0.0;
  std::size_t max_visits = 0;
  std::size_t min_visits = 0;
  std::size_t dynamic_features = 0;
  std::size_t static_features = 0;
  double positive_fraction = 0.0;
};

inline CohortSummary summarize(const Cohort& c) {
  CohortSummary s;
  s.patients = c.size();
  s.dynamic_features = c.dynamic_count();
  s.static_features = c.static_count();
  s.positive_fraction = c.positive_fraction();
  if (c.records.empty()) return s;
  s.min_visits = c.records.front().visit_count();
  for (const auto& r : c.records) {
    s.visits += r.visit_count();
    s.max_visits = std::max(s.max_visits, r.visit_count());
    s.min_visits = std::min(s.min_visits, r.visit_count());
  }
  s.avg_visits = static_cast<double>(s.visits) / static_cast<double>(s.patients);
  return s;
}

}  // namespace medfact
