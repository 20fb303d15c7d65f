#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "medfact/errors.hpp"
#include "medfact/numerics/rng.hpp"

namespace medfact {

/// Scores with their binary labels.
struct ScoredSet {
  std::vector<double> scores;
  std::vector<int> labels;

  std::size_t size() const { return scores.size(); }
  std::size_t positives() const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  }

  void validate() const {
    if (scores.size() != labels.size())
      throw ContractError("scored set: " + std::to_string(scores.size()) + " scores vs " +
                          std::to_string(labels.size()) + " labels");
    for (int y : labels)
      if (y != 0 && y != 1) throw ContractError("scored set: labels must be 0 or 1");
  }
};

namespace detail {

/// Indices ordered by descending score (stable, so ties keep input order).
inline std::vector<std::size_t> descending(const std::vector<double>& s) {
  std::vector<std::size_t> idx(s.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
  return idx;
}

/// Calls fn(tp, fp) after each block of tied scores, walking thresholds from
/// the highest score down.
template <typename Fn>
void sweep_thresholds(const ScoredSet& set, Fn&& fn) {
  const auto idx = descending(set.scores);
  double tp = 0.0, fp = 0.0;
  for (std::size_t k = 0; k < idx.size();) {
    const double s = set.scores[idx[k]];
    while (k < idx.size() && set.scores[idx[k]] == s) {
      (set.labels[idx[k]] == 1 ? tp : fp) += 1.0;
      ++k;
    }
    fn(tp, fp);
  }
}

}  // namespace detail

/// Mann-Whitney form: (concordant pairs + 0.5 tied pairs) / (P N).
inline double auroc(const ScoredSet& set) {
  set.validate();
  const double p = static_cast<double>(set.positives());
  const double n = static_cast<double>(set.size()) - p;
  if (p == 0.0 || n == 0.0) throw MetricUndefinedError("AUROC needs at least one positive and one negative");
  // Midranks in ascending score order.
  std::vector<std::size_t> idx(set.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return set.scores[a] < set.scores[b]; });
  double rank_sum = 0.0;
  for (std::size_t k = 0; k < idx.size();) {
    std::size_t end = k;
    while (end < idx.size() && set.scores[idx[end]] == set.scores[idx[k]]) ++end;
    const double mid = 0.5 * static_cast<double>(k + 1 + end);
    for (std::size_t m = k; m < end; ++m)
      if (set.labels[idx[m]] == 1) rank_sum += mid;
    k = end;
  }
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * n);
}

/// Average precision: sum over descending unique thresholds of
/// (recall_n - recall_{n-1}) * precision_n.
inline double auprc(const ScoredSet& set) {
  set.validate();
  const double p = static_cast<double>(set.positives());
  if (p == 0.0) throw MetricUndefinedError("AUPRC needs at least one positive");
  double ap = 0.0, prev_recall = 0.0;
  detail::sweep_thresholds(set, [&](double tp, double fp) {
    const double recall = tp / p;
    ap += (recall - prev_recall) * (tp / (tp + fp));
    prev_recall = recall;
  });
  return ap;
}

/// Best min(precision, sensitivity) over thresholds (predict positive when
/// score >= cut, each unique score used as a cut).
inline double min_p_se(const ScoredSet& set) {
  set.validate();
  const double p = static_cast<double>(set.positives());
  if (p == 0.0) throw MetricUndefinedError("Min(P+,Se) needs at least one positive");
  double best = 0.0;
  detail::sweep_thresholds(set, [&](double tp, double fp) { best = std::max(best, std::min(tp / (tp + fp), tp / p)); });
  return best;
}

using Metric = std::function<double(const ScoredSet&)>;

struct BootstrapResult {
  double point = 0.0;  // metric on the full set
  double std = 0.0;    // sample std over the kept resamples
  std::size_t resamples = 0;
  std::size_t skipped = 0;  // single-class resamples
};

/// Resamples the set with replacement `resamples` times; single-class
/// resamples are skipped and counted.
inline BootstrapResult bootstrap(const ScoredSet& set, const Metric& metric, std::size_t resamples = 1000,
                                 std::uint64_t seed = 0) {
  set.validate();
  BootstrapResult out;
  out.point = metric(set);
  SeededRng rng(seed);
  const std::size_t n = set.size();
  std::vector<double> values;
  values.reserve(resamples);
  ScoredSet sample{std::vector<double>(n), std::vector<int>(n)};
  for (std::size_t r = 0; r < resamples; ++r) {
    std::size_t pos = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t k = rng.below(n);
      sample.scores[i] = set.scores[k];
      sample.labels[i] = set.labels[k];
      pos += static_cast<std::size_t>(set.labels[k]);
    }
    if (pos == 0 || pos == n) {
      ++out.skipped;
      continue;
    }
    values.push_back(metric(sample));
  }
  out.resamples = values.size();
  if (values.size() > 1) {
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double sq = 0.0;
    for (double v : values) sq += (v - mean) * (v - mean);
    out.std = std::sqrt(sq / static_cast<double>(values.size() - 1));
  }
  return out;
}

struct MetricValue {
  std::string name;
  double value = 0.0;
  std::optional<double> std;
  std::size_t resamples = 0;
};

/// AUROC, AUPRC and Min(P+,Se), with bootstrap stds when requested.
struct MetricReport {
  std::vector<MetricValue> metrics;

  double value(const std::string& name) const {
    for (const auto& m : metrics)
      if (m.name == name) return m.value;
    throw ContractError("metric report has no '" + name + "'");
  }
  double auroc() const { return value("auroc"); }
  double auprc() const { return value("auprc"); }
  double min_p_se() const { return value("min_p_se"); }
};

inline MetricReport evaluate_scores(const ScoredSet& set, std::size_t bootstrap_resamples = 0, std::uint64_t seed = 0) {
  const std::pair<const char*, Metric> metrics[] = {{"auroc", auroc}, {"auprc", auprc}, {"min_p_se", min_p_se}};
  MetricReport report;
  for (const auto& [name, fn] : metrics) {
    MetricValue mv{name, 0.0, std::nullopt, 0};
    if (bootstrap_resamples > 0) {
      const auto b = bootstrap(set, fn, bootstrap_resamples, seed);
      mv.value = b.point;
      mv.std = b.std;
      mv.resamples = b.resamples;
    } else {
      mv.value = fn(set);
    }
    report.metrics.push_back(mv);
  }
  return report;
}

/// Mean and sample std across reports (e.g. cross-validation folds).
inline MetricReport aggregate(const std::vector<MetricReport>& reports) {
  if (reports.empty()) throw ContractError("aggregate: no reports");
  MetricReport out;
  for (const auto& m : reports.front().metrics) {
    std::vector<double> v;
    for (const auto& r : reports) v.push_back(r.value(m.name));
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double sq = 0.0;
    for (double x : v) sq += (x - mean) * (x - mean);
    const double sd = v.size() > 1 ? std::sqrt(sq / static_cast<double>(v.size() - 1)) : 0.0;
    out.metrics.push_back({m.name, mean, sd, v.size()});
  }
  return out;
}

// Report files ---------------------------------------------------------------

/// One line per metric: name, value, std ("-" if absent), resamples.
inline std::string to_text(const MetricReport& r) {
  std::ostringstream os;
  os << std::left << std::setw(10) << "metric" << std::setw(12) << "value" << std::setw(12) << "std"
     << "resamples\n";
  os << std::fixed << std::setprecision(6);
  for (const auto& m : r.metrics) {
    os << std::setw(10) << m.name << std::setw(12) << m.value;
    if (m.std)
      os << std::setw(12) << *m.std;
    else
      os << std::setw(12) << "-";
    os << m.resamples << '\n';
  }
  return os.str();
}

inline nlohmann::json to_json(const MetricReport& r) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& m : r.metrics) {
    nlohmann::json j{{"name", m.name}, {"value", m.value}, {"resamples", m.resamples}};
    j["std"] = m.std ? nlohmann::json(*m.std) : nlohmann::json(nullptr);
    arr.push_back(j);
  }
  return {{"metrics", arr}};
}

inline MetricReport report_from_json(const nlohmann::json& j) {
  MetricReport r;
  for (const auto& m : j.at("metrics")) {
    MetricValue mv{m.at("name").get<std::string>(), m.at("value").get<double>(), std::nullopt,
                   m.value("resamples", std::size_t{0})};
    if (!m.at("std").is_null()) mv.std = m.at("std").get<double>();
    r.metrics.push_back(mv);
  }
  return r;
}

}  // namespace medfact
