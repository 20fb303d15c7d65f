#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "medfact/errors.hpp"

namespace medfact {

/// Partition of the dynamic feature indices {0..F-1} into K disjoint,
/// non-empty groups. Groups are kept canonical: members ascending, groups
/// ordered by their smallest member.
class ClusterAssignment {
 public:
  ClusterAssignment() = default;

  explicit ClusterAssignment(std::vector<std::vector<std::size_t>> groups) : groups_(std::move(groups)) {
    canonicalize();
  }

  /// Builds from per-feature labels in [0, K); empty labels are dropped.
  static ClusterAssignment from_labels(const std::vector<std::size_t>& labels) {
    std::size_t k = 0;
    for (auto l : labels) k = std::max(k, l + 1);
    std::vector<std::vector<std::size_t>> groups(k);
    for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].push_back(i);
    std::erase_if(groups, [](const auto& g) { return g.empty(); });
    return ClusterAssignment(std::move(groups));
  }

  /// Single group holding every feature.
  static ClusterAssignment whole(std::size_t features) {
    std::vector<std::size_t> all(features);
    for (std::size_t i = 0; i < features; ++i) all[i] = i;
    return ClusterAssignment({all});
  }

  std::size_t k() const { return groups_.size(); }
  const std::vector<std::vector<std::size_t>>& groups() const { return groups_; }

  std::size_t feature_count() const {
    std::size_t n = 0;
    for (const auto& g : groups_) n += g.size();
    return n;
  }

  /// Group index of every feature (groups numbered in canonical order).
  std::vector<std::size_t> labels() const {
    std::vector<std::size_t> out(feature_count());
    for (std::size_t g = 0; g < groups_.size(); ++g)
      for (auto i : groups_[g]) out.at(i) = g;
    return out;
  }

  bool same_group(std::size_t i, std::size_t j) const {
    for (const auto& g : groups_) {
      const bool hi = std::binary_search(g.begin(), g.end(), i);
      if (hi) return std::binary_search(g.begin(), g.end(), j);
    }
    return false;
  }

  /// Throws unless the groups exactly partition {0..features-1}.
  void validate(std::size_t features) const {
    std::vector<int> seen(features, 0);
    for (const auto& g : groups_) {
      if (g.empty()) throw ContractError("cluster assignment has an empty group");
      for (auto i : g) {
        if (i >= features)
          throw ContractError("cluster assignment names feature " + std::to_string(i) + " but F=" +
                              std::to_string(features));
        if (seen[i]++) throw ContractError("feature " + std::to_string(i) + " appears in two groups");
      }
    }
    for (std::size_t i = 0; i < features; ++i)
      if (!seen[i]) throw ContractError("feature " + std::to_string(i) + " is not assigned to any group");
  }

  friend bool operator==(const ClusterAssignment&, const ClusterAssignment&) = default;

 private:
  void canonicalize() {
    for (auto& g : groups_) std::sort(g.begin(), g.end());
    std::sort(groups_.begin(), groups_.end(), [](const auto& a, const auto& b) {
      if (a.empty() || b.empty()) return b.empty() && !a.empty();
      return a.front() < b.front();
    });
  }

  std::vector<std::vector<std::size_t>> groups_;
};

/// Adjusted Rand index between two labelings of the same items.
/// Returns 1 when both partitions are identical (including the degenerate
/// single-cluster case where the usual formula is 0/0).
inline double adjusted_rand_index(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  if (a.size() != b.size()) throw ContractError("adjusted_rand_index: labelings differ in length");
  const std::size_t n = a.size();
  if (n < 2) return 1.0;
  std::size_t ka = 0, kb = 0;
  for (auto x : a) ka = std::max(ka, x + 1);
  for (auto x : b) kb = std::max(kb, x + 1);
  std::vector<double> table(ka * kb, 0.0), ra(ka, 0.0), rb(kb, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    table[a[i] * kb + b[i]] += 1.0;
    ra[a[i]] += 1.0;
    rb[b[i]] += 1.0;
  }
  auto c2 = [](double x) { return x * (x - 1.0) / 2.0; };
  double index = 0.0, sa = 0.0, sb = 0.0;
  for (double v : table) index += c2(v);
  for (double v : ra) sa += c2(v);
  for (double v : rb) sb += c2(v);
  const double expected = sa * sb / c2(static_cast<double>(n));
  const double max_index = 0.5 * (sa + sb);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

inline double adjusted_rand_index(const ClusterAssignment& a, const ClusterAssignment& b) {
  return adjusted_rand_index(a.labels(), b.labels());
}

}  // namespace medfact
