#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "medfact/errors.hpp"
#include "medfact/numerics/rng.hpp"

namespace medfact {

enum class SplitMode { holdout, kfold };

/// Disjoint, exhaustive index sets. For holdout the parts are
/// {train, validation, test}; for k-fold they are the k folds.
struct SplitDescriptor {
  SplitMode mode = SplitMode::holdout;
  std::uint64_t seed = 0;
  std::vector<std::vector<std::size_t>> parts;

  const std::vector<std::size_t>& train() const { return parts.at(0); }
  const std::vector<std::size_t>& validation() const { return parts.at(1); }
  const std::vector<std::size_t>& test() const { return parts.at(2); }
};

namespace detail {

/// Positives (shuffled) followed by negatives (shuffled). Dealing this list
/// cyclically into parts spreads each class evenly across them.
inline std::vector<std::size_t> stratified_order(const std::vector<std::size_t>& indices,
                                                 const std::vector<int>& labels, std::uint64_t seed) {
  std::vector<std::size_t> pos, neg;
  for (auto i : indices) (labels.at(i) == 1 ? pos : neg).push_back(i);
  SeededRng rng(seed);
  rng.shuffle(std::span<std::size_t>(pos));
  rng.shuffle(std::span<std::size_t>(neg));
  pos.insert(pos.end(), neg.begin(), neg.end());
  return pos;
}

}  // namespace detail

/// Stratified 8:1:1 train/validation/test split: in the stratified order,
/// position i goes to validation when i mod 10 == 8, to test when
/// i mod 10 == 9, and to train otherwise.
inline SplitDescriptor holdout_split(const std::vector<int>& labels, std::uint64_t seed) {
  std::vector<std::size_t> all(labels.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const auto order = detail::stratified_order(all, labels, seed);
  SplitDescriptor s{SplitMode::holdout, seed, std::vector<std::vector<std::size_t>>(3)};
  for (std::size_t i = 0; i < order.size(); ++i) {
    const std::size_t slot = i % 10;
    s.parts[slot == 8 ? 1 : (slot == 9 ? 2 : 0)].push_back(order[i]);
  }
  return s;
}

/// Stratified k folds: position i of the stratified order goes to fold
/// i mod k, so the N mod k leading folds hold one extra record.
inline SplitDescriptor kfold_split(const std::vector<int>& labels, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw SplitError("kfold: k must be at least 2, got " + std::to_string(k));
  if (labels.size() < k)
    throw SplitError("kfold: cohort of " + std::to_string(labels.size()) + " records is smaller than k=" +
                     std::to_string(k));
  std::vector<std::size_t> all(labels.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const auto order = detail::stratified_order(all, labels, seed);
  SplitDescriptor s{SplitMode::kfold, seed, std::vector<std::vector<std::size_t>>(k)};
  for (std::size_t i = 0; i < order.size(); ++i) s.parts[i % k].push_back(order[i]);
  return s;
}

/// Carves a stratified validation subset (every 9th record in stratified
/// order, i.e. 1/9) out of `indices`; returns {train, validation}.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> inner_validation_split(
    const std::vector<std::size_t>& indices, const std::vector<int>& labels, std::uint64_t seed) {
  const auto order = detail::stratified_order(indices, labels, seed);
  std::pair<std::vector<std::size_t>, std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < order.size(); ++i) (i % 9 == 8 ? out.second : out.first).push_back(order[i]);
  return out;
}

inline std::string to_string(SplitMode m) { return m == SplitMode::holdout ? "holdout" : "kfold"; }

}  // namespace medfact
