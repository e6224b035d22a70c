#pragma once

#include <array>
#include <string>
#include <vector>

#include "lipbench/common/json_util.hpp"
#include "lipbench/core/tensor.hpp"

namespace lipbench::analysis {

inline constexpr int kDifficultyGroups = 5;
inline const std::array<std::string, kDifficultyGroups> kDifficultyGroupNames{
    "very_easy", "easy", "medium", "difficult", "very_difficult"};

/// Classes ordered by descending baseline accuracy (ties: ascending class id),
/// cut into consecutive groups whose sizes differ by at most one; the larger
/// groups come first.
struct DifficultyGroups {
  std::string baseline;  // identifies the run whose accuracies defined the groups
  std::vector<std::vector<int>> groups;
};

DifficultyGroups build_difficulty_groups(const std::vector<double>& per_class_accuracy,
                                         int n_groups = kDifficultyGroups, std::string baseline = "");

struct GroupAccuracy {
  std::vector<double> accuracy;  // correct / count per group; 0 for a group without samples
  std::vector<Index> correct;
  std::vector<Index> count;

  /// Sample-weighted mean over groups, computed from the integer counts.
  double pooled() const;
};

/// Per-group accuracy from a confusion matrix [label][prediction].
/// Throws InputError when the groups do not partition the matrix's classes.
GroupAccuracy group_accuracy(const std::vector<std::vector<Index>>& confusion, const DifficultyGroups& groups);

Json to_json(const DifficultyGroups& g);
Json to_json(const GroupAccuracy& g);

}  // namespace lipbench::analysis
