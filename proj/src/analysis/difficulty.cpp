#include "lipbench/analysis/difficulty.hpp"

#include <algorithm>
#include <numeric>

namespace lipbench::analysis {

DifficultyGroups build_difficulty_groups(const std::vector<double>& per_class_accuracy, int n_groups,
                                         std::string baseline) {
  const int k = static_cast<int>(per_class_accuracy.size());
  if (n_groups < 1) throw ConfigError("difficulty groups: need at least one group");
  if (k < n_groups) {
    throw ConfigError("difficulty groups: " + std::to_string(k) + " classes cannot fill " + std::to_string(n_groups) +
                      " groups");
  }
  std::vector<int> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return per_class_accuracy[static_cast<std::size_t>(a)] > per_class_accuracy[static_cast<std::size_t>(b)];
  });
  DifficultyGroups out;
  out.baseline = std::move(baseline);
  std::size_t at = 0;
  for (int g = 0; g < n_groups; ++g) {
    const int size = k / n_groups + (g < k % n_groups ? 1 : 0);
    out.groups.emplace_back(order.begin() + static_cast<long>(at), order.begin() + static_cast<long>(at) + size);
    at += static_cast<std::size_t>(size);
  }
  return out;
}

double GroupAccuracy::pooled() const {
  const Index c = std::accumulate(correct.begin(), correct.end(), Index{0});
  const Index n = std::accumulate(count.begin(), count.end(), Index{0});
  return n == 0 ? 0.0 : static_cast<double>(c) / static_cast<double>(n);
}

GroupAccuracy group_accuracy(const std::vector<std::vector<Index>>& confusion, const DifficultyGroups& groups) {
  const std::size_t k = confusion.size();
  std::vector<int> seen(k, 0);
  for (const auto& g : groups.groups)
    for (int c : g) {
      if (c < 0 || static_cast<std::size_t>(c) >= k) throw InputError("group_accuracy: class " + std::to_string(c) + " out of range");
      ++seen[static_cast<std::size_t>(c)];
    }
  if (std::any_of(seen.begin(), seen.end(), [](int s) { return s != 1; })) {
    throw InputError("group_accuracy: groups do not partition the " + std::to_string(k) + " classes");
  }
  GroupAccuracy out;
  for (const auto& g : groups.groups) {
    Index correct = 0, count = 0;
    for (int c : g) {
      const auto& row = confusion[static_cast<std::size_t>(c)];
      correct += row[static_cast<std::size_t>(c)];
      count += std::accumulate(row.begin(), row.end(), Index{0});
    }
    out.correct.push_back(correct);
    out.count.push_back(count);
    out.accuracy.push_back(count == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(count));
  }
  return out;
}

Json to_json(const DifficultyGroups& g) {
  Json groups = Json::array();
  for (std::size_t i = 0; i < g.groups.size(); ++i) {
    const std::string name = g.groups.size() == kDifficultyGroupNames.size() ? kDifficultyGroupNames[i]
                                                                             : "group_" + std::to_string(i);
    groups.push_back({{"name", name}, {"classes", g.groups[i]}});
  }
  return {{"baseline", g.baseline}, {"groups", std::move(groups)}};
}

Json to_json(const GroupAccuracy& g) {
  return {{"accuracy", g.accuracy}, {"correct", g.correct}, {"count", g.count}, {"pooled", g.pooled()}};
}

}  // namespace lipbench::analysis
