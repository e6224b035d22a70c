#pragma once

#include <string>
#include <vector>

#include "lipbench/analysis/ablation.hpp"
#include "lipbench/analysis/difficulty.hpp"

namespace lipbench::analysis {

inline constexpr int kBundleVersion = 1;

/// File names of an analysis bundle directory.
inline constexpr const char* kAblationTableFile = "ablation_table.json";
inline constexpr const char* kDistillTableFile = "distill_table.json";
inline constexpr const char* kDifficultyGroupsFile = "difficulty_groups.json";
inline constexpr const char* kGroupAccuracyFile = "group_accuracy.json";
inline constexpr const char* kSummaryFile = "summary.txt";

/// Contents of a bundle; a pure function of the reports and their order.
/// Wall-clock times are left out so that re-emission is byte-identical.
struct Bundle {
  Json ablation_table;
  Json distill_table;
  Json difficulty_groups;
  Json group_accuracy;
  std::string summary;
};

/// Plain training reports feed the ablation table; distill and ensemble reports
/// form the generation table. Difficulty groups come from the first completed
/// BGRU training report, or the first completed report when there is none.
/// Throws InputError on an empty list.
Bundle build_bundle(const std::vector<train::RunReport>& reports);

void write_bundle(const Bundle& bundle, const std::string& dir);
/// build_bundle + write_bundle.
void emit_report(const std::vector<train::RunReport>& reports, const std::string& dir);

/// Every run report under `dirs` (recursive), ordered by path.
std::vector<train::RunReport> collect_reports(const std::vector<std::string>& dirs);

}  // namespace lipbench::analysis
