#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lipbench/common/json_util.hpp"
#include "lipbench/core/tensor.hpp"

namespace lipbench::train {

/// Top-1 evaluation of a model or ensemble on one split.
struct EvalResult {
  double top1 = 0.0;
  std::vector<double> per_class_accuracy;  // NaN-free: classes without samples report 0
  std::vector<Index> per_class_count;
  std::vector<std::vector<Index>> confusion;  // [label][prediction]
  std::vector<int> predictions;
  std::vector<int> labels;
};

/// argmax per row; ties go to the lowest class index.
int argmax_lowest(std::span<const double> row);
/// Scores [N, K] (logits or probabilities) against labels.
EvalResult score_predictions(const MatrixRM& scores, const std::vector<int>& labels, int num_classes);

struct EpochRecord {
  Index epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_ce = 0.0;
  double train_kd = 0.0;  // mean KL term before alpha, 0 without a teacher
  double val_accuracy = 0.0;
  double lr_end = 0.0;
};

struct RunReport {
  std::string name;
  std::string kind = "train";  // "train", "distill" or "ensemble"
  std::string architecture;
  bool boundary_indicator = true;
  std::string config_hash;
  std::uint64_t seed = 0;
  int generation = 0;  // 0 for plain training
  std::string status = "completed";  // or "diverged"
  std::string diagnostic;
  Index parameter_count = 0;
  std::vector<EpochRecord> epochs;
  Index best_epoch = 0;  // 0 = initial weights
  double best_val_accuracy = 0.0;
  double test_top1 = 0.0;
  std::vector<double> per_class_accuracy;
  std::vector<Index> per_class_count;
  std::vector<std::vector<Index>> confusion;
  std::optional<double> corrupted_test_top1;  // set when a corrupted test variant was scored
  double wall_clock_seconds = 0.0;
};

inline constexpr int kRunReportVersion = 1;
inline constexpr const char* kRunReportFormat = "lipbench-run-report";

Json to_json(const RunReport& r);
RunReport run_report_from_json(const Json& j);
void save_run_report(const RunReport& r, const std::string& path);
RunReport load_run_report(const std::string& path);

}  // namespace lipbench::train
