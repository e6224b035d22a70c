#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lipbench/data/dataset.hpp"
#include "lipbench/train/config.hpp"
#include "lipbench/train/report.hpp"

namespace lipbench::analysis {

inline constexpr int kAblationPlanVersion = 1;

/// The single setting a delta changes relative to the base config.
enum class Knob { crop, flip, mixup, time_mask, variable_length, boundary, architecture };

std::string to_string(Knob k);
Knob knob_from_string(const std::string& s);

struct AblationDelta {
  std::string name;
  Knob knob = Knob::time_mask;
  models::Architecture architecture = models::Architecture::dctcn;  // only for Knob::architecture
};

/// Test-time corruption scored alongside the clean test split.
struct Corruption {
  double extra_noise = 0.1;
  Index occlusion_max = 10;
  std::uint64_t seed = 77;
};

struct AblationPlan {
  std::string name = "ablation";
  train::TrainConfig base;
  std::vector<AblationDelta> deltas;
  int repetitions = 1;  // repetition r trains with seed base.seed + r
  std::optional<Corruption> corruption;
};

/// Base config with exactly one knob changed. Throws ConfigError when the
/// delta would leave the config unchanged (knob already off, same architecture).
train::TrainConfig apply_delta(const train::TrainConfig& base, const AblationDelta& delta);

void validate(const AblationPlan& plan);
Json to_json(const AblationPlan& plan);
AblationPlan ablation_plan_from_json(const Json& j, const std::string& path = "");
AblationPlan load_ablation_plan(const std::string& path);

/// One trained run of the plan.
struct AblationRun {
  std::string cell;
  int repetition = 0;
  train::TrainConfig config;
};

/// Runs in cell-major order: base first, then each delta; repetitions inside.
std::vector<AblationRun> expand_plan(const AblationPlan& plan);

struct AblationOptions {
  int jobs = 1;
  /// Called after every finished run (from the worker thread, serialised).
  std::function<void(const AblationRun&, const train::RunReport&)> on_run;
};

/// Trains every run. A run that throws yields a report with status "failed" (or
/// the partial "diverged" report) and does not affect other runs; reports come
/// back in expand_plan order regardless of `jobs`.
std::vector<train::RunReport> run_ablation(const AblationPlan& plan, const data::Dataset& data,
                                           const AblationOptions& options = {});

struct CellStats {
  std::string name;
  std::string architecture;
  bool boundary_indicator = true;
  Index runs = 0;
  Index failed_runs = 0;
  bool failed = false;
  double mean_top1 = 0.0;
  double std_top1 = 0.0;  // sample standard deviation; 0 for a single run
  double delta_top1 = 0.0;  // mean_top1 - base mean_top1
  std::optional<double> mean_corrupted;
  std::optional<double> std_corrupted;
  std::optional<double> delta_corrupted;
};

/// Groups reports by name in first-appearance order; the first cell is the base.
/// Statistics use completed runs; a cell with any failed run is marked failed.
std::vector<CellStats> tabulate_ablation(const std::vector<train::RunReport>& reports);

Json to_json(const CellStats& c);

}  // namespace lipbench::analysis
