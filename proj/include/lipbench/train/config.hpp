#pragma once

#include <optional>
#include <string>

#include "lipbench/augment/augment.hpp"
#include "lipbench/core/ops.hpp"
#include "lipbench/models/config.hpp"

namespace lipbench::train {

inline constexpr int kTrainConfigVersion = 1;

/// Everything that determines a run, given the dataset file.
struct TrainConfig {
  std::string name = "run";
  models::ModelSpec model;  // model.boundary_indicator is the run's boundary switch
  augment::AugmentConfig augment;
  Index epochs = 80;
  Index batch_size = 32;
  double lr = 3e-4;
  double weight_decay = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double distill_alpha = 1.0;
  double distill_temperature = 1.0;
  KLDirection distill_direction = KLDirection::teacher_to_student;
  bool teacher_clean_input = false;  // teacher sees the unmixed clips; its soft targets are mixed with lambda
  bool chain_early_stop = false;     // stop the distillation chain after the first non-improving generation
  Index eval_batch_size = 64;
  std::uint64_t seed = 0;

  /// Desk-scale overrides; when set they replace the value above.
  std::optional<Index> desk_epochs;
  std::optional<Index> desk_batch_size;

  Index effective_epochs() const { return desk_epochs.value_or(epochs); }
  Index effective_batch_size() const { return desk_batch_size.value_or(batch_size); }
};

void validate(const TrainConfig& c);
Json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const Json& j, const std::string& path = "");
TrainConfig load_train_config(const std::string& path);
/// FNV-1a of the canonical JSON form, as 16 hex digits.
std::string config_hash(const TrainConfig& c);

std::string to_string(KLDirection d);

}  // namespace lipbench::train
