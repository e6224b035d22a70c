#pragma once

#include <functional>
#include <vector>

#include "lipbench/data/dataset.hpp"
#include "lipbench/models/model.hpp"
#include "lipbench/train/config.hpp"
#include "lipbench/train/report.hpp"

namespace lipbench::train {

struct StepRecord {
  double loss = 0.0;
  double ce = 0.0;
  double kd = 0.0;
  double lambda = 1.0;
  double lr = 0.0;
};

struct TrainOptions {
  std::function<void(const EpochRecord&)> on_epoch;
  std::vector<StepRecord>* step_trace = nullptr;
  /// Student starts from the teacher's weights instead of a fresh draw.
  bool init_from_teacher = false;
  int generation = 0;
};

struct TrainResult {
  models::Model model;  // best-validation weights
  RunReport report;
};

/// A non-finite loss aborted the run; `report` holds the epochs completed so far.
class DivergenceError : public NumericalError {
 public:
  DivergenceError(const std::string& what, RunReport report) : NumericalError(what), report_(std::move(report)) {}
  const RunReport& report() const { return report_; }

 private:
  RunReport report_;
};

/// Packs clips along the time axis.
models::ModelInput pack_clips(const std::vector<augment::Clip>& clips);

/// Supervised run: augmentation pipeline, AdamW with a cosine schedule over all
/// optimizer steps, best-validation checkpoint, centre-crop test evaluation.
TrainResult train(const TrainConfig& config, const data::Dataset& data, const TrainOptions& options = {});

/// L = CE + alpha * T^2 * KL(teacher || student). The teacher runs in eval mode
/// without gradient. Throws ConfigError when the teacher's architecture differs.
TrainResult distill_train(const TrainConfig& config, models::Model& teacher, const data::Dataset& data,
                          const TrainOptions& options = {});

/// Generation 0 is plain training; generation i is taught by generation i - 1
/// and seeded from (seed, i). Every trained generation is returned.
std::vector<TrainResult> self_distill_chain(const TrainConfig& config, int generations, const data::Dataset& data,
                                            const std::function<void(int, const EpochRecord&)>& on_epoch = {});

/// Softmax probabilities [N, K] of one model (eval mode, no gradient).
MatrixRM predict_probabilities(models::Model& model, const models::ModelInput& input);
/// Mean of the members' softmax outputs. Throws InputError on an empty list.
MatrixRM ensemble_predict(const std::vector<models::Model*>& members, const models::ModelInput& input);

/// Logits [N, K] over a split, centre-cropped, in batches.
MatrixRM predict_logits(models::Model& model, const data::SampleSet& set, const augment::AugmentConfig& augment,
                        Index batch_size = 64);
EvalResult evaluate(models::Model& model, const data::SampleSet& set, const augment::AugmentConfig& augment,
                    Index batch_size = 64);
EvalResult evaluate_ensemble(const std::vector<models::Model*>& members, const data::SampleSet& set,
                             const augment::AugmentConfig& augment, Index batch_size = 64);

}  // namespace lipbench::train
