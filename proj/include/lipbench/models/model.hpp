#pragma once

#include <optional>
#include <string>

#include "lipbench/models/layers.hpp"

namespace lipbench::models {

/// A packed batch of clips: frames of every clip stacked along axis 0 and a
/// boundary row with one entry per frame.
struct ModelInput {
  Tensor frames;    // [total, H, W]
  Tensor boundary;  // [1, total]; ignored when the model has no boundary channel
  SequenceLayout layout;
};

/// Encoder, one temporal back-end and the classification head, with every
/// parameter and normalisation buffer registered in `store()`.
class Model {
 public:
  Model(const ModelSpec& spec, std::uint64_t seed);
  /// Rebuilds the model with values copied from `source` (names and shapes must match).
  Model(const ModelSpec& spec, const ParameterStore& source);

  Model(Model&&) = default;
  Model& operator=(Model&&) = default;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  /// Independent deep copy.
  Model clone() const;

  /// Logits [count, num_classes].
  Tensor forward(const ModelInput& input, const ForwardContext& ctx, DCTCNTrace* trace = nullptr);
  /// Temporal-model output [C_out, total] before pooling.
  Tensor temporal_features(const ModelInput& input, const ForwardContext& ctx, DCTCNTrace* trace = nullptr);

  const ModelSpec& spec() const { return spec_; }
  ParameterStore& store() { return store_; }
  const ParameterStore& store() const { return store_; }
  std::vector<Tensor> parameters() const { return store_.trainable(); }
  Index parameter_count() const { return store_.trainable_count(); }

  FrameEncoder& encoder() { return encoder_; }
  Linear& head() { return head_; }
  DCTCN* dctcn() { return dctcn_ ? &*dctcn_ : nullptr; }
  MSTCN* mstcn() { return mstcn_ ? &*mstcn_ : nullptr; }
  BGRU* bgru() { return bgru_ ? &*bgru_ : nullptr; }

 private:
  void build(ParamInit init);

  ModelSpec spec_;
  ParameterStore store_;
  FrameEncoder encoder_;
  std::optional<DCTCN> dctcn_;
  std::optional<MSTCN> mstcn_;
  std::optional<BGRU> bgru_;
  Linear head_;
};

/// Closed-form trainable parameter count of a spec, independent of Model.
Index expected_parameter_count(const ModelSpec& spec);

}  // namespace lipbench::models
