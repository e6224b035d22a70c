#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lipbench/core/ops.hpp"
#include "lipbench/models/config.hpp"

namespace lipbench::models {

struct NamedTensor {
  std::string name;
  Tensor tensor;
  bool trainable = true;
};

/// Ordered, named parameter and buffer storage for one model.
class ParameterStore {
 public:
  Tensor add(std::string name, Tensor tensor, bool trainable);
  const std::vector<NamedTensor>& entries() const { return entries_; }
  std::vector<Tensor> trainable() const;
  const NamedTensor* find(const std::string& name) const;
  Index trainable_count() const;
  /// Deep copy: the result shares no storage with this store.
  ParameterStore clone() const;

 private:
  std::vector<NamedTensor> entries_;
};

/// Creates parameters under a name prefix. When `source` is set, values are
/// copied from it by name (shape-checked) instead of being drawn from rng.
class ParamInit {
 public:
  ParamInit(ParameterStore& store, Rng& rng, const ParameterStore* source = nullptr, std::string prefix = {});

  ParamInit scope(const std::string& name) const;
  Tensor uniform(const std::string& name, Shape shape, double bound);
  Tensor constant(const std::string& name, Shape shape, double value);
  Tensor buffer(const std::string& name, Shape shape, double value);

 private:
  Tensor make(const std::string& name, Shape shape, bool trainable, const std::function<double()>& draw);

  ParameterStore* store_;
  Rng* rng_;
  const ParameterStore* source_;
  std::string prefix_;
};

struct ForwardContext {
  Mode mode = Mode::eval;
  Rng* rng = nullptr;  // required for dropout in train mode
};

struct Linear {
  Tensor weight;  // [out, in]
  Tensor bias;    // [out] or undefined

  static Linear create(ParamInit init, Index in, Index out, bool with_bias = true);
  Tensor operator()(const Tensor& x) const { return affine(weight, x, bias); }
};

struct Conv1d {
  Tensor weight;  // [out, in, k]
  Tensor bias;    // [out]
  Index dilation = 1;

  static Conv1d create(ParamInit init, Index in, Index out, Index kernel, Index dilation);
  Tensor operator()(const Tensor& x, const SequenceLayout& layout) const {
    return conv1d_same(x, weight, bias, dilation, &layout);
  }
};

struct Conv2d {
  Tensor weight;  // [out, in, k, k]
  Tensor bias;
  Index stride = 1;
  Index padding = 0;

  static Conv2d create(ParamInit init, Index in, Index out, Index kernel, Index stride, Index padding);
  Tensor operator()(const Tensor& x) const { return conv2d(x, weight, bias, stride, padding); }
};

struct BatchNorm {
  Tensor gamma;
  Tensor beta;
  BatchNormBuffers buffers;

  static BatchNorm create(ParamInit init, Index channels);
  Tensor operator()(const Tensor& x, const ForwardContext& ctx) {
    return batch_norm(x, gamma, beta, buffers, ctx.mode);
  }
};

struct ActivationLayer {
  Activation kind = Activation::prelu;
  Tensor slope;  // [C], PReLU only

  static ActivationLayer create(ParamInit init, Activation kind, Index channels);
  Tensor operator()(const Tensor& x) const { return kind == Activation::prelu ? prelu(x, slope) : relu(x); }
};

Tensor apply_dropout(const Tensor& x, double p, const ForwardContext& ctx);

/// Squeeze-and-excitation over packed sequences:
/// gate = sigmoid(W2 relu(W1 mean_t(x))), applied per sequence and channel.
struct SqueezeExcite {
  Tensor reduce;  // W1 [ceil(C/r), C]
  Tensor expand;  // W2 [C, ceil(C/r)]

  static SqueezeExcite create(ParamInit init, Index channels, Index reduction);
  /// Gates [C, count], each entry strictly inside (0, 1).
  Tensor gates(const Tensor& x, const SequenceLayout& layout) const;
  Tensor operator()(const Tensor& x, const SequenceLayout& layout) const;
};

/// conv -> batch norm -> activation -> dropout.
struct TemporalConvUnit {
  Conv1d conv;
  BatchNorm norm;
  ActivationLayer act;
  double dropout = 0.0;

  static TemporalConvUnit create(ParamInit init, Index in, Index out, Index kernel, Index dilation,
                                 Activation activation, double dropout);
  Tensor operator()(const Tensor& x, const SequenceLayout& layout, const ForwardContext& ctx);
};

/// One densely connected block: every unit sees the block input plus all
/// earlier unit outputs, SE re-weights the accumulated map, and a 1x1
/// transition (conv, norm, activation) sets the block output width.
struct DenseTemporalBlock {
  std::vector<TemporalConvUnit> units;
  SqueezeExcite se;
  Conv1d transition;
  BatchNorm transition_norm;
  ActivationLayer transition_act;
  Index input_width = 0;
  Index growth_rate = 0;

  /// Width of the accumulated map before the transition.
  Index dense_width() const { return input_width + static_cast<Index>(units.size()) * growth_rate; }
};

struct DCTCNTrace {
  std::vector<Index> dense_widths;  // per block, observed
};

struct DCTCN {
  DCTCNConfig config;
  std::vector<DenseTemporalBlock> blocks;

  static DCTCN create(ParamInit init, const DCTCNConfig& config, Index input_width, Activation activation);
};

/// Parallel branches with different kernels, concatenated, then
/// norm -> activation -> dropout and a residual connection.
struct MultiScaleBlock {
  std::vector<Conv1d> branches;
  BatchNorm norm;
  ActivationLayer act;
  std::optional<Conv1d> residual_projection;
  double dropout = 0.0;
};

struct MSTCN {
  MSTCNConfig config;
  std::vector<MultiScaleBlock> blocks;

  static MSTCN create(ParamInit init, const MSTCNConfig& config, Index input_width, Activation activation);
};

struct GRUDirection {
  Tensor w_ih, w_hh, b_ih, b_hh;
};

struct BGRU {
  BGRUConfig config;
  std::vector<std::pair<GRUDirection, GRUDirection>> layers;  // (forward, backward)

  static BGRU create(ParamInit init, const BGRUConfig& config, Index input_width);
};

struct FrameEncoder {
  EncoderConfig config;
  Conv2d conv1;
  Conv2d conv2;
  Linear projection;

  static FrameEncoder create(ParamInit init, const EncoderConfig& config);
  /// Flattened width entering the projection.
  static Index flat_width(const EncoderConfig& config);
};

// ---- forward passes over packed batches [C, total] ------------------------

/// frames [F, H, W] -> features [feature_dim, F]; one column per frame.
Tensor encode_frames(const FrameEncoder& encoder, const Tensor& frames);
/// Appends the boundary row: [C, T] + [1, T] -> [C + 1, T]. Entries must be 0 or 1.
Tensor concat_boundary(const Tensor& features, const Tensor& boundary);
Tensor dctcn_forward(DCTCN& net, const Tensor& x, const SequenceLayout& layout, const ForwardContext& ctx,
                     DCTCNTrace* trace = nullptr);
Tensor dense_block_forward(DenseTemporalBlock& block, const Tensor& x, const SequenceLayout& layout,
                           const ForwardContext& ctx, Index* dense_width = nullptr);
Tensor mstcn_forward(MSTCN& net, const Tensor& x, const SequenceLayout& layout, const ForwardContext& ctx);
Tensor multiscale_block_forward(MultiScaleBlock& block, const Tensor& x, const SequenceLayout& layout,
                                const ForwardContext& ctx);
Tensor bgru_forward(const BGRU& net, const Tensor& x, const SequenceLayout& layout, const ForwardContext& ctx);
/// Mean over time of each sequence followed by the linear head: returns logits [count, K].
Tensor classify(const Linear& head, const Tensor& temporal_out, const SequenceLayout& layout);

}  // namespace lipbench::models
