#pragma once

#include <string>
#include <vector>

#include "lipbench/common/json_util.hpp"
#include "lipbench/core/tensor.hpp"

namespace lipbench::models {

enum class Architecture { dctcn, mstcn, bgru };
enum class Activation { prelu, relu };

std::string to_string(Architecture a);
Architecture architecture_from_string(const std::string& s);

/// Per-frame encoder: two stride-2 3x3 convolutions (ReLU) and a linear
/// projection to `feature_dim`. Stands in for the 3-D conv + ResNet-18 front end.
struct EncoderConfig {
  Index frame_height = 16;
  Index frame_width = 16;
  Index conv1_channels = 8;
  Index conv2_channels = 16;
  Index feature_dim = 32;
};

struct MSTCNConfig {
  Index num_blocks = 4;
  std::vector<Index> kernel_sizes{3, 5, 7};
  Index channels = 48;  // per block, split evenly across branches
  double dropout = 0.2;

  /// Block count and branch kernels of the full-size model; widths stay at desk scale.
  static MSTCNConfig full_scale();
};

struct DCTCNConfig {
  Index num_blocks = 2;
  Index layers_per_block = 9;
  std::vector<Index> kernel_sizes{3, 5, 7};
  std::vector<Index> dilations{1, 2, 5};
  Index growth_rate = 8;  // C_o: channels each dense layer appends
  Index block_output = 64;
  Index se_reduction = 4;
  double dropout = 0.2;

  /// (kernel, dilation) of each dense layer, kernel-major.
  std::vector<std::pair<Index, Index>> layer_schedule() const;
  /// Layer count, kernels and dilations of the full-size model; widths stay at desk scale.
  static DCTCNConfig full_scale();
};

struct BGRUConfig {
  Index num_layers = 4;
  Index hidden = 64;
  double dropout = 0.2;

  static BGRUConfig full_scale();
};

struct ModelSpec {
  Architecture architecture = Architecture::dctcn;
  EncoderConfig encoder;
  DCTCNConfig dctcn;
  MSTCNConfig mstcn;
  BGRUConfig bgru;
  Activation activation = Activation::prelu;
  bool boundary_indicator = true;
  Index num_classes = 20;

  /// Channels entering the temporal model (encoder features + boundary row).
  Index temporal_input_width() const;
  Index temporal_output_width() const;
};

/// Throws ConfigError on inconsistent configurations.
void validate(const EncoderConfig& c);
void validate(const MSTCNConfig& c);
void validate(const DCTCNConfig& c);
void validate(const BGRUConfig& c);
void validate(const ModelSpec& s);

Json to_json(const ModelSpec& s);
ModelSpec model_spec_from_json(const Json& j, const std::string& path = "model");

}  // namespace lipbench::models
