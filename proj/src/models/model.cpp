#include "lipbench/models/model.hpp"

namespace lipbench::models {

Model::Model(const ModelSpec& spec, std::uint64_t seed) : spec_(spec) {
  validate(spec_);
  Rng rng = make_rng(seed, {0x6d6f64656cULL});
  build(ParamInit(store_, rng));
}

Model::Model(const ModelSpec& spec, const ParameterStore& source) : spec_(spec) {
  validate(spec_);
  Rng unused(0);
  build(ParamInit(store_, unused, &source));
  if (store_.entries().size() != source.entries().size()) {
    throw DataError("parameter set does not match the model: " + std::to_string(source.entries().size()) +
                    " stored tensors, " + std::to_string(store_.entries().size()) + " expected");
  }
}

Model Model::clone() const { return Model(spec_, store_); }

void Model::build(ParamInit init) {
  encoder_ = FrameEncoder::create(init.scope("encoder"), spec_.encoder);
  const Index in = spec_.temporal_input_width();
  ParamInit temporal = init.scope("temporal");
  switch (spec_.architecture) {
    case Architecture::dctcn: dctcn_ = DCTCN::create(temporal, spec_.dctcn, in, spec_.activation); break;
    case Architecture::mstcn: mstcn_ = MSTCN::create(temporal, spec_.mstcn, in, spec_.activation); break;
    case Architecture::bgru: bgru_ = BGRU::create(temporal, spec_.bgru, in); break;
  }
  head_ = Linear::create(init.scope("head"), spec_.temporal_output_width(), spec_.num_classes);
}

Tensor Model::temporal_features(const ModelInput& input, const ForwardContext& ctx, DCTCNTrace* trace) {
  if (input.frames.dim(0) != input.layout.total()) {
    throw InputError("model input: " + std::to_string(input.frames.dim(0)) + " frames but the layout covers " +
                     std::to_string(input.layout.total()));
  }
  Tensor x = encode_frames(encoder_, input.frames);
  if (spec_.boundary_indicator) x = concat_boundary(x, input.boundary);
  if (dctcn_) return dctcn_forward(*dctcn_, x, input.layout, ctx, trace);
  if (mstcn_) return mstcn_forward(*mstcn_, x, input.layout, ctx);
  return bgru_forward(*bgru_, x, input.layout, ctx);
}

Tensor Model::forward(const ModelInput& input, const ForwardContext& ctx, DCTCNTrace* trace) {
  return classify(head_, temporal_features(input, ctx, trace), input.layout);
}

namespace {

Index conv1d_params(Index in, Index out, Index k) { return out * in * k + out; }
Index norm_act_params(Index c, Activation a) { return 2 * c + (a == Activation::prelu ? c : 0); }

}  // namespace

Index expected_parameter_count(const ModelSpec& s) {
  const auto& e = s.encoder;
  Index n = e.conv1_channels * 9 + e.conv1_channels;
  n += e.conv2_channels * e.conv1_channels * 9 + e.conv2_channels;
  n += FrameEncoder::flat_width(e) * e.feature_dim + e.feature_dim;

  Index width = s.temporal_input_width();
  switch (s.architecture) {
    case Architecture::dctcn: {
      const auto& c = s.dctcn;
      for (Index b = 0; b < c.num_blocks; ++b) {
        Index dense = width;
        for (auto [k, d] : c.layer_schedule()) {
          n += conv1d_params(dense, c.growth_rate, k) + norm_act_params(c.growth_rate, s.activation);
          dense += c.growth_rate;
        }
        const Index bottleneck = (dense + c.se_reduction - 1) / c.se_reduction;
        n += 2 * dense * bottleneck;
        n += conv1d_params(dense, c.block_output, 1) + norm_act_params(c.block_output, s.activation);
        width = c.block_output;
      }
      break;
    }
    case Architecture::mstcn: {
      const auto& c = s.mstcn;
      const Index branch = c.channels / static_cast<Index>(c.kernel_sizes.size());
      for (Index b = 0; b < c.num_blocks; ++b) {
        for (Index k : c.kernel_sizes) n += conv1d_params(width, branch, k);
        n += norm_act_params(c.channels, s.activation);
        if (width != c.channels) n += conv1d_params(width, c.channels, 1);
        width = c.channels;
      }
      break;
    }
    case Architecture::bgru: {
      const Index h = s.bgru.hidden;
      for (Index l = 0; l < s.bgru.num_layers; ++l) {
        n += 2 * (3 * h * width + 3 * h * h + 6 * h);
        width = 2 * h;
      }
      break;
    }
  }
  n += width * s.num_classes + s.num_classes;
  return n;
}

}  // namespace lipbench::models
