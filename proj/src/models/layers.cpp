#include "lipbench/models/layers.hpp"

#include <cmath>

namespace lipbench::models {

Tensor ParameterStore::add(std::string name, Tensor tensor, bool trainable) {
  if (find(name)) throw UsageError("parameter '" + name + "' registered twice");
  tensor.set_requires_grad(trainable);
  entries_.push_back({std::move(name), tensor, trainable});
  return tensor;
}

std::vector<Tensor> ParameterStore::trainable() const {
  std::vector<Tensor> out;
  for (const auto& e : entries_)
    if (e.trainable) out.push_back(e.tensor);
  return out;
}

const NamedTensor* ParameterStore::find(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return &e;
  return nullptr;
}

Index ParameterStore::trainable_count() const {
  Index n = 0;
  for (const auto& e : entries_)
    if (e.trainable) n += e.tensor.numel();
  return n;
}

ParameterStore ParameterStore::clone() const {
  ParameterStore out;
  for (const auto& e : entries_) {
    Tensor copy = e.tensor.clone();
    copy.set_requires_grad(e.trainable);
    out.entries_.push_back({e.name, copy, e.trainable});
  }
  return out;
}

ParamInit::ParamInit(ParameterStore& store, Rng& rng, const ParameterStore* source, std::string prefix)
    : store_(&store), rng_(&rng), source_(source), prefix_(std::move(prefix)) {}

ParamInit ParamInit::scope(const std::string& name) const {
  return ParamInit(*store_, *rng_, source_, prefix_.empty() ? name : prefix_ + "." + name);
}

Tensor ParamInit::make(const std::string& name, Shape shape, bool trainable, const std::function<double()>& draw) {
  const std::string full = prefix_.empty() ? name : prefix_ + "." + name;
  Tensor t = Tensor::zeros(shape);
  if (source_) {
    const NamedTensor* src = source_->find(full);
    if (!src) throw DataError("parameter '" + full + "' missing from source");
    if (src->tensor.shape() != shape) {
      throw DataError("parameter '" + full + "' has shape " + shape_string(src->tensor.shape()) + ", expected " +
                      shape_string(shape));
    }
    t.value() = src->tensor.value();
  } else {
    for (double& v : t.data()) v = draw();
  }
  return store_->add(full, t, trainable);
}

Tensor ParamInit::uniform(const std::string& name, Shape shape, double bound) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  return make(name, std::move(shape), true, [&] { return dist(*rng_); });
}

Tensor ParamInit::constant(const std::string& name, Shape shape, double value) {
  return make(name, std::move(shape), true, [value] { return value; });
}

Tensor ParamInit::buffer(const std::string& name, Shape shape, double value) {
  return make(name, std::move(shape), false, [value] { return value; });
}

namespace {

double he_bound(Index fan_in) { return std::sqrt(6.0 / static_cast<double>(fan_in)); }
double fan_bound(Index fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); }

}  // namespace

Linear Linear::create(ParamInit init, Index in, Index out, bool with_bias) {
  Linear l;
  l.weight = init.uniform("weight", {out, in}, fan_bound(in));
  if (with_bias) l.bias = init.uniform("bias", {out}, fan_bound(in));
  return l;
}

Conv1d Conv1d::create(ParamInit init, Index in, Index out, Index kernel, Index dilation) {
  Conv1d c;
  c.weight = init.uniform("weight", {out, in, kernel}, he_bound(in * kernel));
  c.bias = init.uniform("bias", {out}, fan_bound(in * kernel));
  c.dilation = dilation;
  return c;
}

Conv2d Conv2d::create(ParamInit init, Index in, Index out, Index kernel, Index stride, Index padding) {
  Conv2d c;
  c.weight = init.uniform("weight", {out, in, kernel, kernel}, he_bound(in * kernel * kernel));
  c.bias = init.uniform("bias", {out}, fan_bound(in * kernel * kernel));
  c.stride = stride;
  c.padding = padding;
  return c;
}

BatchNorm BatchNorm::create(ParamInit init, Index channels) {
  BatchNorm b;
  b.gamma = init.constant("gamma", {channels}, 1.0);
  b.beta = init.constant("beta", {channels}, 0.0);
  b.buffers.running_mean = init.buffer("running_mean", {channels}, 0.0);
  b.buffers.running_var = init.buffer("running_var", {channels}, 1.0);
  return b;
}

ActivationLayer ActivationLayer::create(ParamInit init, Activation kind, Index channels) {
  ActivationLayer a;
  a.kind = kind;
  if (kind == Activation::prelu) a.slope = init.constant("slope", {channels}, 0.25);
  return a;
}

Tensor apply_dropout(const Tensor& x, double p, const ForwardContext& ctx) {
  if (ctx.mode == Mode::eval || p == 0.0) return x;
  if (!ctx.rng) throw UsageError("dropout in train mode needs an rng");
  return dropout(x, p, ctx.mode, *ctx.rng);
}

SqueezeExcite SqueezeExcite::create(ParamInit init, Index channels, Index reduction) {
  const Index bottleneck = (channels + reduction - 1) / reduction;
  SqueezeExcite se;
  se.reduce = init.uniform("reduce", {bottleneck, channels}, fan_bound(channels));
  se.expand = init.uniform("expand", {channels, bottleneck}, fan_bound(bottleneck));
  return se;
}

Tensor SqueezeExcite::gates(const Tensor& x, const SequenceLayout& layout) const {
  return sigmoid(matmul(expand, relu(matmul(reduce, segment_mean(x, layout)))));
}

Tensor SqueezeExcite::operator()(const Tensor& x, const SequenceLayout& layout) const {
  return scale_segments(x, gates(x, layout), layout);
}

TemporalConvUnit TemporalConvUnit::create(ParamInit init, Index in, Index out, Index kernel, Index dilation,
                                          Activation activation, double dropout) {
  TemporalConvUnit u;
  u.conv = Conv1d::create(init.scope("conv"), in, out, kernel, dilation);
  u.norm = BatchNorm::create(init.scope("norm"), out);
  u.act = ActivationLayer::create(init.scope("act"), activation, out);
  u.dropout = dropout;
  return u;
}

Tensor TemporalConvUnit::operator()(const Tensor& x, const SequenceLayout& layout, const ForwardContext& ctx) {
  return apply_dropout(act(norm(conv(x, layout), ctx)), dropout, ctx);
}

DCTCN DCTCN::create(ParamInit init, const DCTCNConfig& config, Index input_width, Activation activation) {
  DCTCN net;
  net.config = config;
  Index width = input_width;
  const auto schedule = config.layer_schedule();
  for (Index b = 0; b < config.num_blocks; ++b) {
    ParamInit bi = init.scope("block" + std::to_string(b));
    DenseTemporalBlock block;
    block.input_width = width;
    block.growth_rate = config.growth_rate;
    if (config.growth_rate > 0) {
      Index dense = width;
      for (std::size_t l = 0; l < schedule.size(); ++l) {
        const auto [k, d] = schedule[l];
        block.units.push_back(TemporalConvUnit::create(bi.scope("unit" + std::to_string(l)), dense,
                                                       config.growth_rate, k, d, activation, config.dropout));
        dense += config.growth_rate;
      }
    }
    const Index dense = block.dense_width();
    block.se = SqueezeExcite::create(bi.scope("se"), dense, config.se_reduction);
    block.transition = Conv1d::create(bi.scope("transition"), dense, config.block_output, 1, 1);
    block.transition_norm = BatchNorm::create(bi.scope("transition_norm"), config.block_output);
    block.transition_act = ActivationLayer::create(bi.scope("transition_act"), activation, config.block_output);
    net.blocks.push_back(std::move(block));
    width = config.block_output;
  }
  return net;
}

MSTCN MSTCN::create(ParamInit init, const MSTCNConfig& config, Index input_width, Activation activation) {
  MSTCN net;
  net.config = config;
  const Index branches = static_cast<Index>(config.kernel_sizes.size());
  const Index branch_width = config.channels / branches;
  Index width = input_width;
  for (Index b = 0; b < config.num_blocks; ++b) {
    ParamInit bi = init.scope("block" + std::to_string(b));
    MultiScaleBlock block;
    const Index dilation = Index{1} << b;
    for (Index i = 0; i < branches; ++i) {
      block.branches.push_back(Conv1d::create(bi.scope("branch" + std::to_string(i)), width, branch_width,
                                              config.kernel_sizes[static_cast<std::size_t>(i)], dilation));
    }
    block.norm = BatchNorm::create(bi.scope("norm"), config.channels);
    block.act = ActivationLayer::create(bi.scope("act"), activation, config.channels);
    if (width != config.channels) block.residual_projection = Conv1d::create(bi.scope("residual"), width, config.channels, 1, 1);
    block.dropout = config.dropout;
    net.blocks.push_back(std::move(block));
    width = config.channels;
  }
  return net;
}

BGRU BGRU::create(ParamInit init, const BGRUConfig& config, Index input_width) {
  BGRU net;
  net.config = config;
  const Index h = config.hidden;
  const double bound = fan_bound(h);
  Index width = input_width;
  for (Index l = 0; l < config.num_layers; ++l) {
    auto direction = [&](const std::string& name) {
      ParamInit di = init.scope("layer" + std::to_string(l) + "." + name);
      GRUDirection d;
      d.w_ih = di.uniform("w_ih", {3 * h, width}, bound);
      d.w_hh = di.uniform("w_hh", {3 * h, h}, bound);
      d.b_ih = di.uniform("b_ih", {3 * h}, bound);
      d.b_hh = di.uniform("b_hh", {3 * h}, bound);
      return d;
    };
    GRUDirection fwd = direction("forward");
    GRUDirection bwd = direction("backward");
    net.layers.emplace_back(std::move(fwd), std::move(bwd));
    width = 2 * h;
  }
  return net;
}

namespace {

Index conv_out(Index size) { return (size + 2 - 3) / 2 + 1; }  // k=3, stride 2, pad 1

}  // namespace

Index FrameEncoder::flat_width(const EncoderConfig& c) {
  return c.conv2_channels * conv_out(conv_out(c.frame_height)) * conv_out(conv_out(c.frame_width));
}

FrameEncoder FrameEncoder::create(ParamInit init, const EncoderConfig& config) {
  FrameEncoder e;
  e.config = config;
  e.conv1 = Conv2d::create(init.scope("conv1"), 1, config.conv1_channels, 3, 2, 1);
  e.conv2 = Conv2d::create(init.scope("conv2"), config.conv1_channels, config.conv2_channels, 3, 2, 1);
  e.projection = Linear::create(init.scope("projection"), flat_width(config), config.feature_dim);
  return e;
}

Tensor encode_frames(const FrameEncoder& encoder, const Tensor& frames) {
  if (frames.rank() != 3) throw InputError("encode_frames: expected [T, H, W], got " + shape_string(frames.shape()));
  const Index t = frames.dim(0);
  if (t == 0) throw InputError("encode_frames: empty video");
  if (frames.dim(1) != encoder.config.frame_height || frames.dim(2) != encoder.config.frame_width) {
    throw InputError("encode_frames: frames are " + std::to_string(frames.dim(1)) + "x" +
                     std::to_string(frames.dim(2)) + ", encoder expects " +
                     std::to_string(encoder.config.frame_height) + "x" + std::to_string(encoder.config.frame_width));
  }
  Tensor x = reshape(frames, {t, 1, frames.dim(1), frames.dim(2)});
  x = relu(encoder.conv1(x));
  x = relu(encoder.conv2(x));
  x = reshape(x, {t, FrameEncoder::flat_width(encoder.config)});
  return encoder.projection(transpose(x));
}

Tensor concat_boundary(const Tensor& features, const Tensor& boundary) {
  if (features.rank() != 2 || boundary.rank() != 2 || boundary.dim(0) != 1) {
    throw InputError("concat_boundary: expected [C, T] features and a [1, T] boundary");
  }
  if (boundary.dim(1) != features.dim(1)) {
    throw InputError("concat_boundary: boundary length " + std::to_string(boundary.dim(1)) +
                     " does not match " + std::to_string(features.dim(1)) + " frames");
  }
  for (double v : boundary.data()) {
    if (v != 0.0 && v != 1.0) throw InputError("concat_boundary: boundary entries must be 0 or 1");
  }
  const Tensor parts[] = {features, boundary};
  return concat_rows(parts);
}

Tensor dense_block_forward(DenseTemporalBlock& block, const Tensor& x, const SequenceLayout& layout,
                           const ForwardContext& ctx, Index* dense_width) {
  std::vector<Tensor> accumulated{x};
  Tensor map = x;
  for (auto& unit : block.units) {
    accumulated.push_back(unit(map, layout, ctx));
    map = concat_rows(accumulated);
  }
  if (dense_width) *dense_width = map.dim(0);
  map = block.se(map, layout);
  return block.transition_act(block.transition_norm(block.transition(map, layout), ctx));
}

Tensor dctcn_forward(DCTCN& net, const Tensor& x, const SequenceLayout& layout, const ForwardContext& ctx,
                     DCTCNTrace* trace) {
  Tensor h = x;
  for (auto& block : net.blocks) {
    Index width = 0;
    h = dense_block_forward(block, h, layout, ctx, &width);
    if (trace) trace->dense_widths.push_back(width);
  }
  return h;
}

Tensor multiscale_block_forward(MultiScaleBlock& block, const Tensor& x, const SequenceLayout& layout,
                                const ForwardContext& ctx) {
  std::vector<Tensor> outs;
  outs.reserve(block.branches.size());
  for (const auto& branch : block.branches) outs.push_back(branch(x, layout));
  Tensor y = apply_dropout(block.act(block.norm(concat_rows(outs), ctx)), block.dropout, ctx);
  const Tensor residual = block.residual_projection ? (*block.residual_projection)(x, layout) : x;
  return y + residual;
}

Tensor mstcn_forward(MSTCN& net, const Tensor& x, const SequenceLayout& layout, const ForwardContext& ctx) {
  Tensor h = x;
  for (auto& block : net.blocks) h = multiscale_block_forward(block, h, layout, ctx);
  return h;
}

Tensor bgru_forward(const BGRU& net, const Tensor& x, const SequenceLayout& layout, const ForwardContext& ctx) {
  Tensor h = x;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    if (l > 0) h = apply_dropout(h, net.config.dropout, ctx);
    const auto& [f, b] = net.layers[l];
    const Tensor both[] = {gru_sequence(h, layout, f.w_ih, f.w_hh, f.b_ih, f.b_hh, false),
                           gru_sequence(h, layout, b.w_ih, b.w_hh, b.b_ih, b.b_hh, true)};
    h = concat_rows(both);
  }
  return h;
}

Tensor classify(const Linear& head, const Tensor& temporal_out, const SequenceLayout& layout) {
  return transpose(head(segment_mean(temporal_out, layout)));
}

}  // namespace lipbench::models
