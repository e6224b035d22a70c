#include "lipbench/models/config.hpp"

namespace lipbench::models {

std::string to_string(Architecture a) {
  switch (a) {
    case Architecture::dctcn: return "dctcn";
    case Architecture::mstcn: return "mstcn";
    case Architecture::bgru: return "bgru";
  }
  return "?";
}

Architecture architecture_from_string(const std::string& s) {
  if (s == "dctcn") return Architecture::dctcn;
  if (s == "mstcn") return Architecture::mstcn;
  if (s == "bgru") return Architecture::bgru;
  throw ConfigError("unknown architecture '" + s + "' (expected dctcn, mstcn or bgru)");
}

namespace {

std::string activation_name(Activation a) { return a == Activation::prelu ? "prelu" : "relu"; }

Activation activation_from_string(const std::string& s) {
  if (s == "prelu") return Activation::prelu;
  if (s == "relu") return Activation::relu;
  throw ConfigError("unknown activation '" + s + "'");
}

void check_dropout(double p, const char* what) {
  if (!(p >= 0.0 && p < 1.0)) throw ConfigError(std::string(what) + ": dropout must lie in [0, 1)");
}

}  // namespace

MSTCNConfig MSTCNConfig::full_scale() {
  MSTCNConfig c;
  c.num_blocks = 4;
  c.kernel_sizes = {3, 5, 7};
  return c;
}

std::vector<std::pair<Index, Index>> DCTCNConfig::layer_schedule() const {
  std::vector<std::pair<Index, Index>> out;
  for (Index k : kernel_sizes)
    for (Index d : dilations) out.emplace_back(k, d);
  return out;
}

DCTCNConfig DCTCNConfig::full_scale() {
  DCTCNConfig c;
  c.layers_per_block = 9;
  c.kernel_sizes = {3, 5, 7};
  c.dilations = {1, 2, 5};
  return c;
}

BGRUConfig BGRUConfig::full_scale() {
  BGRUConfig c;
  c.num_layers = 4;
  c.hidden = 1024;
  c.dropout = 0.2;
  return c;
}

Index ModelSpec::temporal_input_width() const {
  return encoder.feature_dim + (boundary_indicator ? 1 : 0);
}

Index ModelSpec::temporal_output_width() const {
  switch (architecture) {
    case Architecture::dctcn: return dctcn.block_output;
    case Architecture::mstcn: return mstcn.channels;
    case Architecture::bgru: return 2 * bgru.hidden;
  }
  return 0;
}

void validate(const EncoderConfig& c) {
  if (c.frame_height < 1 || c.frame_width < 1) throw ConfigError("encoder: frame size must be positive");
  if (c.conv1_channels < 1 || c.conv2_channels < 1) throw ConfigError("encoder: channel counts must be positive");
  if (c.feature_dim < 1) throw ConfigError("encoder: feature_dim must be >= 1");
}

void validate(const MSTCNConfig& c) {
  if (c.num_blocks < 1) throw ConfigError("mstcn: num_blocks must be >= 1");
  if (c.kernel_sizes.empty()) throw ConfigError("mstcn: at least one branch required");
  for (Index k : c.kernel_sizes) {
    if (k < 1 || k % 2 == 0) throw ConfigError("mstcn: branch kernels must be odd and positive");
  }
  const Index branches = static_cast<Index>(c.kernel_sizes.size());
  if (c.channels < branches || c.channels % branches != 0) {
    throw ConfigError("mstcn: channels (" + std::to_string(c.channels) + ") must be divisible by the branch count (" +
                      std::to_string(branches) + ")");
  }
  check_dropout(c.dropout, "mstcn");
}

void validate(const DCTCNConfig& c) {
  if (c.num_blocks < 1) throw ConfigError("dctcn: num_blocks must be >= 1");
  if (c.kernel_sizes.empty() || c.dilations.empty()) throw ConfigError("dctcn: kernel and dilation lists required");
  for (Index k : c.kernel_sizes) {
    if (k < 1 || k % 2 == 0) throw ConfigError("dctcn: kernels must be odd and positive");
  }
  for (Index d : c.dilations) {
    if (d < 1) throw ConfigError("dctcn: dilations must be >= 1");
  }
  const auto expected = static_cast<Index>(c.kernel_sizes.size() * c.dilations.size());
  if (c.layers_per_block != expected) {
    throw ConfigError("dctcn: layers_per_block (" + std::to_string(c.layers_per_block) +
                      ") must equal |kernel_sizes| x |dilations| (" + std::to_string(expected) + ")");
  }
  if (c.growth_rate < 1) throw ConfigError("dctcn: growth_rate must be >= 1");
  if (c.block_output < 1) throw ConfigError("dctcn: block_output must be >= 1");
  if (c.se_reduction < 1) throw ConfigError("dctcn: se_reduction must be >= 1");
  check_dropout(c.dropout, "dctcn");
}

void validate(const BGRUConfig& c) {
  if (c.num_layers < 1) throw ConfigError("bgru: num_layers must be >= 1");
  if (c.hidden < 1) throw ConfigError("bgru: hidden must be >= 1");
  check_dropout(c.dropout, "bgru");
}

void validate(const ModelSpec& s) {
  validate(s.encoder);
  switch (s.architecture) {
    case Architecture::dctcn: validate(s.dctcn); break;
    case Architecture::mstcn: validate(s.mstcn); break;
    case Architecture::bgru: validate(s.bgru); break;
  }
  if (s.num_classes < 2) throw ConfigError("model: num_classes must be >= 2");
}

Json to_json(const ModelSpec& s) {
  Json j;
  j["architecture"] = to_string(s.architecture);
  j["activation"] = activation_name(s.activation);
  j["boundary_indicator"] = s.boundary_indicator;
  j["num_classes"] = s.num_classes;
  j["encoder"] = {{"frame_height", s.encoder.frame_height},
                  {"frame_width", s.encoder.frame_width},
                  {"conv1_channels", s.encoder.conv1_channels},
                  {"conv2_channels", s.encoder.conv2_channels},
                  {"feature_dim", s.encoder.feature_dim}};
  j["dctcn"] = {{"num_blocks", s.dctcn.num_blocks},
                {"layers_per_block", s.dctcn.layers_per_block},
                {"kernel_sizes", s.dctcn.kernel_sizes},
                {"dilations", s.dctcn.dilations},
                {"growth_rate", s.dctcn.growth_rate},
                {"block_output", s.dctcn.block_output},
                {"se_reduction", s.dctcn.se_reduction},
                {"dropout", s.dctcn.dropout}};
  j["mstcn"] = {{"num_blocks", s.mstcn.num_blocks},
                {"kernel_sizes", s.mstcn.kernel_sizes},
                {"channels", s.mstcn.channels},
                {"dropout", s.mstcn.dropout}};
  j["bgru"] = {{"num_layers", s.bgru.num_layers}, {"hidden", s.bgru.hidden}, {"dropout", s.bgru.dropout}};
  return j;
}

ModelSpec model_spec_from_json(const Json& j, const std::string& path) {
  ModelSpec s;
  StrictObject o(j, path);
  std::string arch = to_string(s.architecture);
  std::string act = activation_name(s.activation);
  o.optional("architecture", arch);
  o.optional("activation", act);
  o.optional("boundary_indicator", s.boundary_indicator);
  o.optional("num_classes", s.num_classes);
  s.architecture = architecture_from_string(arch);
  s.activation = activation_from_string(act);
  if (const Json* e = o.child("encoder")) {
    StrictObject eo(*e, o.child_path("encoder"));
    eo.optional("frame_height", s.encoder.frame_height);
    eo.optional("frame_width", s.encoder.frame_width);
    eo.optional("conv1_channels", s.encoder.conv1_channels);
    eo.optional("conv2_channels", s.encoder.conv2_channels);
    eo.optional("feature_dim", s.encoder.feature_dim);
    eo.finish();
  }
  if (const Json* d = o.child("dctcn")) {
    StrictObject d_o(*d, o.child_path("dctcn"));
    d_o.optional("num_blocks", s.dctcn.num_blocks);
    d_o.optional("layers_per_block", s.dctcn.layers_per_block);
    d_o.optional("kernel_sizes", s.dctcn.kernel_sizes);
    d_o.optional("dilations", s.dctcn.dilations);
    d_o.optional("growth_rate", s.dctcn.growth_rate);
    d_o.optional("block_output", s.dctcn.block_output);
    d_o.optional("se_reduction", s.dctcn.se_reduction);
    d_o.optional("dropout", s.dctcn.dropout);
    d_o.finish();
  }
  if (const Json* m = o.child("mstcn")) {
    StrictObject mo(*m, o.child_path("mstcn"));
    mo.optional("num_blocks", s.mstcn.num_blocks);
    mo.optional("kernel_sizes", s.mstcn.kernel_sizes);
    mo.optional("channels", s.mstcn.channels);
    mo.optional("dropout", s.mstcn.dropout);
    mo.finish();
  }
  if (const Json* b = o.child("bgru")) {
    StrictObject bo(*b, o.child_path("bgru"));
    bo.optional("num_layers", s.bgru.num_layers);
    bo.optional("hidden", s.bgru.hidden);
    bo.optional("dropout", s.bgru.dropout);
    bo.finish();
  }
  o.finish();
  return s;
}

}  // namespace lipbench::models
