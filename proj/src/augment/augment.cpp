#include "lipbench/augment/augment.hpp"

#include <algorithm>
#include <numeric>

#include "lipbench/core/errors.hpp"

namespace lipbench::augment {

void validate(const AugmentConfig& c, Index frames, Index height, Index width) {
  if (c.crop_height < 1 || c.crop_width < 1) throw ConfigError("augment: crop size must be positive");
  if (c.crop_height > height || c.crop_width > width) {
    throw ConfigError("augment: crop " + std::to_string(c.crop_height) + "x" + std::to_string(c.crop_width) +
                      " exceeds the " + std::to_string(height) + "x" + std::to_string(width) + " frames");
  }
  if (!(c.flip_prob >= 0.0 && c.flip_prob <= 1.0)) throw ConfigError("augment: flip_prob must lie in [0, 1]");
  if (!(c.mixup_alpha > 0.0)) throw ConfigError("augment: mixup_alpha must be > 0");
  if (!(c.mixup_lambda >= 0.0 && c.mixup_lambda <= 1.0)) throw ConfigError("augment: mixup_lambda must lie in [0, 1]");
  if (c.time_mask_nmax < 0) throw ConfigError("augment: time_mask_nmax must be >= 0");
  if (c.time_mask && c.time_mask_nmax >= frames) {
    throw ConfigError("augment: time_mask_nmax (" + std::to_string(c.time_mask_nmax) +
                      ") must be smaller than the clip length (" + std::to_string(frames) + ")");
  }
}

Json to_json(const AugmentConfig& c) {
  return {{"crop_height", c.crop_height},
          {"crop_width", c.crop_width},
          {"random_crop", c.random_crop},
          {"flip", c.flip},
          {"flip_prob", c.flip_prob},
          {"mixup", c.mixup},
          {"mixup_mode", c.mixup_mode == MixupMode::beta ? "beta" : "fixed"},
          {"mixup_alpha", c.mixup_alpha},
          {"mixup_lambda", c.mixup_lambda},
          {"time_mask", c.time_mask},
          {"time_mask_nmax", c.time_mask_nmax},
          {"variable_length", c.variable_length}};
}

AugmentConfig augment_config_from_json(const Json& j, const std::string& path) {
  AugmentConfig c;
  StrictObject o(j, path);
  std::string mode = "beta";
  o.optional("crop_height", c.crop_height);
  o.optional("crop_width", c.crop_width);
  o.optional("random_crop", c.random_crop);
  o.optional("flip", c.flip);
  o.optional("flip_prob", c.flip_prob);
  o.optional("mixup", c.mixup);
  o.optional("mixup_mode", mode);
  o.optional("mixup_alpha", c.mixup_alpha);
  o.optional("mixup_lambda", c.mixup_lambda);
  o.optional("time_mask", c.time_mask);
  o.optional("time_mask_nmax", c.time_mask_nmax);
  o.optional("variable_length", c.variable_length);
  o.finish();
  if (mode == "beta") {
    c.mixup_mode = MixupMode::beta;
  } else if (mode == "fixed") {
    c.mixup_mode = MixupMode::fixed;
  } else {
    throw ConfigError("config key '" + o.child_path("mixup_mode") + "': expected \"beta\" or \"fixed\"");
  }
  return c;
}

std::string to_string(Stage s) {
  switch (s) {
    case Stage::variable_length: return "variable_length";
    case Stage::crop: return "crop";
    case Stage::flip: return "flip";
    case Stage::time_mask: return "time_mask";
    case Stage::mixup: return "mixup";
  }
  return "?";
}

namespace {

void require_video(const Tensor& v, const char* what) {
  if (!v.defined() || v.rank() != 3 || v.dim(0) < 1) throw InputError(std::string(what) + ": expected a [T, H, W] video");
}

}  // namespace

Tensor crop(const Tensor& video, Index top, Index left, Index height, Index width) {
  require_video(video, "crop");
  const Index t_len = video.dim(0), h = video.dim(1), w = video.dim(2);
  if (height > h || width > w || height < 1 || width < 1) {
    throw InputError("crop: " + std::to_string(height) + "x" + std::to_string(width) + " does not fit " +
                     std::to_string(h) + "x" + std::to_string(w) + " frames");
  }
  if (top < 0 || left < 0 || top + height > h || left + width > w) throw InputError("crop: offset out of range");
  Tensor out = Tensor::zeros({t_len, height, width});
  const double* src = video.value().data();
  double* dst = out.value().data();
  for (Index t = 0; t < t_len; ++t)
    for (Index y = 0; y < height; ++y)
      std::copy_n(src + (t * h + top + y) * w + left, width, dst + (t * height + y) * width);
  return out;
}

Tensor random_crop(const Tensor& video, Index height, Index width, Rng& rng, Index* top, Index* left) {
  require_video(video, "random_crop");
  if (height > video.dim(1) || width > video.dim(2)) {
    throw InputError("random_crop: crop exceeds the " + std::to_string(video.dim(1)) + "x" +
                     std::to_string(video.dim(2)) + " frame");
  }
  const Index y = std::uniform_int_distribution<Index>(0, video.dim(1) - height)(rng);
  const Index x = std::uniform_int_distribution<Index>(0, video.dim(2) - width)(rng);
  if (top) *top = y;
  if (left) *left = x;
  return crop(video, y, x, height, width);
}

Tensor center_crop(const Tensor& video, Index height, Index width) {
  require_video(video, "center_crop");
  if (height > video.dim(1) || width > video.dim(2)) {
    throw InputError("center_crop: crop exceeds the " + std::to_string(video.dim(1)) + "x" +
                     std::to_string(video.dim(2)) + " frame");
  }
  return crop(video, (video.dim(1) - height) / 2, (video.dim(2) - width) / 2, height, width);
}

Tensor mirror(const Tensor& video) {
  require_video(video, "mirror");
  const Index rows = video.dim(0) * video.dim(1), w = video.dim(2);
  Tensor out = Tensor::zeros(video.shape());
  const double* src = video.value().data();
  double* dst = out.value().data();
  for (Index r = 0; r < rows; ++r) std::reverse_copy(src + r * w, src + (r + 1) * w, dst + r * w);
  return out;
}

Tensor horizontal_flip(const Tensor& video, double p, Rng& rng, bool* flipped) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("horizontal_flip: p must lie in [0, 1]");
  const bool flip = std::bernoulli_distribution(p)(rng);
  if (flipped) *flipped = flip;
  return flip ? mirror(video) : video.clone();
}

std::vector<double> mean_frame(const Tensor& video) {
  require_video(video, "mean_frame");
  const Index t_len = video.dim(0), plane = video.dim(1) * video.dim(2);
  std::vector<double> acc(static_cast<std::size_t>(plane), 0.0);
  const double* x = video.value().data();
  for (Index t = 0; t < t_len; ++t)
    for (Index p = 0; p < plane; ++p) acc[static_cast<std::size_t>(p)] += x[t * plane + p];
  for (double& v : acc) v /= static_cast<double>(t_len);
  return acc;
}

TimeMaskDraw draw_time_mask(Index frames, Index nmax, Rng& rng) {
  if (nmax < 0 || nmax >= frames) {
    throw ConfigError("time_mask: nmax (" + std::to_string(nmax) + ") must lie in [0, T) for T = " +
                      std::to_string(frames));
  }
  TimeMaskDraw d;
  d.length = std::uniform_int_distribution<Index>(0, nmax)(rng);
  d.start = std::uniform_int_distribution<Index>(0, frames - d.length)(rng);
  return d;
}

Tensor apply_time_mask(const Tensor& video, const TimeMaskDraw& draw) {
  require_video(video, "time_mask");
  if (draw.length < 0 || draw.start < 0 || draw.start + draw.length > video.dim(0)) {
    throw InputError("time_mask: span outside the clip");
  }
  Tensor out = video.clone();
  if (draw.length == 0) return out;
  const std::vector<double> mean = mean_frame(video);
  const Index plane = video.dim(1) * video.dim(2);
  for (Index t = draw.start; t < draw.start + draw.length; ++t)
    std::copy(mean.begin(), mean.end(), out.value().data() + t * plane);
  return out;
}

Tensor time_mask(const Tensor& video, Index nmax, Rng& rng, TimeMaskDraw* draw) {
  require_video(video, "time_mask");
  const TimeMaskDraw d = draw_time_mask(video.dim(0), nmax, rng);
  if (draw) *draw = d;
  return apply_time_mask(video, d);
}

VideoSample variable_length(const VideoSample& sample, Rng& rng) {
  try {
    data::check_sample(sample);
  } catch (const InputError& e) {
    throw InputError(std::string("variable_length: word span missing or invalid: ") + e.what());
  }
  const Index t_len = sample.length(), plane = sample.height() * sample.width();
  // Windows containing the word form the product {0..start} x {end..T}.
  const Index offset = std::uniform_int_distribution<Index>(0, sample.start)(rng);
  const Index stop = std::uniform_int_distribution<Index>(sample.end, t_len)(rng);
  VideoSample out;
  out.label = sample.label;
  out.start = sample.start - offset;
  out.end = sample.end - offset;
  out.frames = Tensor::zeros({stop - offset, sample.height(), sample.width()});
  out.frames.value() = sample.frames.value().segment(offset * plane, (stop - offset) * plane);
  return out;
}

namespace {

enum StreamId : std::uint64_t { kVariableLength = 1, kCrop, kFlip, kTimeMask };

}  // namespace

Clip augment_clip(const VideoSample& sample, const AugmentConfig& config, std::uint64_t seed,
                  std::vector<Stage>* trace) {
  auto record = [&](Stage s) {
    if (trace) trace->push_back(s);
  };
  VideoSample s = sample;
  if (config.variable_length) {
    Rng rng = make_rng(seed, {kVariableLength});
    s = variable_length(s, rng);
    record(Stage::variable_length);
  }
  Tensor frames;
  if (config.random_crop) {
    Rng rng = make_rng(seed, {kCrop});
    frames = random_crop(s.frames, config.crop_height, config.crop_width, rng);
  } else {
    frames = center_crop(s.frames, config.crop_height, config.crop_width);
  }
  record(Stage::crop);
  if (config.flip) {
    Rng rng = make_rng(seed, {kFlip});
    frames = horizontal_flip(frames, config.flip_prob, rng);
    record(Stage::flip);
  }
  if (config.time_mask) {
    Rng rng = make_rng(seed, {kTimeMask});
    // A shortened clip cannot hold a span of nmax frames.
    const Index nmax = std::min(config.time_mask_nmax, frames.dim(0) - 1);
    frames = time_mask(frames, nmax, rng);
    record(Stage::time_mask);
  }
  return {frames, data::word_boundary_vector(s.start, s.end, frames.dim(0)), s.label};
}

Clip eval_clip(const VideoSample& sample, const AugmentConfig& config) {
  data::check_sample(sample);
  Tensor frames = center_crop(sample.frames, config.crop_height, config.crop_width);
  return {frames, data::word_boundary_vector(sample.start, sample.end, frames.dim(0)), sample.label};
}

double sample_mixup_lambda(const AugmentConfig& config, Rng& rng) {
  if (config.mixup_mode == MixupMode::fixed) return config.mixup_lambda;
  std::gamma_distribution<double> g(config.mixup_alpha, 1.0);
  const double x = g(rng), y = g(rng);
  // Both draws underflow to zero only for tiny alpha; split evenly then.
  return x + y > 0.0 ? x / (x + y) : 0.5;
}

Clip mix_clips(const Clip& a, const Clip& b, double lambda) {
  if (a.frames.dim(1) != b.frames.dim(1) || a.frames.dim(2) != b.frames.dim(2)) {
    throw InputError("mixup: frame sizes differ (" + shape_string(a.frames.shape()) + " vs " +
                     shape_string(b.frames.shape()) + ")");
  }
  // The partner carries no weight: no padding, no boundary union.
  if (lambda == 1.0) return {a.frames.clone(), a.boundary.clone(), a.label};
  const Index t_len = std::max(a.frames.dim(0), b.frames.dim(0));
  Clip out;
  out.label = a.label;
  out.frames = Tensor::zeros({t_len, a.frames.dim(1), a.frames.dim(2)});
  out.boundary = Tensor::zeros({1, t_len});
  auto& f = out.frames.value();
  f.head(a.frames.numel()) += lambda * a.frames.value();
  f.head(b.frames.numel()) += (1.0 - lambda) * b.frames.value();
  auto& v = out.boundary.value();
  v.head(a.boundary.numel()) = a.boundary.value();
  v.head(b.boundary.numel()) = v.head(b.boundary.numel()).cwiseMax(b.boundary.value());
  return out;
}

MixedBatch mixup(const std::vector<Clip>& a, const std::vector<Clip>& b, double lambda) {
  if (a.size() != b.size()) {
    throw InputError("mixup: batch sizes differ (" + std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  }
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw InputError("mixup: lambda must lie in [0, 1]");
  MixedBatch out;
  out.lambda = lambda;
  for (std::size_t i = 0; i < a.size(); ++i) {
    out.clips.push_back(mix_clips(a[i], b[i], lambda));
    out.targets_a.push_back(a[i].label);
    out.targets_b.push_back(b[i].label);
  }
  return out;
}

MixedBatch mixup_batch(const std::vector<Clip>& clips, const AugmentConfig& config, Rng& rng) {
  if (!config.mixup) {
    MixedBatch out = mixup(clips, clips, 1.0);
    out.partners.resize(clips.size());
    std::iota(out.partners.begin(), out.partners.end(), std::size_t{0});
    return out;
  }
  const double lambda = sample_mixup_lambda(config, rng);
  std::vector<std::size_t> order(clips.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<Clip> partners;
  partners.reserve(clips.size());
  for (std::size_t i : order) partners.push_back(clips[i]);
  MixedBatch out = mixup(clips, partners, lambda);
  out.partners = std::move(order);
  return out;
}

}  // namespace lipbench::augment
