#pragma once

#include <array>
#include <string>
#include <vector>

#include "lipbench/common/json_util.hpp"
#include "lipbench/data/video.hpp"

namespace lipbench::augment {

using data::VideoSample;

enum class MixupMode { beta, fixed };

struct AugmentConfig {
  Index crop_height = 16;
  Index crop_width = 16;
  bool random_crop = true;  // off: training uses the centre crop as well
  bool flip = true;
  double flip_prob = 0.5;
  bool mixup = true;
  MixupMode mixup_mode = MixupMode::beta;
  double mixup_alpha = 0.4;   // Beta(alpha, alpha)
  double mixup_lambda = 0.4;  // fixed mode
  bool time_mask = true;
  Index time_mask_nmax = 15;
  bool variable_length = true;
};

/// Throws ConfigError. `frames`, `height` and `width` are the dataset clip dimensions.
void validate(const AugmentConfig& c, Index frames, Index height, Index width);
Json to_json(const AugmentConfig& c);
AugmentConfig augment_config_from_json(const Json& j, const std::string& path = "augment");

enum class Stage { variable_length, crop, flip, time_mask, mixup };
/// The only order in which the pipeline applies its stages.
inline constexpr std::array<Stage, 5> kStageOrder{Stage::variable_length, Stage::crop, Stage::flip, Stage::time_mask,
                                                  Stage::mixup};
std::string to_string(Stage s);

// ---- single-clip transforms ------------------------------------------------

Tensor crop(const Tensor& video, Index top, Index left, Index height, Index width);
/// One offset per video, uniform over all (H-h+1)(W-w+1) positions.
Tensor random_crop(const Tensor& video, Index height, Index width, Rng& rng, Index* top = nullptr,
                   Index* left = nullptr);
/// Offset ((H-h)/2, (W-w)/2), floor division.
Tensor center_crop(const Tensor& video, Index height, Index width);

Tensor mirror(const Tensor& video);
/// One Bernoulli(p) draw per video; mirrors every frame when it succeeds.
Tensor horizontal_flip(const Tensor& video, double p, Rng& rng, bool* flipped = nullptr);

/// Per-pixel mean over all frames, summed in frame order.
std::vector<double> mean_frame(const Tensor& video);

struct TimeMaskDraw {
  Index length = 0;
  Index start = 0;
};
/// N ~ U{0..nmax}, start ~ U{0..T-N}. Throws ConfigError when nmax >= T.
TimeMaskDraw draw_time_mask(Index frames, Index nmax, Rng& rng);
Tensor apply_time_mask(const Tensor& video, const TimeMaskDraw& draw);
Tensor time_mask(const Tensor& video, Index nmax, Rng& rng, TimeMaskDraw* draw = nullptr);

/// Sub-clip [offset, offset + length) containing the whole word, chosen uniformly
/// among all such windows; the word span is re-based.
VideoSample variable_length(const VideoSample& sample, Rng& rng);

// ---- pipeline ----------------------------------------------------------------

struct Clip {
  Tensor frames;    // [T, h, w]
  Tensor boundary;  // [1, T]
  int label = 0;
};

/// variable_length -> crop -> flip -> time_mask, each stage drawing from its
/// own stream derived from `seed`, so toggling one stage leaves the others' draws intact.
Clip augment_clip(const VideoSample& sample, const AugmentConfig& config, std::uint64_t seed,
                  std::vector<Stage>* trace = nullptr);
/// Evaluation view: centre crop only.
Clip eval_clip(const VideoSample& sample, const AugmentConfig& config);

// ---- mixup -------------------------------------------------------------------

/// Beta(alpha, alpha) draw in beta mode, the fixed coefficient otherwise.
double sample_mixup_lambda(const AugmentConfig& config, Rng& rng);

/// lambda * a + (1 - lambda) * b. The shorter clip is zero-padded at the end;
/// boundaries combine as the elementwise maximum. lambda == 1 returns `a` unchanged.
Clip mix_clips(const Clip& a, const Clip& b, double lambda);

struct MixedBatch {
  std::vector<Clip> clips;
  std::vector<int> targets_a;
  std::vector<int> targets_b;
  std::vector<std::size_t> partners;  // index into the source batch of each clip's partner
  double lambda = 1.0;
};

/// Pairs clip i of `a` with clip i of `b`. Throws InputError on size or frame-shape mismatch.
MixedBatch mixup(const std::vector<Clip>& a, const std::vector<Clip>& b, double lambda);
/// Batch-level stage: partners are a shuffled permutation of the batch.
/// With mixup disabled the clips pass through with lambda = 1.
MixedBatch mixup_batch(const std::vector<Clip>& clips, const AugmentConfig& config, Rng& rng);

}  // namespace lipbench::augment
