#pragma once

#include <string>
#include <vector>

#include "lipbench/core/random.hpp"
#include "lipbench/core/tensor.hpp"

namespace lipbench::data {

/// One clip: frames [T, H, W] in [0, 1], a class label and the word span [start, end).
struct VideoSample {
  Tensor frames;
  int label = 0;
  Index start = 0;
  Index end = 0;

  Index length() const { return frames.dim(0); }
  Index height() const { return frames.dim(1); }
  Index width() const { return frames.dim(2); }
};

/// Throws InputError unless 0 <= start < end <= T and frames is [T, H, W].
void check_sample(const VideoSample& s);

/// v[t] = 1 for start <= t < end, else 0. Shape [1, T].
Tensor word_boundary_vector(Index start, Index end, Index length);

/// Left-right symmetric mouth trajectory of one class. Every quantity is a
/// function of normalised word time u in [0, 1].
struct MouthPattern {
  double open_base = 0.0;       // vertical semi-axis at rest, pixels
  double open_amp = 0.0;
  double open_freq = 1.0;       // cycles per word
  double open_phase = 0.0;
  double width_base = 0.0;      // horizontal semi-axis at rest
  double width_amp = 0.0;
  double width_freq = 1.0;
  double width_phase = 0.0;
  double tongue_amp = 0.0;      // brightness of the inner blob
  double tongue_freq = 1.0;
  double tongue_phase = 0.0;

  static MouthPattern neutral();
  /// Deterministic pattern of `label` for dataset seed `seed`.
  static MouthPattern for_class(std::uint64_t seed, int label);
};

/// Renders one frame [H, W] of `pattern` at word time u into `out` (row-major).
void render_frame(const MouthPattern& pattern, double u, Index height, Index width, double* out);

}  // namespace lipbench::data
