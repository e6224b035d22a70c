#include "lipbench/data/video.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "lipbench/core/errors.hpp"

namespace lipbench::data {

void check_sample(const VideoSample& s) {
  if (!s.frames.defined() || s.frames.rank() != 3) throw InputError("sample frames must be [T, H, W]");
  if (!(0 <= s.start && s.start < s.end && s.end <= s.length())) {
    throw InputError("word span [" + std::to_string(s.start) + ", " + std::to_string(s.end) +
                     ") invalid for " + std::to_string(s.length()) + " frames");
  }
}

Tensor word_boundary_vector(Index start, Index end, Index length) {
  if (!(0 <= start && start < end && end <= length)) {
    throw InputError("word_boundary_vector: need 0 <= start < end <= T, got (" + std::to_string(start) + ", " +
                     std::to_string(end) + ", " + std::to_string(length) + ")");
  }
  Tensor v = Tensor::zeros({1, length});
  v.value().segment(start, end - start).setOnes();
  return v;
}

MouthPattern MouthPattern::neutral() {
  MouthPattern p;
  p.open_base = 0.6;
  p.width_base = 5.0;
  return p;
}

MouthPattern MouthPattern::for_class(std::uint64_t seed, int label) {
  Rng rng = make_rng(seed, {0x636c617373ULL, static_cast<std::uint64_t>(label)});
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * u01(rng); };
  constexpr double freqs[] = {0.5, 1.0, 1.5, 2.0, 2.5};
  auto freq = [&] { return freqs[std::uniform_int_distribution<int>(0, 4)(rng)]; };
  const double two_pi = 2.0 * std::numbers::pi;
  MouthPattern p;
  p.open_base = uniform(1.2, 2.4);
  p.open_amp = uniform(1.0, 2.4);
  p.open_freq = freq();
  p.open_phase = uniform(0.0, two_pi);
  p.width_base = uniform(4.0, 5.5);
  p.width_amp = uniform(0.5, 1.8);
  p.width_freq = freq();
  p.width_phase = uniform(0.0, two_pi);
  p.tongue_amp = uniform(0.0, 0.5);
  p.tongue_freq = freq();
  p.tongue_phase = uniform(0.0, two_pi);
  return p;
}

void render_frame(const MouthPattern& p, double u, Index height, Index width, double* out) {
  const double two_pi = 2.0 * std::numbers::pi;
  const double open = std::max(0.3, p.open_base + p.open_amp * std::sin(two_pi * p.open_freq * u + p.open_phase));
  const double half_width =
      std::max(1.0, p.width_base + p.width_amp * std::sin(two_pi * p.width_freq * u + p.width_phase));
  const double tongue = std::max(0.0, p.tongue_amp * std::sin(two_pi * p.tongue_freq * u + p.tongue_phase));
  const double cx = 0.5 * static_cast<double>(width - 1);
  const double cy = 0.5 * static_cast<double>(height - 1) + 1.0;
  for (Index y = 0; y < height; ++y) {
    const double dy = static_cast<double>(y) - cy;
    // Skin shading depends on y only, so every frame is mirror-symmetric.
    const double skin = 0.55 + 0.1 * dy / static_cast<double>(height);
    for (Index x = 0; x < width; ++x) {
      const double dx = static_cast<double>(x) - cx;
      const double r = std::sqrt((dx / half_width) * (dx / half_width) + (dy / open) * (dy / open));
      const double inside = 1.0 / (1.0 + std::exp(6.0 * (r - 1.0)));
      const double ty = dy - 0.4 * open;
      const double blob = tongue * std::exp(-(dx * dx + ty * ty) / (0.5 * half_width * half_width));
      out[y * width + x] = std::clamp(skin * (1.0 - inside) + (0.12 + blob) * inside, 0.0, 1.0);
    }
  }
}

}  // namespace lipbench::data
