#include <map>
#include <set>

#include "doctest.h"
#include "lipbench/augment/augment.hpp"
#include "lipbench/core/ops.hpp"
#include "lipbench/data/dataset.hpp"
#include "support/convert.hpp"

using namespace lipbench;
using namespace lipbench::augment;
using lipbench::testing::random_tensor;

namespace {

bool same_values(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data().data(), b.data().data(), sizeof(double) * static_cast<std::size_t>(a.numel())) == 0;
}

Tensor random_video(Index t, Index h, Index w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return random_tensor({t, h, w}, rng);
}

VideoSample sample_with_span(Index t, Index start, Index end, std::uint64_t seed) {
  VideoSample s;
  s.frames = random_video(t, 4, 5, seed);
  s.start = start;
  s.end = end;
  s.label = 3;
  return s;
}

Clip random_clip(Index t, int label, std::uint64_t seed) {
  return {random_video(t, 3, 3, seed), data::word_boundary_vector(t / 3, t - 1, t), label};
}

}  // namespace

// ---- crop ----------------------------------------------------------------------

TEST_CASE("crop: full-size crops are identities") {
  const Tensor v = random_video(5, 6, 7, 1);
  Rng rng(3);
  CHECK(same_values(random_crop(v, 6, 7, rng), v));
  CHECK(same_values(center_crop(v, 6, 7), v));
}

TEST_CASE("crop: centre offsets use floor division") {
  Tensor v = Tensor::zeros({1, 20, 20});
  for (Index i = 0; i < 400; ++i) v.value()[i] = static_cast<double>(i);
  Tensor c = center_crop(v, 16, 16);
  CHECK(c.at({0, 0, 0}) == v.at({0, 2, 2}));
  Tensor odd = Tensor::zeros({1, 19, 20});
  for (Index i = 0; i < 380; ++i) odd.value()[i] = static_cast<double>(i);
  CHECK(center_crop(odd, 16, 16).at({0, 0, 0}) == odd.at({0, 1, 2}));
}

TEST_CASE("crop: one offset for all frames, content copied verbatim") {
  const Tensor v = random_video(6, 20, 20, 2);
  Rng rng(9);
  Index top = -1, left = -1;
  const Tensor c = random_crop(v, 16, 16, rng, &top, &left);
  REQUIRE(c.shape() == Shape{6, 16, 16});
  for (Index t = 0; t < 6; ++t)
    for (Index y = 0; y < 16; ++y)
      for (Index x = 0; x < 16; ++x) REQUIRE(c.at({t, y, x}) == v.at({t, y + top, x + left}));
}

TEST_CASE("crop: 96 -> 88 leaves 81 distinct offsets") {
  const Tensor v = Tensor::zeros({1, 96, 96});
  std::set<std::pair<Index, Index>> offsets;
  Rng rng(4);
  for (int i = 0; i < 3000; ++i) {
    Index top = 0, left = 0;
    random_crop(v, 88, 88, rng, &top, &left);
    CHECK(top <= 8);
    CHECK(left <= 8);
    offsets.emplace(top, left);
  }
  CHECK(offsets.size() == 81);
}

TEST_CASE("crop: desk-scale offsets replay the seeded rng") {
  const Tensor v = random_video(2, 20, 20, 5);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed), replay(seed);
    Index top = 0, left = 0;
    random_crop(v, 16, 16, rng, &top, &left);
    CHECK(top == std::uniform_int_distribution<Index>(0, 4)(replay));
    CHECK(left == std::uniform_int_distribution<Index>(0, 4)(replay));
  }
}

TEST_CASE("crop: oversized crops are input errors") {
  const Tensor v = random_video(2, 10, 10, 1);
  Rng rng(1);
  CHECK_THROWS_AS(random_crop(v, 11, 10, rng), InputError);
  CHECK_THROWS_AS(center_crop(v, 10, 12), InputError);
}

// ---- flip ------------------------------------------------------------------------

TEST_CASE("flip: p = 0 is the identity, p = 1 is an involution") {
  const Tensor v = random_video(4, 5, 6, 1);
  Rng rng(2);
  for (int i = 0; i < 20; ++i) CHECK(same_values(horizontal_flip(v, 0.0, rng), v));
  const Tensor once = horizontal_flip(v, 1.0, rng);
  CHECK_FALSE(same_values(once, v));
  CHECK(once.at({1, 2, 0}) == v.at({1, 2, 5}));
  CHECK(same_values(horizontal_flip(once, 1.0, rng), v));
}

TEST_CASE("flip: p = 0.5 over 10000 seeded videos flips about half") {
  const Tensor v = random_video(1, 2, 2, 1);
  int flips = 0;
  for (std::uint64_t seed = 0; seed < 10000; ++seed) {
    Rng rng = make_rng(seed, {7});
    bool flipped = false;
    horizontal_flip(v, 0.5, rng, &flipped);
    flips += flipped ? 1 : 0;
  }
  const double fraction = flips / 10000.0;
  CHECK(fraction >= 0.48);
  CHECK(fraction <= 0.52);
}

// ---- mixup -------------------------------------------------------------------------

TEST_CASE("mixup: lambda = 1 returns batch a exactly") {
  std::vector<Clip> a{random_clip(9, 1, 1), random_clip(5, 2, 2)};
  std::vector<Clip> b{random_clip(12, 3, 3), random_clip(5, 4, 4)};
  const MixedBatch m = mixup(a, b, 1.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(same_values(m.clips[i].frames, a[i].frames));
    CHECK(same_values(m.clips[i].boundary, a[i].boundary));
  }
  CHECK(m.targets_a == std::vector<int>{1, 2});
  CHECK(m.targets_b == std::vector<int>{3, 4});
}

TEST_CASE("mixup: lambda = 0.5 cancels opposite inputs") {
  Clip a = random_clip(6, 0, 5);
  Clip b{scale(a.frames, -1.0), a.boundary, 1};
  const MixedBatch m = mixup({a}, {b}, 0.5);
  CHECK(m.clips[0].frames.value().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("mixup: convex combination, zero padding and boundary union") {
  Clip a = random_clip(4, 0, 1), b = random_clip(6, 1, 2);
  a.boundary = Tensor::from_values({1, 4}, {0, 1, 1, 0});
  b.boundary = Tensor::from_values({1, 6}, {0, 0, 1, 1, 1, 0});
  const Clip m = mix_clips(a, b, 0.3);
  REQUIRE(m.frames.shape() == Shape{6, 3, 3});
  for (Index t = 0; t < 6; ++t)
    for (Index p = 0; p < 9; ++p) {
      const double xa = t < 4 ? a.frames.value()[t * 9 + p] : 0.0;
      CHECK(m.frames.value()[t * 9 + p] == doctest::Approx(0.3 * xa + 0.7 * b.frames.value()[t * 9 + p]).epsilon(1e-14));
    }
  CHECK(m.boundary.value() == Tensor::from_values({1, 6}, {0, 1, 1, 1, 1, 0}).value());
  CHECK(m.label == 0);
}

TEST_CASE("mixup: mismatched batches and frame sizes are input errors") {
  CHECK_THROWS_AS(mixup({random_clip(4, 0, 1)}, {}, 0.5), InputError);
  Clip odd{random_video(4, 2, 3, 1), data::word_boundary_vector(0, 4, 4), 0};
  CHECK_THROWS_AS(mixup({random_clip(4, 0, 1)}, {odd}, 0.5), InputError);
}

TEST_CASE("mixup: Beta(0.4, 0.4) draws average to one half") {
  AugmentConfig c;
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 10000; ++seed) {
    Rng rng = make_rng(seed, {11});
    const double l = sample_mixup_lambda(c, rng);
    REQUIRE(l >= 0.0);
    REQUIRE(l <= 1.0);
    total += l;
  }
  CHECK(total / 10000.0 >= 0.47);
  CHECK(total / 10000.0 <= 0.53);
  c.mixup_mode = MixupMode::fixed;
  Rng rng(1);
  CHECK(sample_mixup_lambda(c, rng) == 0.4);
}

TEST_CASE("mixup_batch: partners form a permutation; disabled mixup passes through") {
  std::vector<Clip> clips;
  for (int i = 0; i < 8; ++i) clips.push_back(random_clip(5, i, static_cast<std::uint64_t>(i)));
  AugmentConfig c;
  Rng rng(3);
  const MixedBatch m = mixup_batch(clips, c, rng);
  CHECK(m.targets_a == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7});
  std::vector<int> sorted = m.targets_b;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == m.targets_a);
  c.mixup = false;
  const MixedBatch off = mixup_batch(clips, c, rng);
  CHECK(off.lambda == 1.0);
  for (std::size_t i = 0; i < clips.size(); ++i) CHECK(same_values(off.clips[i].frames, clips[i].frames));
}

// ---- time mask -------------------------------------------------------------------

TEST_CASE("time_mask: an empty span is the identity") {
  const Tensor v = random_video(10, 3, 3, 1);
  CHECK(same_values(apply_time_mask(v, {0, 4}), v));
}

TEST_CASE("time_mask: constant videos are fixed points for every N") {
  // A dyadic value keeps the frame sum exact, so the identity is bit-exact.
  const Tensor v = Tensor::full({29, 4, 4}, 0.375);
  for (Index n = 0; n <= 15; ++n)
    for (Index start = 0; start + n <= 29; start += 7) CHECK(same_values(apply_time_mask(v, {n, start}), v));
  // Otherwise the mean frame differs from the constant by summation rounding only.
  const Tensor w = Tensor::full({29, 4, 4}, 0.37);
  for (Index n = 0; n <= 15; ++n) {
    const Tensor m = apply_time_mask(w, {n, 29 - n});
    CHECK((m.value() - w.value()).cwiseAbs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("time_mask: T = 29, Nmax = 15 span equals the independent mean frame bit-exactly") {
  std::set<Index> lengths;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const Tensor v = random_video(29, 5, 4, seed);
    // Independent per-pixel mean over the original 29 frames.
    std::vector<double> mean(20, 0.0);
    for (Index p = 0; p < 20; ++p) {
      double acc = 0.0;
      for (Index t = 0; t < 29; ++t) acc += v.value()[t * 20 + p];
      mean[static_cast<std::size_t>(p)] = acc / 29.0;
    }
    Rng rng = make_rng(seed, {13});
    TimeMaskDraw d;
    const Tensor m = time_mask(v, 15, rng, &d);
    lengths.insert(d.length);
    REQUIRE(d.length <= 15);
    REQUIRE(d.start + d.length <= 29);
    for (Index t = 0; t < 29; ++t)
      for (Index p = 0; p < 20; ++p) {
        const double got = m.value()[t * 20 + p];
        const double want = (t >= d.start && t < d.start + d.length) ? mean[static_cast<std::size_t>(p)]
                                                                     : v.value()[t * 20 + p];
        REQUIRE(std::memcmp(&got, &want, sizeof(double)) == 0);
      }
  }
  CHECK(lengths.size() == 16);
}

TEST_CASE("time_mask: Nmax >= T is a configuration error") {
  Rng rng(1);
  CHECK_THROWS_AS(time_mask(random_video(5, 2, 2, 1), 5, rng), ConfigError);
  AugmentConfig c;
  c.time_mask_nmax = 29;
  CHECK_THROWS_AS(validate(c, 29, 20, 20), ConfigError);
}

// ---- variable length -------------------------------------------------------------

TEST_CASE("variable_length: a full-span word admits only the identity window") {
  const VideoSample s = sample_with_span(12, 0, 12, 1);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    const VideoSample out = variable_length(s, rng);
    CHECK(same_values(out.frames, s.frames));
    CHECK(out.start == 0);
    CHECK(out.end == 12);
  }
}

TEST_CASE("variable_length: every window over word [10, 19) of T = 29 is valid, and all appear") {
  const VideoSample s = sample_with_span(29, 10, 19, 2);
  std::set<std::pair<Index, Index>> valid;  // (offset, length) enumerated exhaustively
  for (Index offset = 0; offset <= 10; ++offset)
    for (Index stop = 19; stop <= 29; ++stop) valid.emplace(offset, stop - offset);
  std::map<std::pair<Index, Index>, int> seen;
  const Index plane = 20;
  for (std::uint64_t seed = 0; seed < 6000; ++seed) {
    Rng rng = make_rng(seed, {17});
    const VideoSample out = variable_length(s, rng);
    const Index offset = 10 - out.start;
    REQUIRE(out.start >= 0);
    REQUIRE(out.end <= out.length());
    REQUIRE(out.end - out.start == 9);
    REQUIRE(valid.count({offset, out.length()}) == 1);
    REQUIRE(out.frames.value().segment(out.start * plane, 9 * plane) == s.frames.value().segment(10 * plane, 9 * plane));
    REQUIRE(data::word_boundary_vector(out.start, out.end, out.length()).value().sum() == 9.0);
    REQUIRE(out.label == s.label);
    ++seen[{offset, out.length()}];
  }
  CHECK(seen.size() == valid.size());
  for (const auto& [window, n] : seen) CHECK(n > 20);  // 6000 / 121 ~ 50 expected
}

TEST_CASE("variable_length: a missing word span is an input error") {
  VideoSample s = sample_with_span(10, 0, 1, 1);
  s.start = 4;
  s.end = 4;
  Rng rng(1);
  CHECK_THROWS_AS(variable_length(s, rng), InputError);
}

// ---- pipeline --------------------------------------------------------------------

TEST_CASE("pipeline: stages run in the documented order") {
  CHECK(kStageOrder == std::array<Stage, 5>{Stage::variable_length, Stage::crop, Stage::flip, Stage::time_mask,
                                            Stage::mixup});
  data::DatasetSpec spec;
  const VideoSample s = data::generate_sample(spec, data::Split::train, 0);
  std::vector<Stage> trace;
  augment_clip(s, AugmentConfig{}, 5, &trace);
  CHECK(trace == std::vector<Stage>{Stage::variable_length, Stage::crop, Stage::flip, Stage::time_mask});
  AugmentConfig partial;
  partial.variable_length = false;
  partial.flip = false;
  trace.clear();
  augment_clip(s, partial, 5, &trace);
  CHECK(trace == std::vector<Stage>{Stage::crop, Stage::time_mask});
}

TEST_CASE("pipeline: seeded determinism, label and boundary validity") {
  data::DatasetSpec spec;
  for (int i = 0; i < 30; ++i) {
    const VideoSample s = data::generate_sample(spec, data::Split::train, i);
    const Clip a = augment_clip(s, AugmentConfig{}, 100 + static_cast<std::uint64_t>(i));
    const Clip b = augment_clip(s, AugmentConfig{}, 100 + static_cast<std::uint64_t>(i));
    CHECK(same_values(a.frames, b.frames));
    CHECK(same_values(a.boundary, b.boundary));
    CHECK(a.label == s.label);
    CHECK(a.frames.dim(1) == 16);
    CHECK(a.boundary.dim(1) == a.frames.dim(0));
    CHECK(a.boundary.value().sum() == static_cast<double>(s.end - s.start));
  }
}

TEST_CASE("pipeline: each stage draws from its own stream") {
  data::DatasetSpec spec;
  const VideoSample s = data::generate_sample(spec, data::Split::train, 4);
  AugmentConfig only_crop;
  only_crop.variable_length = only_crop.flip = only_crop.time_mask = false;
  AugmentConfig crop_and_mask = only_crop;
  crop_and_mask.time_mask = true;
  crop_and_mask.time_mask_nmax = 0;  // masks nothing but still consumes its stream
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    CHECK(same_values(augment_clip(s, only_crop, seed).frames, augment_clip(s, crop_and_mask, seed).frames));
  }
}

TEST_CASE("pipeline: degenerate parameters make augmentation the evaluation view") {
  data::DatasetSpec spec;
  const VideoSample s = data::generate_sample(spec, data::Split::test, 2);
  AugmentConfig c;
  c.crop_height = c.crop_width = 20;
  c.flip_prob = 0.0;
  c.time_mask_nmax = 0;
  c.variable_length = false;
  const Clip a = augment_clip(s, c, 1), e = eval_clip(s, c);
  CHECK(same_values(a.frames, s.frames));
  CHECK(same_values(e.frames, s.frames));
  CHECK(same_values(a.boundary, e.boundary));
}

TEST_CASE("augment config: JSON round trip and strict keys") {
  AugmentConfig c;
  c.mixup_mode = MixupMode::fixed;
  c.time_mask_nmax = 7;
  CHECK(to_json(augment_config_from_json(to_json(c))) == to_json(c));
  CHECK_THROWS_AS(augment_config_from_json(Json{{"timemask", false}}), ConfigError);
  CHECK_THROWS_AS(augment_config_from_json(Json{{"mixup_mode", "uniform"}}), ConfigError);
  AugmentConfig big;
  big.crop_height = 21;
  CHECK_THROWS_AS(validate(big, 29, 20, 20), ConfigError);
}
