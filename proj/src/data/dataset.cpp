#include "lipbench/data/dataset.hpp"

#include <algorithm>
#include <limits>

#include "lipbench/common/binary_io.hpp"
#include "lipbench/common/container.hpp"

namespace lipbench::data {

void validate(const DatasetSpec& s) {
  if (s.num_classes < 2) throw ConfigError("dataset: num_classes must be >= 2");
  if (s.train_per_class < 0 || s.val_per_class < 0 || s.test_per_class < 0) {
    throw ConfigError("dataset: per-class sample counts must be >= 0");
  }
  if (s.frames < 1 || s.height < 1 || s.width < 1) throw ConfigError("dataset: frames, height and width must be >= 1");
  if (s.word_length_min < 1 || s.word_length_min > s.word_length_max) {
    throw ConfigError("dataset: need 1 <= word_length_min <= word_length_max");
  }
  if (s.word_length_max > s.frames) {
    throw ConfigError("dataset: word_length_max (" + std::to_string(s.word_length_max) + ") exceeds the clip length (" +
                      std::to_string(s.frames) + ")");
  }
  if (s.center_jitter < 0) throw ConfigError("dataset: center_jitter must be >= 0");
  if (!(s.distractor_intensity >= 0.0 && s.distractor_intensity <= 1.0)) {
    throw ConfigError("dataset: distractor_intensity must lie in [0, 1]");
  }
  if (!(s.noise >= 0.0)) throw ConfigError("dataset: noise must be >= 0");
}

Json to_json(const DatasetSpec& s) {
  return {{"num_classes", s.num_classes},
          {"train_per_class", s.train_per_class},
          {"val_per_class", s.val_per_class},
          {"test_per_class", s.test_per_class},
          {"frames", s.frames},
          {"height", s.height},
          {"width", s.width},
          {"word_length_min", s.word_length_min},
          {"word_length_max", s.word_length_max},
          {"center_jitter", s.center_jitter},
          {"distractor_intensity", s.distractor_intensity},
          {"noise", s.noise},
          {"seed", s.seed}};
}

DatasetSpec dataset_spec_from_json(const Json& j, const std::string& path) {
  DatasetSpec s;
  StrictObject o(j, path);
  int version = 1;
  o.optional("version", version);
  if (version != 1) throw ConfigError("dataset spec: unsupported version " + std::to_string(version));
  o.optional("num_classes", s.num_classes);
  o.optional("train_per_class", s.train_per_class);
  o.optional("val_per_class", s.val_per_class);
  o.optional("test_per_class", s.test_per_class);
  o.optional("frames", s.frames);
  o.optional("height", s.height);
  o.optional("width", s.width);
  o.optional("word_length_min", s.word_length_min);
  o.optional("word_length_max", s.word_length_max);
  o.optional("center_jitter", s.center_jitter);
  o.optional("distractor_intensity", s.distractor_intensity);
  o.optional("noise", s.noise);
  o.optional("seed", s.seed);
  o.finish();
  validate(s);
  return s;
}

const SampleSet& Dataset::split(Split s) const {
  switch (s) {
    case Split::train: return train;
    case Split::val: return val;
    case Split::test: return test;
  }
  return test;
}

namespace {

int per_class(const DatasetSpec& spec, Split split) {
  switch (split) {
    case Split::train: return spec.train_per_class;
    case Split::val: return spec.val_per_class;
    case Split::test: return spec.test_per_class;
  }
  return 0;
}

int other_class(int label, int num_classes, Rng& rng) {
  const int draw = std::uniform_int_distribution<int>(0, num_classes - 2)(rng);
  return draw >= label ? draw + 1 : draw;
}

void blend(double* dst, const double* src, double weight, Index n) {
  for (Index i = 0; i < n; ++i) dst[i] = (1.0 - weight) * dst[i] + weight * src[i];
}

}  // namespace

VideoSample generate_sample(const DatasetSpec& spec, Split split, int index) {
  Rng rng = make_rng(spec.seed, {static_cast<std::uint64_t>(split), static_cast<std::uint64_t>(index)});
  const Index t_len = spec.frames, h = spec.height, w = spec.width, plane = h * w;
  VideoSample s;
  s.label = index % spec.num_classes;
  const Index word = std::uniform_int_distribution<Index>(spec.word_length_min, spec.word_length_max)(rng);
  const Index jitter = std::uniform_int_distribution<Index>(-spec.center_jitter, spec.center_jitter)(rng);
  s.start = std::clamp<Index>((t_len - word) / 2 + jitter, 0, t_len - word);
  s.end = s.start + word;
  s.frames = Tensor::zeros({t_len, h, w});
  double* f = s.frames.value().data();

  const MouthPattern pattern = MouthPattern::for_class(spec.seed, s.label);
  const MouthPattern neutral = MouthPattern::neutral();
  for (Index t = 0; t < t_len; ++t) {
    if (t >= s.start && t < s.end) {
      render_frame(pattern, (static_cast<double>(t - s.start) + 0.5) / static_cast<double>(word), h, w, f + t * plane);
    } else {
      render_frame(neutral, 0.0, h, w, f + t * plane);
    }
  }

  // Draws happen even when distractors are off so the noise stream below is unaffected.
  const int before_class = other_class(s.label, spec.num_classes, rng);
  const int after_class = other_class(s.label, spec.num_classes, rng);
  const Index before_len = std::uniform_int_distribution<Index>(spec.word_length_min, spec.word_length_max)(rng);
  const Index after_len = std::uniform_int_distribution<Index>(spec.word_length_min, spec.word_length_max)(rng);
  if (spec.distractor_intensity > 0.0) {
    std::vector<double> frame(static_cast<std::size_t>(plane));
    const MouthPattern before = MouthPattern::for_class(spec.seed, before_class);
    const MouthPattern after = MouthPattern::for_class(spec.seed, after_class);
    // Tail of one word before the target, head of another after it.
    for (Index t = std::max<Index>(0, s.start - before_len); t < s.start; ++t) {
      const double u = (static_cast<double>(before_len - (s.start - t)) + 0.5) / static_cast<double>(before_len);
      render_frame(before, u, h, w, frame.data());
      blend(f + t * plane, frame.data(), spec.distractor_intensity, plane);
    }
    for (Index t = s.end; t < std::min(t_len, s.end + after_len); ++t) {
      const double u = (static_cast<double>(t - s.end) + 0.5) / static_cast<double>(after_len);
      render_frame(after, u, h, w, frame.data());
      blend(f + t * plane, frame.data(), spec.distractor_intensity, plane);
    }
  }

  if (spec.noise > 0.0) {
    Rng noise_rng = make_rng(spec.seed, {static_cast<std::uint64_t>(split), static_cast<std::uint64_t>(index),
                                         0x6e6f697365ULL});
    std::normal_distribution<double> n(0.0, 1.0);
    for (double& v : s.frames.data()) v = std::clamp(v + spec.noise * n(noise_rng), 0.0, 1.0);
  }
  return s;
}

SampleSet generate_split(const DatasetSpec& spec, Split split) {
  validate(spec);
  SampleSet set;
  set.name = kSplitNames[static_cast<std::size_t>(split)];
  const int count = per_class(spec, split) * spec.num_classes;
  set.samples.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) set.samples.push_back(generate_sample(spec, split, i));
  return set;
}

Dataset generate_dataset(const DatasetSpec& spec) {
  return {spec, generate_split(spec, Split::train), generate_split(spec, Split::val),
          generate_split(spec, Split::test)};
}

void save_dataset(const Dataset& d, const std::string& path) {
  Json header;
  header["spec"] = to_json(d.spec);
  Json splits = Json::array();
  binary::Writer w;
  for (const SampleSet* set : {&d.train, &d.val, &d.test}) {
    splits.push_back({{"name", set->name},
                      {"K", d.spec.num_classes},
                      {"T", d.spec.frames},
                      {"H", d.spec.height},
                      {"W", d.spec.width},
                      {"count", set->samples.size()}});
    for (const auto& s : set->samples) {
      w.put_i32(s.label);
      w.put_i32(static_cast<std::int32_t>(s.start));
      w.put_i32(static_cast<std::int32_t>(s.end));
      w.put_i32(static_cast<std::int32_t>(s.length()));
      w.put_f64s(s.frames.data());
    }
  }
  header["splits"] = std::move(splits);
  write_container(path, kDatasetMagic, kDatasetVersion, std::move(header), w.bytes());
}

Dataset load_dataset(const std::string& path) {
  Container c = read_container(path, kDatasetMagic, kDatasetVersion);
  Dataset d;
  try {
    d.spec = dataset_spec_from_json(c.header.at("spec"), "spec");
    const Json& splits = c.header.at("splits");
    if (!splits.is_array() || splits.size() != 3) throw DataError(path + ": expected three splits");
    binary::Reader r(c.payload, 0, path);
    SampleSet* targets[] = {&d.train, &d.val, &d.test};
    for (std::size_t i = 0; i < 3; ++i) {
      const Json& info = splits[i];
      SampleSet& set = *targets[i];
      set.name = info.at("name").get<std::string>();
      if (set.name != kSplitNames[i]) throw DataError(path + ": split " + std::to_string(i) + " is '" + set.name + "'");
      const Index h = info.at("H").get<Index>(), w = info.at("W").get<Index>();
      const auto count = info.at("count").get<std::size_t>();
      for (std::size_t k = 0; k < count; ++k) {
        VideoSample s;
        s.label = r.get_i32();
        s.start = r.get_i32();
        s.end = r.get_i32();
        const Index t = r.get_i32();
        if (t < 1 || s.label < 0 || s.label >= d.spec.num_classes) {
          throw DataError(path + ": corrupt sample " + std::to_string(k) + " in split '" + set.name + "'");
        }
        s.frames = Tensor::zeros({t, h, w});
        r.get_f64s(s.frames.data());
        check_sample(s);
        set.samples.push_back(std::move(s));
      }
    }
    if (!r.at_end()) throw DataError(path + ": trailing payload bytes");
  } catch (const Json::exception& e) {
    throw DataError(path + ": malformed dataset header (" + e.what() + ")");
  } catch (const ConfigError& e) {
    throw DataError(path + ": invalid embedded spec (" + e.what() + ")");
  } catch (const InputError& e) {
    throw DataError(path + ": " + e.what());
  }
  return d;
}

SampleSet corrupt_split(const SampleSet& set, double extra_noise, Index occlusion_max, std::uint64_t seed) {
  SampleSet out;
  out.name = set.name + "_corrupt";
  std::normal_distribution<double> n(0.0, 1.0);
  for (std::size_t i = 0; i < set.samples.size(); ++i) {
    const VideoSample& src = set.samples[i];
    Rng rng = make_rng(seed, {0x636f7272ULL, i});
    VideoSample s = src;
    s.frames = src.frames.clone();
    const Index t_len = s.length(), plane = s.height() * s.width();
    auto m = MatrixMap(s.frames.value().data(), t_len, plane);
    const Eigen::RowVectorXd mean_frame = m.colwise().mean();
    const Index span = std::uniform_int_distribution<Index>(0, std::min(occlusion_max, t_len - 1))(rng);
    const Index begin = std::uniform_int_distribution<Index>(0, t_len - span)(rng);
    for (Index t = begin; t < begin + span; ++t) m.row(t) = mean_frame;
    for (double& v : s.frames.data()) v = std::clamp(v + extra_noise * n(rng), 0.0, 1.0);
    out.samples.push_back(std::move(s));
  }
  return out;
}

double template_probe_accuracy(const DatasetSpec& spec, const SampleSet& set) {
  if (set.samples.empty()) throw InputError("template probe: empty sample set");
  std::vector<MouthPattern> patterns;
  for (int k = 0; k < spec.num_classes; ++k) patterns.push_back(MouthPattern::for_class(spec.seed, k));
  std::size_t correct = 0;
  for (const auto& s : set.samples) {
    const Index plane = s.height() * s.width(), word = s.end - s.start;
    std::vector<double> frame(static_cast<std::size_t>(plane));
    int best = 0;
    double best_distance = std::numeric_limits<double>::infinity();
    for (int k = 0; k < spec.num_classes; ++k) {
      double distance = 0.0;
      for (Index t = s.start; t < s.end; ++t) {
        render_frame(patterns[static_cast<std::size_t>(k)], (static_cast<double>(t - s.start) + 0.5) / static_cast<double>(word),
                     s.height(), s.width(), frame.data());
        const double* x = s.frames.value().data() + t * plane;
        for (Index p = 0; p < plane; ++p) distance += (x[p] - frame[static_cast<std::size_t>(p)]) * (x[p] - frame[static_cast<std::size_t>(p)]);
      }
      if (distance < best_distance) {
        best_distance = distance;
        best = k;
      }
    }
    correct += best == s.label ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(set.samples.size());
}

}  // namespace lipbench::data
