#pragma once

#include <array>
#include <string>
#include <vector>

#include "lipbench/common/json_util.hpp"
#include "lipbench/data/video.hpp"

namespace lipbench::data {

struct DatasetSpec {
  int num_classes = 20;
  int train_per_class = 50;
  int val_per_class = 10;
  int test_per_class = 10;
  Index frames = 29;
  Index height = 20;
  Index width = 20;
  Index word_length_min = 11;
  Index word_length_max = 17;
  Index center_jitter = 2;
  /// 0 disables distractors; 1 renders other classes' patterns at full strength outside the word.
  double distractor_intensity = 1.0;
  double noise = 0.08;  // std of additive Gaussian pixel noise
  std::uint64_t seed = 1;
};

void validate(const DatasetSpec& s);
Json to_json(const DatasetSpec& s);
DatasetSpec dataset_spec_from_json(const Json& j, const std::string& path = "dataset");

enum class Split { train = 0, val = 1, test = 2 };
inline constexpr std::array<const char*, 3> kSplitNames{"train", "val", "test"};

struct SampleSet {
  std::string name;
  std::vector<VideoSample> samples;
};

struct Dataset {
  DatasetSpec spec;
  SampleSet train;
  SampleSet val;
  SampleSet test;

  const SampleSet& split(Split s) const;
};

/// Sample `index` of `split`; independent of every other sample.
VideoSample generate_sample(const DatasetSpec& spec, Split split, int index);
SampleSet generate_split(const DatasetSpec& spec, Split split);
Dataset generate_dataset(const DatasetSpec& spec);

inline constexpr const char* kDatasetMagic = "lipbench-dataset";
inline constexpr int kDatasetVersion = 1;

void save_dataset(const Dataset& d, const std::string& path);
/// Throws DataError naming the failure on any malformed or mismatched file.
Dataset load_dataset(const std::string& path);

/// Copy of `set` with extra Gaussian noise and one occluded span per clip
/// (frames replaced by mid-grey), drawn from `seed`.
SampleSet corrupt_split(const SampleSet& set, double extra_noise, Index occlusion_max, std::uint64_t seed);

/// Accuracy of a nearest-template matcher that knows each clip's word span
/// and compares it against noiseless renderings of every class.
double template_probe_accuracy(const DatasetSpec& spec, const SampleSet& set);

}  // namespace lipbench::data
