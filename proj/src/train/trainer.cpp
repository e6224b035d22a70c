#include "lipbench/train/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "lipbench/core/optim.hpp"

namespace lipbench::train {

namespace {

// Stream tags for (seed, tag, epoch, index) derivation.
constexpr std::uint64_t kShuffleStream = 0x73687566;
constexpr std::uint64_t kAugmentStream = 0x61756720;
constexpr std::uint64_t kMixupStream = 0x6d697875;
constexpr std::uint64_t kDropoutStream = 0x64726f70;

using Clock = std::chrono::steady_clock;

void check_teacher(const models::ModelSpec& student, const models::ModelSpec& teacher) {
  if (student.architecture != teacher.architecture) {
    throw ConfigError("teacher architecture " + models::to_string(teacher.architecture) + " differs from student " +
                      models::to_string(student.architecture));
  }
  if (student.num_classes != teacher.num_classes) {
    throw ConfigError("teacher has " + std::to_string(teacher.num_classes) + " classes, student " +
                      std::to_string(student.num_classes));
  }
  if (student.encoder.frame_height != teacher.encoder.frame_height ||
      student.encoder.frame_width != teacher.encoder.frame_width) {
    throw ConfigError("teacher and student expect different frame sizes");
  }
}

MatrixRM softmax_rows(const MatrixRM& logits) {
  MatrixRM p(logits.rows(), logits.cols());
  for (Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    p.row(i) = (logits.row(i).array() - m).exp();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

MatrixRM teacher_logits(models::Model& teacher, const models::ModelInput& input) {
  NoGradGuard guard;
  const Tensor z = teacher.forward(input, models::ForwardContext{Mode::eval, nullptr});
  return z.matrix();
}

RunReport start_report(const TrainConfig& config, const models::Model& model, int generation) {
  RunReport r;
  r.name = config.name;
  r.kind = generation == 0 ? "train" : "distill";
  r.architecture = models::to_string(config.model.architecture);
  r.boundary_indicator = config.model.boundary_indicator;
  r.config_hash = config_hash(config);
  r.seed = config.seed;
  r.generation = generation;
  r.parameter_count = model.parameter_count();
  return r;
}

void finish_report(RunReport& r, const EvalResult& test, Clock::time_point start) {
  r.test_top1 = test.top1;
  r.per_class_accuracy = test.per_class_accuracy;
  r.per_class_count = test.per_class_count;
  r.confusion = test.confusion;
  r.wall_clock_seconds = std::chrono::duration<double>(Clock::now() - start).count();
}

TrainResult run(const TrainConfig& config, models::Model* teacher, const data::Dataset& data,
                const TrainOptions& options) {
  validate(config);
  if (data.train.samples.empty() || data.val.samples.empty() || data.test.samples.empty()) {
    throw InputError("training needs non-empty train, val and test splits");
  }
  if (teacher) check_teacher(config.model, teacher->spec());
  if (options.init_from_teacher && !teacher) throw ConfigError("init_from_teacher requires a teacher");

  const auto start = Clock::now();
  models::Model model = options.init_from_teacher ? models::Model(config.model, teacher->store())
                                                  : models::Model(config.model, config.seed);
  RunReport report = start_report(config, model, options.generation);

  const Index epochs = config.effective_epochs();
  const Index batch = config.effective_batch_size();
  const auto& train_set = data.train.samples;
  const Index n = static_cast<Index>(train_set.size());
  const Index steps_per_epoch = (n + batch - 1) / batch;
  const long total_steps = static_cast<long>(epochs * steps_per_epoch);

  AdamW optimizer(model.parameters(), AdamWOptions{config.lr, config.beta1, config.beta2, config.eps,
                                                   config.weight_decay});
  std::optional<models::ParameterStore> best;
  double best_val = -1.0;
  long step = 0;

  for (Index epoch = 1; epoch <= epochs; ++epoch) {
    std::vector<std::size_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng = make_rng(config.seed, {kShuffleStream, static_cast<std::uint64_t>(epoch)});
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    EpochRecord record;
    record.epoch = epoch;
    double lr = config.lr;
    for (Index b = 0; b < steps_per_epoch; ++b, ++step) {
      const Index first = b * batch;
      const Index count = std::min(batch, n - first);
      std::vector<augment::Clip> clips;
      clips.reserve(static_cast<std::size_t>(count));
      for (Index i = first; i < first + count; ++i) {
        const std::size_t idx = order[static_cast<std::size_t>(i)];
        clips.push_back(augment::augment_clip(
            train_set[idx], config.augment,
            derive_seed(config.seed, {kAugmentStream, static_cast<std::uint64_t>(epoch), idx})));
      }
      Rng mix_rng = make_rng(config.seed, {kMixupStream, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(b)});
      const augment::MixedBatch mixed = augment::mixup_batch(clips, config.augment, mix_rng);
      const models::ModelInput input = pack_clips(mixed.clips);

      Rng drop_rng =
          make_rng(config.seed, {kDropoutStream, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(b)});
      const Tensor logits = model.forward(input, models::ForwardContext{Mode::train, &drop_rng});

      Tensor ce = cross_entropy(logits, mixed.targets_a);
      if (mixed.lambda != 1.0) {
        ce = add(scale(ce, mixed.lambda), scale(cross_entropy(logits, mixed.targets_b), 1.0 - mixed.lambda));
      }

      Tensor loss = ce;
      double kd_value = 0.0;
      if (teacher) {
        auto kd_term = [&](const Tensor& student) {
          if (!config.teacher_clean_input) {
            const MatrixRM z = teacher_logits(*teacher, input);
            return kl_divergence(student, Tensor::from_values({z.rows(), z.cols()},
                                                              std::vector<double>(z.data(), z.data() + z.size())),
                                 config.distill_temperature, config.distill_direction);
          }
          const MatrixRM za = teacher_logits(*teacher, pack_clips(clips));
          MatrixRM target = softmax_rows(za / config.distill_temperature);
          if (mixed.lambda != 1.0) {
            MatrixRM pb(target.rows(), target.cols());
            for (Index i = 0; i < pb.rows(); ++i) pb.row(i) = target.row(static_cast<Index>(mixed.partners[static_cast<std::size_t>(i)]));
            target = mixed.lambda * target + (1.0 - mixed.lambda) * pb;
          }
          return kl_divergence_to(student, target, config.distill_temperature);
        };
        if (config.distill_alpha == 0.0) {
          NoGradGuard guard;
          kd_value = kd_term(logits.detach()).item();
        } else {
          const Tensor kd = kd_term(logits);
          kd_value = kd.item();
          loss = add(ce, scale(kd, config.distill_alpha));
        }
      }

      const double loss_value = loss.item();
      if (!std::isfinite(loss_value)) {
        report.status = "diverged";
        report.diagnostic = "non-finite loss at epoch " + std::to_string(epoch) + ", step " + std::to_string(step);
        report.wall_clock_seconds = std::chrono::duration<double>(Clock::now() - start).count();
        throw DivergenceError(report.diagnostic, report);
      }
      lr = cosine_lr(step, total_steps, config.lr);
      if (options.step_trace) options.step_trace->push_back({loss_value, ce.item(), kd_value, mixed.lambda, lr});

      backward(loss);
      optimizer.step(lr);
      optimizer.zero_grad();

      record.train_loss += loss_value * static_cast<double>(count);
      record.train_ce += ce.item() * static_cast<double>(count);
      record.train_kd += kd_value * static_cast<double>(count);
    }
    record.train_loss /= static_cast<double>(n);
    record.train_ce /= static_cast<double>(n);
    record.train_kd /= static_cast<double>(n);
    record.lr_end = lr;
    record.val_accuracy = evaluate(model, data.val, config.augment, config.eval_batch_size).top1;
    report.epochs.push_back(record);
    if (record.val_accuracy > best_val) {
      best_val = record.val_accuracy;
      best = model.store().clone();
      report.best_epoch = epoch;
      report.best_val_accuracy = best_val;
    }
    if (options.on_epoch) options.on_epoch(record);
  }

  if (best) {
    model = models::Model(config.model, *best);
  } else {
    report.best_val_accuracy = evaluate(model, data.val, config.augment, config.eval_batch_size).top1;
  }
  finish_report(report, evaluate(model, data.test, config.augment, config.eval_batch_size), start);
  return {std::move(model), std::move(report)};
}

}  // namespace

models::ModelInput pack_clips(const std::vector<augment::Clip>& clips) {
  if (clips.empty()) throw InputError("pack_clips: empty batch");
  const Index h = clips.front().frames.dim(1), w = clips.front().frames.dim(2);
  std::vector<Index> lengths;
  Index total = 0;
  for (const auto& c : clips) {
    if (c.frames.dim(1) != h || c.frames.dim(2) != w) throw InputError("pack_clips: frame sizes differ");
    lengths.push_back(c.frames.dim(0));
    total += c.frames.dim(0);
  }
  Eigen::VectorXd frames(total * h * w), boundary(total);
  Index at = 0;
  for (const auto& c : clips) {
    const Index t = c.frames.dim(0);
    frames.segment(at * h * w, t * h * w) = c.frames.value();
    boundary.segment(at, t) = c.boundary.value();
    at += t;
  }
  return {Tensor::from_vector({total, h, w}, std::move(frames)), Tensor::from_vector({1, total}, std::move(boundary)),
          SequenceLayout(std::move(lengths))};
}

TrainResult train(const TrainConfig& config, const data::Dataset& data, const TrainOptions& options) {
  TrainOptions plain = options;
  plain.init_from_teacher = false;
  return run(config, nullptr, data, plain);
}

TrainResult distill_train(const TrainConfig& config, models::Model& teacher, const data::Dataset& data,
                          const TrainOptions& options) {
  TrainOptions o = options;
  if (o.generation == 0) o.generation = 1;
  return run(config, &teacher, data, o);
}

std::vector<TrainResult> self_distill_chain(const TrainConfig& config, int generations, const data::Dataset& data,
                                            const std::function<void(int, const EpochRecord&)>& on_epoch) {
  if (generations < 1) throw ConfigError("self_distill_chain: generations must be >= 1");
  auto callback = [&](int g) {
    TrainOptions o;
    o.generation = g;
    if (on_epoch) o.on_epoch = [&on_epoch, g](const EpochRecord& r) { on_epoch(g, r); };
    return o;
  };
  std::vector<TrainResult> out;
  out.push_back(train(config, data, callback(0)));
  for (int g = 1; g < generations; ++g) {
    TrainConfig student = config;
    student.seed = derive_seed(config.seed, {static_cast<std::uint64_t>(g)});
    out.push_back(distill_train(student, out.back().model, data, callback(g)));
    const double previous = out[out.size() - 2].report.best_val_accuracy;
    if (config.chain_early_stop && out.back().report.best_val_accuracy <= previous) break;
  }
  return out;
}

MatrixRM predict_probabilities(models::Model& model, const models::ModelInput& input) {
  NoGradGuard guard;
  const Tensor z = model.forward(input, models::ForwardContext{Mode::eval, nullptr});
  return softmax_rows(z.matrix());
}

MatrixRM ensemble_predict(const std::vector<models::Model*>& members, const models::ModelInput& input) {
  if (members.empty()) throw InputError("ensemble_predict: no models");
  const int k = members.front()->spec().num_classes;
  MatrixRM sum = MatrixRM::Zero(input.layout.count(), k);
  for (models::Model* m : members) {
    if (m->spec().num_classes != k) throw InputError("ensemble_predict: members disagree on the class count");
    sum += predict_probabilities(*m, input);
  }
  return sum / static_cast<double>(members.size());
}

namespace {

template <class Predict>
MatrixRM over_split(const data::SampleSet& set, const augment::AugmentConfig& augment, Index batch_size, int k,
                    Predict predict) {
  if (set.samples.empty()) throw InputError("evaluate: split '" + set.name + "' is empty");
  if (batch_size < 1) throw ConfigError("evaluate: batch size must be >= 1");
  const Index n = static_cast<Index>(set.samples.size());
  MatrixRM out(n, k);
  for (Index first = 0; first < n; first += batch_size) {
    const Index count = std::min(batch_size, n - first);
    std::vector<augment::Clip> clips;
    for (Index i = first; i < first + count; ++i) clips.push_back(augment::eval_clip(set.samples[static_cast<std::size_t>(i)], augment));
    out.middleRows(first, count) = predict(pack_clips(clips));
  }
  return out;
}

std::vector<int> labels_of(const data::SampleSet& set) {
  std::vector<int> labels;
  for (const auto& s : set.samples) labels.push_back(s.label);
  return labels;
}

}  // namespace

MatrixRM predict_logits(models::Model& model, const data::SampleSet& set, const augment::AugmentConfig& augment,
                        Index batch_size) {
  return over_split(set, augment, batch_size, model.spec().num_classes, [&](const models::ModelInput& in) {
    NoGradGuard guard;
    const Tensor z = model.forward(in, models::ForwardContext{Mode::eval, nullptr});
    return MatrixRM(z.matrix());
  });
}

EvalResult evaluate(models::Model& model, const data::SampleSet& set, const augment::AugmentConfig& augment,
                    Index batch_size) {
  return score_predictions(predict_logits(model, set, augment, batch_size), labels_of(set), model.spec().num_classes);
}

EvalResult evaluate_ensemble(const std::vector<models::Model*>& members, const data::SampleSet& set,
                             const augment::AugmentConfig& augment, Index batch_size) {
  if (members.empty()) throw InputError("evaluate_ensemble: no models");
  const int k = members.front()->spec().num_classes;
  const MatrixRM p = over_split(set, augment, batch_size, k,
                                [&](const models::ModelInput& in) { return ensemble_predict(members, in); });
  return score_predictions(p, labels_of(set), k);
}

}  // namespace lipbench::train
