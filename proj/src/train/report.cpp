#include "lipbench/train/report.hpp"

namespace lipbench::train {

int argmax_lowest(std::span<const double> row) {
  int best = 0;
  for (std::size_t k = 1; k < row.size(); ++k)
    if (row[k] > row[static_cast<std::size_t>(best)]) best = static_cast<int>(k);
  return best;
}

EvalResult score_predictions(const MatrixRM& scores, const std::vector<int>& labels, int num_classes) {
  if (scores.rows() != static_cast<Index>(labels.size())) throw InputError("score_predictions: row/label count mismatch");
  if (labels.empty()) throw InputError("evaluation set is empty");
  if (scores.cols() != num_classes) throw InputError("score_predictions: score width differs from the class count");
  const auto k = static_cast<std::size_t>(num_classes);
  EvalResult r;
  r.per_class_count.assign(k, 0);
  r.per_class_accuracy.assign(k, 0.0);
  r.confusion.assign(k, std::vector<Index>(k, 0));
  r.labels = labels;
  Index correct = 0;
  for (Index i = 0; i < scores.rows(); ++i) {
    const int pred = argmax_lowest({scores.row(i).data(), k});
    const int label = labels[static_cast<std::size_t>(i)];
    if (label < 0 || label >= num_classes) throw InputError("label " + std::to_string(label) + " out of range");
    r.predictions.push_back(pred);
    ++r.confusion[static_cast<std::size_t>(label)][static_cast<std::size_t>(pred)];
    ++r.per_class_count[static_cast<std::size_t>(label)];
    correct += pred == label ? 1 : 0;
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (r.per_class_count[c] > 0) {
      r.per_class_accuracy[c] = static_cast<double>(r.confusion[c][c]) / static_cast<double>(r.per_class_count[c]);
    }
  }
  r.top1 = static_cast<double>(correct) / static_cast<double>(labels.size());
  return r;
}

Json to_json(const RunReport& r) {
  Json epochs = Json::array();
  for (const auto& e : r.epochs) {
    epochs.push_back({{"epoch", e.epoch},
                      {"train_loss", e.train_loss},
                      {"train_ce", e.train_ce},
                      {"train_kd", e.train_kd},
                      {"val_accuracy", e.val_accuracy},
                      {"lr_end", e.lr_end}});
  }
  return {{"format", kRunReportFormat},
          {"version", kRunReportVersion},
          {"name", r.name},
          {"kind", r.kind},
          {"architecture", r.architecture},
          {"boundary_indicator", r.boundary_indicator},
          {"config_hash", r.config_hash},
          {"seed", r.seed},
          {"generation", r.generation},
          {"status", r.status},
          {"diagnostic", r.diagnostic},
          {"parameter_count", r.parameter_count},
          {"epochs", std::move(epochs)},
          {"best_epoch", r.best_epoch},
          {"best_val_accuracy", r.best_val_accuracy},
          {"test_top1", r.test_top1},
          {"per_class_accuracy", r.per_class_accuracy},
          {"per_class_count", r.per_class_count},
          {"confusion", r.confusion},
          {"corrupted_test_top1", r.corrupted_test_top1 ? Json(*r.corrupted_test_top1) : Json(nullptr)},
          {"wall_clock_seconds", r.wall_clock_seconds}};
}

RunReport run_report_from_json(const Json& j) {
  RunReport r;
  try {
    if (j.at("format").get<std::string>() != kRunReportFormat) throw DataError("not a run report");
    if (j.at("version").get<int>() != kRunReportVersion) throw DataError("run report: unsupported version");
    r.name = j.at("name").get<std::string>();
    r.kind = j.at("kind").get<std::string>();
    r.architecture = j.at("architecture").get<std::string>();
    r.boundary_indicator = j.at("boundary_indicator").get<bool>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.generation = j.at("generation").get<int>();
    r.status = j.at("status").get<std::string>();
    r.diagnostic = j.at("diagnostic").get<std::string>();
    r.parameter_count = j.at("parameter_count").get<Index>();
    for (const auto& e : j.at("epochs")) {
      r.epochs.push_back({e.at("epoch").get<Index>(), e.at("train_loss").get<double>(), e.at("train_ce").get<double>(),
                          e.at("train_kd").get<double>(), e.at("val_accuracy").get<double>(),
                          e.at("lr_end").get<double>()});
    }
    r.best_epoch = j.at("best_epoch").get<Index>();
    r.best_val_accuracy = j.at("best_val_accuracy").get<double>();
    r.test_top1 = j.at("test_top1").get<double>();
    r.per_class_accuracy = j.at("per_class_accuracy").get<std::vector<double>>();
    r.per_class_count = j.at("per_class_count").get<std::vector<Index>>();
    r.confusion = j.at("confusion").get<std::vector<std::vector<Index>>>();
    if (!j.at("corrupted_test_top1").is_null()) r.corrupted_test_top1 = j.at("corrupted_test_top1").get<double>();
    r.wall_clock_seconds = j.at("wall_clock_seconds").get<double>();
  } catch (const Json::exception& e) {
    throw DataError(std::string("malformed run report: ") + e.what());
  }
  return r;
}

void save_run_report(const RunReport& r, const std::string& path) { write_text_file(path, to_json(r).dump(2) + "\n"); }

RunReport load_run_report(const std::string& path) {
  try {
    return run_report_from_json(parse_json_text(read_text_file(path), path));
  } catch (const ConfigError& e) {
    throw DataError(e.what());
  }
}

}  // namespace lipbench::train
