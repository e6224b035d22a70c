#include "lipbench/analysis/bundle.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <sstream>

namespace lipbench::analysis {

namespace fs = std::filesystem;

namespace {

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%6.2f", 100.0 * v);
  return buf;
}

std::string signed_percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%+6.2f", 100.0 * v);
  return buf;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

std::string run_id(const train::RunReport& r) {
  return r.name + "/" + r.kind + "/g" + std::to_string(r.generation) + "/s" + std::to_string(r.seed);
}

const train::RunReport* pick_baseline(const std::vector<train::RunReport>& reports) {
  const train::RunReport* first = nullptr;
  for (const auto& r : reports) {
    if (r.status != "completed" || r.per_class_accuracy.empty()) continue;
    if (!first) first = &r;
    if (r.kind == "train" && r.architecture == "bgru") return &r;
  }
  return first;
}

}  // namespace

Bundle build_bundle(const std::vector<train::RunReport>& reports) {
  if (reports.empty()) throw InputError("analysis bundle: no run reports");
  Bundle b;
  std::ostringstream text;

  std::vector<train::RunReport> plain, chain;
  for (const auto& r : reports) (r.kind == "train" ? plain : chain).push_back(r);

  // Ablation matrix.
  const std::vector<CellStats> cells = plain.empty() ? std::vector<CellStats>{} : tabulate_ablation(plain);
  Json rows = Json::array();
  for (const auto& c : cells) rows.push_back(to_json(c));
  b.ablation_table = {{"version", kBundleVersion}, {"base", cells.empty() ? Json(nullptr) : Json(cells.front().name)},
                      {"cells", std::move(rows)}};
  text << "Ablation (test top-1 %, mean +- std over runs; delta vs base)\n";
  for (const auto& c : cells) {
    text << "  " << pad(c.name, 24) << pad(c.architecture, 7) << (c.boundary_indicator ? " boundary " : " -        ");
    if (c.runs == c.failed_runs) {
      text << "failed (" << c.failed_runs << "/" << c.runs << ")\n";
      continue;
    }
    text << percent(c.mean_top1) << " +- " << percent(c.std_top1) << "  " << signed_percent(c.delta_top1);
    if (c.mean_corrupted) text << "  corrupted " << percent(*c.mean_corrupted) << " " << signed_percent(c.delta_corrupted.value_or(0.0));
    text << "  n=" << c.runs;
    if (c.failed) text << " (" << c.failed_runs << " failed)";
    text << "\n";
  }
  if (cells.empty()) text << "  (no training runs)\n";

  // Generation list: chain members are grouped by name, teacher row from the
  // matching plain run with generation 0 when present.
  Json chains = Json::array();
  text << "\nSelf-distillation (test top-1 %)\n";
  std::vector<std::string> names;
  for (const auto& r : chain)
    if (std::find(names.begin(), names.end(), r.name) == names.end()) names.push_back(r.name);
  for (const auto& name : names) {
    std::vector<const train::RunReport*> rows_of;
    for (const auto& r : plain)
      if (r.name == name) rows_of.push_back(&r);
    for (const auto& r : chain)
      if (r.name == name) rows_of.push_back(&r);
    std::stable_sort(rows_of.begin(), rows_of.end(), [](const auto* a, const auto* b) {
      const int ka = a->kind == "ensemble" ? 1 : 0, kb = b->kind == "ensemble" ? 1 : 0;
      return ka != kb ? ka < kb : a->generation < b->generation;
    });
    Json entries = Json::array();
    text << "  " << name << "\n";
    for (const auto* r : rows_of) {
      const std::string label = r->kind == "ensemble" ? "Ensemble"
                                : r->generation == 0  ? "Teacher"
                                                      : "Student " + std::to_string(r->generation);
      const bool ok = r->status == "completed";
      entries.push_back({{"row", label},
                         {"kind", r->kind},
                         {"generation", r->generation},
                         {"status", r->status},
                         {"best_val_accuracy", ok ? Json(r->best_val_accuracy) : Json(nullptr)},
                         {"test_top1", ok ? Json(r->test_top1) : Json(nullptr)}});
      text << "    " << pad(label, 12) << (ok ? percent(r->test_top1) : std::string("failed")) << "\n";
    }
    chains.push_back({{"name", name}, {"rows", std::move(entries)}});
  }
  if (names.empty()) text << "  (no distillation runs)\n";
  b.distill_table = {{"version", kBundleVersion}, {"chains", std::move(chains)}};

  // Difficulty groups.
  text << "\nDifficulty groups (test top-1 % per group)\n";
  const train::RunReport* baseline = pick_baseline(reports);
  const Index k = baseline ? static_cast<Index>(baseline->per_class_accuracy.size()) : 0;
  if (!baseline || k < kDifficultyGroups) {
    const std::string reason = baseline ? std::to_string(k) + " classes, need at least " + std::to_string(kDifficultyGroups)
                                        : std::string("no completed run");
    b.difficulty_groups = {{"version", kBundleVersion}, {"available", false}, {"reason", reason}};
    b.group_accuracy = {{"version", kBundleVersion}, {"available", false}, {"reason", reason}, {"runs", Json::array()}};
    text << "  unavailable: " << reason << "\n";
  } else {
    const DifficultyGroups groups = build_difficulty_groups(baseline->per_class_accuracy, kDifficultyGroups, run_id(*baseline));
    b.difficulty_groups = to_json(groups);
    b.difficulty_groups["version"] = kBundleVersion;
    b.difficulty_groups["available"] = true;
    Json runs = Json::array();
    text << "  baseline " << groups.baseline << "\n  " << pad("run", 36);
    for (const auto& n : kDifficultyGroupNames) text << pad(n, 16);
    text << "\n";
    for (const auto& r : reports) {
      if (r.status != "completed" || static_cast<Index>(r.confusion.size()) != k) continue;
      const GroupAccuracy g = group_accuracy(r.confusion, groups);
      Json entry = to_json(g);
      entry["run"] = run_id(r);
      entry["test_top1"] = r.test_top1;
      runs.push_back(std::move(entry));
      text << "  " << pad(run_id(r), 36);
      for (double a : g.accuracy) text << pad(percent(a), 16);
      text << "\n";
    }
    b.group_accuracy = {{"version", kBundleVersion}, {"available", true}, {"groups", kDifficultyGroupNames},
                        {"runs", std::move(runs)}};
  }
  b.summary = text.str();
  return b;
}

void write_bundle(const Bundle& bundle, const std::string& dir) {
  fs::create_directories(dir);
  const fs::path d(dir);
  write_text_file((d / kAblationTableFile).string(), bundle.ablation_table.dump(2) + "\n");
  write_text_file((d / kDistillTableFile).string(), bundle.distill_table.dump(2) + "\n");
  write_text_file((d / kDifficultyGroupsFile).string(), bundle.difficulty_groups.dump(2) + "\n");
  write_text_file((d / kGroupAccuracyFile).string(), bundle.group_accuracy.dump(2) + "\n");
  write_text_file((d / kSummaryFile).string(), bundle.summary);
}

void emit_report(const std::vector<train::RunReport>& reports, const std::string& dir) {
  write_bundle(build_bundle(reports), dir);
}

std::vector<train::RunReport> collect_reports(const std::vector<std::string>& dirs) {
  std::vector<fs::path> paths;
  for (const auto& dir : dirs) {
    if (!fs::is_directory(dir)) throw DataError("report input '" + dir + "' is not a directory");
    for (const auto& e : fs::recursive_directory_iterator(dir))
      if (e.is_regular_file() && e.path().extension() == ".json") paths.push_back(e.path());
  }
  std::sort(paths.begin(), paths.end());
  std::vector<train::RunReport> reports;
  for (const auto& p : paths) {
    Json j;
    try {
      j = parse_json_text(read_text_file(p.string()), p.string());
    } catch (const ConfigError&) {
      continue;
    }
    if (!j.is_object() || j.value("format", std::string()) != train::kRunReportFormat) continue;
    reports.push_back(train::run_report_from_json(j));
  }
  return reports;
}

}  // namespace lipbench::analysis
