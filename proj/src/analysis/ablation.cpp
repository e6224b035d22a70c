#include "lipbench/analysis/ablation.hpp"

#include <atomic>
#include <cmath>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "lipbench/train/trainer.hpp"

namespace lipbench::analysis {

namespace {

const std::map<Knob, std::string>& knob_names() {
  static const std::map<Knob, std::string> names{{Knob::crop, "crop"},
                                                 {Knob::flip, "flip"},
                                                 {Knob::mixup, "mixup"},
                                                 {Knob::time_mask, "time_mask"},
                                                 {Knob::variable_length, "variable_length"},
                                                 {Knob::boundary, "boundary"},
                                                 {Knob::architecture, "architecture"}};
  return names;
}

bool& knob_flag(train::TrainConfig& c, Knob k) {
  switch (k) {
    case Knob::crop: return c.augment.random_crop;
    case Knob::flip: return c.augment.flip;
    case Knob::mixup: return c.augment.mixup;
    case Knob::time_mask: return c.augment.time_mask;
    case Knob::variable_length: return c.augment.variable_length;
    case Knob::boundary: return c.model.boundary_indicator;
    case Knob::architecture: break;
  }
  throw ConfigError("knob has no on/off flag");
}

train::RunReport failed_report(const AblationRun& run, const std::string& what) {
  train::RunReport r;
  r.name = run.cell;
  r.architecture = models::to_string(run.config.model.architecture);
  r.boundary_indicator = run.config.model.boundary_indicator;
  r.config_hash = train::config_hash(run.config);
  r.seed = run.config.seed;
  r.status = "failed";
  r.diagnostic = what;
  return r;
}

train::RunReport execute(const AblationRun& run, const data::Dataset& data, const std::optional<data::SampleSet>& corrupted) {
  try {
    train::TrainResult result = train::train(run.config, data);
    if (corrupted) {
      result.report.corrupted_test_top1 =
          train::evaluate(result.model, *corrupted, run.config.augment, run.config.eval_batch_size).top1;
    }
    return result.report;
  } catch (const train::DivergenceError& e) {
    return e.report();
  } catch (const std::exception& e) {
    return failed_report(run, e.what());
  }
}

std::pair<double, double> mean_std(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  if (v.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

}  // namespace

std::string to_string(Knob k) { return knob_names().at(k); }

Knob knob_from_string(const std::string& s) {
  for (const auto& [k, name] : knob_names())
    if (name == s) return k;
  throw ConfigError("unknown ablation knob '" + s + "'");
}

train::TrainConfig apply_delta(const train::TrainConfig& base, const AblationDelta& delta) {
  train::TrainConfig c = base;
  c.name = delta.name;
  if (delta.knob == Knob::architecture) {
    if (delta.architecture == base.model.architecture) {
      throw ConfigError("delta '" + delta.name + "' keeps the base architecture");
    }
    c.model.architecture = delta.architecture;
  } else {
    bool& flag = knob_flag(c, delta.knob);
    if (!flag) throw ConfigError("delta '" + delta.name + "' disables " + to_string(delta.knob) + ", already off in the base");
    flag = false;
  }
  train::validate(c);
  return c;
}

void validate(const AblationPlan& plan) {
  if (plan.repetitions < 1) throw ConfigError("ablation: repetitions must be >= 1");
  train::validate(plan.base);
  std::set<std::string> names{plan.base.name};
  for (const auto& d : plan.deltas) {
    if (d.name.empty()) throw ConfigError("ablation: delta without a name");
    if (!names.insert(d.name).second) throw ConfigError("ablation: duplicate cell name '" + d.name + "'");
    apply_delta(plan.base, d);
  }
  if (plan.corruption && (plan.corruption->extra_noise < 0.0 || plan.corruption->occlusion_max < 0)) {
    throw ConfigError("ablation: corruption parameters must be non-negative");
  }
}

Json to_json(const AblationPlan& plan) {
  Json deltas = Json::array();
  for (const auto& d : plan.deltas) {
    if (d.knob == Knob::architecture) {
      deltas.push_back({{"name", d.name}, {"architecture", models::to_string(d.architecture)}});
    } else {
      deltas.push_back({{"name", d.name}, {"disable", to_string(d.knob)}});
    }
  }
  Json j{{"version", kAblationPlanVersion},
         {"name", plan.name},
         {"base", train::to_json(plan.base)},
         {"deltas", std::move(deltas)},
         {"repetitions", plan.repetitions}};
  if (plan.corruption) {
    j["corruption"] = {{"extra_noise", plan.corruption->extra_noise},
                       {"occlusion_max", plan.corruption->occlusion_max},
                       {"seed", plan.corruption->seed}};
  }
  return j;
}

AblationPlan ablation_plan_from_json(const Json& j, const std::string& path) {
  StrictObject o(j, path);
  int version = 0;
  o.required("version", version);
  if (version != kAblationPlanVersion) throw ConfigError("ablation plan: unsupported version " + std::to_string(version));
  AblationPlan plan;
  o.optional("name", plan.name);
  const Json* base = o.child("base");
  if (!base) throw ConfigError("ablation plan: missing 'base' config");
  plan.base = train::train_config_from_json(*base, o.child_path("base"));
  o.optional("repetitions", plan.repetitions);
  if (const Json* deltas = o.child("deltas")) {
    if (!deltas->is_array()) throw ConfigError("ablation plan: 'deltas' must be an array");
    for (std::size_t i = 0; i < deltas->size(); ++i) {
      StrictObject d((*deltas)[i], o.child_path("deltas") + "[" + std::to_string(i) + "]");
      AblationDelta delta;
      d.required("name", delta.name);
      std::string disable, architecture;
      d.optional("disable", disable);
      d.optional("architecture", architecture);
      d.finish();
      if (disable.empty() == architecture.empty()) {
        throw ConfigError("ablation delta '" + delta.name + "': set exactly one of 'disable' or 'architecture'");
      }
      if (!disable.empty()) {
        delta.knob = knob_from_string(disable);
        if (delta.knob == Knob::architecture) throw ConfigError("use 'architecture' to swap the temporal model");
      } else {
        delta.knob = Knob::architecture;
        delta.architecture = models::architecture_from_string(architecture);
      }
      plan.deltas.push_back(delta);
    }
  }
  if (const Json* c = o.child("corruption")) {
    StrictObject co(*c, o.child_path("corruption"));
    Corruption corruption;
    co.optional("extra_noise", corruption.extra_noise);
    co.optional("occlusion_max", corruption.occlusion_max);
    co.optional("seed", corruption.seed);
    co.finish();
    plan.corruption = corruption;
  }
  o.finish();
  validate(plan);
  return plan;
}

AblationPlan load_ablation_plan(const std::string& path) { return ablation_plan_from_json(read_json_file(path)); }

std::vector<AblationRun> expand_plan(const AblationPlan& plan) {
  std::vector<std::pair<std::string, train::TrainConfig>> cells{{plan.base.name, plan.base}};
  for (const auto& d : plan.deltas) cells.emplace_back(d.name, apply_delta(plan.base, d));
  std::vector<AblationRun> runs;
  for (const auto& [name, config] : cells)
    for (int r = 0; r < plan.repetitions; ++r) {
      AblationRun run{name, r, config};
      run.config.seed = plan.base.seed + static_cast<std::uint64_t>(r);
      runs.push_back(std::move(run));
    }
  return runs;
}

std::vector<train::RunReport> run_ablation(const AblationPlan& plan, const data::Dataset& data,
                                           const AblationOptions& options) {
  validate(plan);
  const std::vector<AblationRun> runs = expand_plan(plan);
  std::optional<data::SampleSet> corrupted;
  if (plan.corruption) {
    corrupted = data::corrupt_split(data.test, plan.corruption->extra_noise, plan.corruption->occlusion_max,
                                    plan.corruption->seed);
  }
  std::vector<train::RunReport> reports(runs.size());
  std::atomic<std::size_t> next{0};
  std::mutex callback_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < runs.size(); i = next++) {
      reports[i] = execute(runs[i], data, corrupted);
      if (options.on_run) {
        std::lock_guard<std::mutex> lock(callback_mutex);
        options.on_run(runs[i], reports[i]);
      }
    }
  };
  const int jobs = std::max(1, std::min(options.jobs, static_cast<int>(runs.size())));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int j = 0; j < jobs; ++j) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  return reports;
}

std::vector<CellStats> tabulate_ablation(const std::vector<train::RunReport>& reports) {
  std::vector<CellStats> cells;
  std::vector<std::vector<const train::RunReport*>> members;
  for (const auto& r : reports) {
    auto it = std::find_if(cells.begin(), cells.end(), [&](const CellStats& c) { return c.name == r.name; });
    if (it == cells.end()) {
      cells.push_back({});
      cells.back().name = r.name;
      cells.back().architecture = r.architecture;
      cells.back().boundary_indicator = r.boundary_indicator;
      members.emplace_back();
      it = cells.end() - 1;
    }
    members[static_cast<std::size_t>(it - cells.begin())].push_back(&r);
  }
  for (std::size_t i = 0; i < cells.size(); ++i) {
    CellStats& c = cells[i];
    std::vector<double> top1, corrupted;
    for (const auto* r : members[i]) {
      ++c.runs;
      if (r->status != "completed") {
        ++c.failed_runs;
        continue;
      }
      top1.push_back(r->test_top1);
      if (r->corrupted_test_top1) corrupted.push_back(*r->corrupted_test_top1);
    }
    c.failed = c.failed_runs > 0;
    if (!top1.empty()) std::tie(c.mean_top1, c.std_top1) = mean_std(top1);
    if (!corrupted.empty() && corrupted.size() == top1.size()) {
      const auto [m, s] = mean_std(corrupted);
      c.mean_corrupted = m;
      c.std_corrupted = s;
    }
  }
  for (auto& c : cells) {
    c.delta_top1 = c.mean_top1 - cells.front().mean_top1;
    if (c.mean_corrupted && cells.front().mean_corrupted) c.delta_corrupted = *c.mean_corrupted - *cells.front().mean_corrupted;
  }
  return cells;
}

Json to_json(const CellStats& c) {
  auto opt = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
  const bool any = c.runs > c.failed_runs;
  return {{"name", c.name},
          {"architecture", c.architecture},
          {"boundary_indicator", c.boundary_indicator},
          {"runs", c.runs},
          {"failed_runs", c.failed_runs},
          {"failed", c.failed},
          {"mean_top1", any ? Json(c.mean_top1) : Json(nullptr)},
          {"std_top1", any ? Json(c.std_top1) : Json(nullptr)},
          {"delta_top1", any ? Json(c.delta_top1) : Json(nullptr)},
          {"mean_corrupted_top1", opt(c.mean_corrupted)},
          {"std_corrupted_top1", opt(c.std_corrupted)},
          {"delta_corrupted_top1", opt(c.delta_corrupted)}};
}

}  // namespace lipbench::analysis
