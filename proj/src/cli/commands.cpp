#include "lipbench/cli/commands.hpp"

#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "lipbench/analysis/bundle.hpp"
#include "lipbench/models/checkpoint.hpp"
#include "lipbench/train/trainer.hpp"

namespace lipbench::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kCheckpointFile = "checkpoint.lbc";
constexpr const char* kReportFile = "report.json";

using Fields = std::vector<std::pair<std::string, std::string>>;

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(6) << v;
  return s.str();
}

std::string file_hash(const std::string& path) {
  const std::string bytes = read_text_file(path);
  return hex64(fnv1a64(bytes.data(), bytes.size()));
}

/// Resolves an output location from the flag or LIPBENCH_OUT_DIR.
std::string output_path(const std::string& flag, const std::string& default_name) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("LIPBENCH_OUT_DIR"); env && *env) return (fs::path(env) / default_name).string();
  throw ConfigError("no output location: pass --out or set LIPBENCH_OUT_DIR");
}

void claim_file(const std::string& path, bool force) {
  if (fs::exists(path) && !force) throw ConfigError("'" + path + "' exists; pass --force to overwrite");
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

void claim_dir(const std::string& dir, bool force) {
  if (fs::exists(dir) && !fs::is_directory(dir)) throw ConfigError("'" + dir + "' exists and is not a directory");
  if (fs::exists(dir) && !fs::is_empty(dir) && !force) {
    throw ConfigError("output directory '" + dir + "' is not empty; pass --force to overwrite");
  }
  fs::create_directories(dir);
}

void print_epoch(std::ostream& out, const std::string& tag, const train::EpochRecord& e) {
  out << tag << "epoch " << e.epoch << " loss " << fmt(e.train_loss) << " ce " << fmt(e.train_ce);
  if (e.train_kd != 0.0) out << " kd " << fmt(e.train_kd);
  out << " val " << fmt(e.val_accuracy) << " lr " << fmt(e.lr_end) << "\n" << std::flush;
}

Json checkpoint_metadata(const train::TrainConfig& config, const train::RunReport& report) {
  return {{"config", train::to_json(config)},
          {"name", report.name},
          {"kind", report.kind},
          {"generation", report.generation},
          {"best_epoch", report.best_epoch},
          {"best_val_accuracy", report.best_val_accuracy},
          {"test_top1", report.test_top1}};
}

void write_run(const std::string& dir, const train::TrainConfig& config, const train::TrainResult& r) {
  fs::create_directories(dir);
  models::save_checkpoint((fs::path(dir) / kCheckpointFile).string(), r.model, checkpoint_metadata(config, r.report));
  train::save_run_report(r.report, (fs::path(dir) / kReportFile).string());
}

/// Writes the partial report of a diverged run next to where the checkpoint would go.
[[noreturn]] void persist_divergence(const std::string& dir, const train::DivergenceError& e) {
  fs::create_directories(dir);
  train::save_run_report(e.report(), (fs::path(dir) / kReportFile).string());
  throw;
}

// ---- commands -----------------------------------------------------------------

struct GenerateArgs {
  std::string spec, out;
  bool force = false;
};

Fields cmd_generate(const GenerateArgs& a, std::ostream& out) {
  const data::DatasetSpec spec = a.spec.empty() ? data::DatasetSpec{} : data::dataset_spec_from_json(read_json_file(a.spec));
  data::validate(spec);
  const std::string path = output_path(a.out, "dataset.lbd");
  claim_file(path, a.force);
  const data::Dataset d = data::generate_dataset(spec);
  data::save_dataset(d, path);
  const std::string spec_hash = hex64(fnv1a64(data::to_json(spec).dump().data(), data::to_json(spec).dump().size()));
  out << "train " << d.train.samples.size() << " val " << d.val.samples.size() << " test " << d.test.samples.size()
      << " classes " << spec.num_classes << "\n";
  return {{"train", std::to_string(d.train.samples.size())},
          {"val", std::to_string(d.val.samples.size())},
          {"test", std::to_string(d.test.samples.size())},
          {"spec_hash", spec_hash},
          {"file_hash", file_hash(path)},
          {"path", path}};
}

struct TrainArgs {
  std::string config, data, out;
  bool force = false;
  bool dry_run = false;
};

Fields cmd_train(const TrainArgs& a, std::ostream& out) {
  const train::TrainConfig config = train::load_train_config(a.config);
  const Index params = models::expected_parameter_count(config.model);
  if (a.dry_run) {
    out << "config " << config.name << " valid, " << params << " trainable parameters\n";
    return {{"parameters", std::to_string(params)}, {"config_hash", train::config_hash(config)}, {"dry_run", "1"}};
  }
  if (a.data.empty()) throw ConfigError("train: --data is required unless --dry-run");
  const std::string dir = output_path(a.out, config.name);
  claim_dir(dir, a.force);
  const data::Dataset d = data::load_dataset(a.data);
  train::TrainOptions o;
  o.on_epoch = [&](const train::EpochRecord& e) { print_epoch(out, "", e); };
  try {
    const train::TrainResult r = train::train(config, d, o);
    write_run(dir, config, r);
    out << "test top-1 " << fmt(r.report.test_top1) << " (best epoch " << r.report.best_epoch << ")\n";
    return {{"name", config.name},
            {"architecture", r.report.architecture},
            {"boundary", r.report.boundary_indicator ? "1" : "0"},
            {"parameters", std::to_string(r.report.parameter_count)},
            {"best_epoch", std::to_string(r.report.best_epoch)},
            {"val_top1", fmt(r.report.best_val_accuracy)},
            {"test_top1", fmt(r.report.test_top1)},
            {"out", dir}};
  } catch (const train::DivergenceError& e) {
    persist_divergence(dir, e);
  }
}

struct DistillArgs {
  std::string config, data, out, teacher;
  int generations = 1;
  bool force = false;
};

Fields cmd_distill(const DistillArgs& a, std::ostream& out) {
  const train::TrainConfig config = train::load_train_config(a.config);
  if (a.generations < 1) throw ConfigError("distill: --generations must be >= 1");
  const std::string dir = output_path(a.out, config.name + "_distill");
  claim_dir(dir, a.force);
  const data::Dataset d = data::load_dataset(a.data);

  std::vector<train::TrainResult> results;
  std::vector<models::Model> external;  // a loaded teacher, kept alive for the ensemble
  auto gen_dir = [&](int g) { return (fs::path(dir) / ("gen_" + std::to_string(g))).string(); };
  int current = 0;
  try {
    if (a.teacher.empty()) {
      results = train::self_distill_chain(config, a.generations, d, [&](int g, const train::EpochRecord& e) {
        current = g;
        print_epoch(out, "gen " + std::to_string(g) + " ", e);
      });
    } else {
      external.push_back(models::load_checkpoint(a.teacher).model);
      for (int g = 1; g <= a.generations; ++g) {
        current = g;
        train::TrainConfig student = config;
        student.seed = derive_seed(config.seed, {static_cast<std::uint64_t>(g)});
        train::TrainOptions o;
        o.generation = g;
        o.on_epoch = [&, g](const train::EpochRecord& e) { print_epoch(out, "gen " + std::to_string(g) + " ", e); };
        models::Model& teacher = results.empty() ? external.front() : results.back().model;
        results.push_back(train::distill_train(student, teacher, d, o));
        if (config.chain_early_stop && results.size() > 1 &&
            results.back().report.best_val_accuracy <= results[results.size() - 2].report.best_val_accuracy) {
          break;
        }
      }
    }
  } catch (const train::DivergenceError& e) {
    for (const auto& r : results) write_run(gen_dir(r.report.generation), config, r);
    persist_divergence(gen_dir(current), e);
  }

  Fields fields{{"name", config.name}, {"generations", std::to_string(results.size())}};
  std::vector<models::Model*> members;
  for (auto& m : external) members.push_back(&m);
  for (auto& r : results) {
    write_run(gen_dir(r.report.generation), config, r);
    members.push_back(&r.model);
    out << "generation " << r.report.generation << " test top-1 " << fmt(r.report.test_top1) << "\n";
    fields.emplace_back("gen" + std::to_string(r.report.generation) + "_top1", fmt(r.report.test_top1));
  }
  if (members.size() > 1) {
    train::RunReport ens;
    ens.name = config.name;
    ens.kind = "ensemble";
    ens.architecture = models::to_string(config.model.architecture);
    ens.boundary_indicator = config.model.boundary_indicator;
    ens.config_hash = train::config_hash(config);
    ens.seed = config.seed;
    ens.generation = static_cast<int>(members.size());
    ens.best_val_accuracy = train::evaluate_ensemble(members, d.val, config.augment, config.eval_batch_size).top1;
    const train::EvalResult test = train::evaluate_ensemble(members, d.test, config.augment, config.eval_batch_size);
    ens.test_top1 = test.top1;
    ens.per_class_accuracy = test.per_class_accuracy;
    ens.per_class_count = test.per_class_count;
    ens.confusion = test.confusion;
    fs::create_directories(fs::path(dir) / "ensemble");
    train::save_run_report(ens, (fs::path(dir) / "ensemble" / kReportFile).string());
    out << "ensemble of " << members.size() << " test top-1 " << fmt(ens.test_top1) << "\n";
    fields.emplace_back("ensemble_top1", fmt(ens.test_top1));
  }
  fields.emplace_back("out", dir);
  return fields;
}

struct EnsembleArgs {
  std::string data, split = "test", out;
  std::vector<std::string> checkpoints;
  bool force = false;
};

Fields cmd_ensemble(const EnsembleArgs& a, std::ostream& out) {
  if (a.checkpoints.empty()) throw ConfigError("ensemble: at least one --checkpoint is required");
  std::vector<models::Model> models_;
  augment::AugmentConfig augment;
  for (const auto& path : a.checkpoints) {
    models::LoadedCheckpoint c = models::load_checkpoint(path);
    if (c.metadata.contains("config")) augment = train::train_config_from_json(c.metadata.at("config")).augment;
    if (!models_.empty() && c.model.spec().num_classes != models_.front().spec().num_classes) {
      throw ConfigError("ensemble: checkpoints disagree on the class count");
    }
    models_.push_back(std::move(c.model));
  }
  const data::Dataset d = data::load_dataset(a.data);
  const data::SampleSet* set = nullptr;
  for (int s = 0; s < 3; ++s)
    if (a.split == data::kSplitNames[static_cast<std::size_t>(s)]) set = &d.split(static_cast<data::Split>(s));
  if (!set) throw ConfigError("ensemble: unknown split '" + a.split + "'");
  std::vector<models::Model*> members;
  for (auto& m : models_) members.push_back(&m);
  const train::EvalResult r = train::evaluate_ensemble(members, *set, augment);
  out << "ensemble of " << members.size() << " on " << a.split << ": top-1 " << fmt(r.top1) << "\n";
  if (!a.out.empty()) {
    claim_file(a.out, a.force);
    write_text_file(a.out, Json{{"members", a.checkpoints},
                                {"split", a.split},
                                {"top1", r.top1},
                                {"per_class_accuracy", r.per_class_accuracy},
                                {"confusion", r.confusion}}
                               .dump(2) + "\n");
  }
  return {{"members", std::to_string(members.size())}, {"split", a.split}, {"top1", fmt(r.top1)}};
}

struct AblateArgs {
  std::string plan, data, out;
  int jobs = 0;
  bool force = false;
};

int resolve_jobs(int flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("LIPBENCH_JOBS"); env && *env) {
    try {
      const int j = std::stoi(env);
      if (j > 0) return j;
    } catch (const std::exception&) {
    }
    throw ConfigError(std::string("LIPBENCH_JOBS must be a positive integer, got '") + env + "'");
  }
  return 1;
}

std::string safe_name(const std::string& s) {
  std::string out;
  for (char c : s) out += std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' ? c : '_';
  return out;
}

Fields cmd_ablate(const AblateArgs& a, std::ostream& out) {
  const analysis::AblationPlan plan = analysis::load_ablation_plan(a.plan);
  const std::string dir = output_path(a.out, plan.name);
  claim_dir(dir, a.force);
  const data::Dataset d = data::load_dataset(a.data);
  const auto runs = analysis::expand_plan(plan);
  analysis::AblationOptions o;
  o.jobs = resolve_jobs(a.jobs);
  o.on_run = [&](const analysis::AblationRun& run, const train::RunReport& r) {
    out << "cell " << run.cell << " rep " << run.repetition << " " << r.status << " test " << fmt(r.test_top1);
    if (r.corrupted_test_top1) out << " corrupted " << fmt(*r.corrupted_test_top1);
    out << "\n" << std::flush;
  };
  const std::vector<train::RunReport> reports = analysis::run_ablation(plan, d, o);
  fs::create_directories(fs::path(dir) / "runs");
  for (std::size_t i = 0; i < reports.size(); ++i) {
    std::ostringstream name;
    name << std::setw(3) << std::setfill('0') << i << "_" << safe_name(runs[i].cell) << "_r" << runs[i].repetition
         << ".json";
    train::save_run_report(reports[i], (fs::path(dir) / "runs" / name.str()).string());
  }
  const analysis::Bundle bundle = analysis::build_bundle(reports);
  analysis::write_bundle(bundle, dir);
  out << bundle.summary;
  int failed = 0;
  for (const auto& r : reports) failed += r.status == "completed" ? 0 : 1;
  return {{"cells", std::to_string(plan.deltas.size() + 1)},
          {"runs", std::to_string(reports.size())},
          {"failed", std::to_string(failed)},
          {"out", dir}};
}

struct ReportArgs {
  std::vector<std::string> in;
  std::string out;
  bool force = false;
};

Fields cmd_report(const ReportArgs& a, std::ostream& out) {
  const std::vector<train::RunReport> reports = analysis::collect_reports(a.in);
  if (reports.empty()) throw DataError("report: no run reports found");
  const std::string dir = output_path(a.out, "analysis");
  claim_dir(dir, a.force);
  const analysis::Bundle bundle = analysis::build_bundle(reports);
  analysis::write_bundle(bundle, dir);
  out << bundle.summary;
  return {{"reports", std::to_string(reports.size())}, {"out", dir}};
}

void print_summary(std::ostream& out, const std::string& command, const std::string& status, int code,
                   const Fields& fields) {
  out << "command=" << command << " status=" << status << " exit_code=" << code;
  for (const auto& [k, v] : fields) {
    std::string value = v;
    for (char& c : value)
      if (c == ' ' || c == '\n') c = '_';
    out << " " << k << "=" << value;
  }
  out << "\n" << std::flush;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Synthetic lip-reading benchmark: data generation, training, distillation and ablations", "lipbench"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate-data", "Generate a synthetic dataset file");
  g->add_option("--spec", gen.spec, "Dataset spec JSON (defaults when omitted)");
  g->add_option("--out", gen.out, "Output dataset file");
  g->add_flag("--force", gen.force, "Overwrite an existing file");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train one model");
  t->add_option("--config", tr.config, "Train config JSON")->required();
  t->add_option("--data", tr.data, "Dataset file");
  t->add_option("--out", tr.out, "Output directory");
  t->add_flag("--dry-run", tr.dry_run, "Validate the config and print the parameter count");
  t->add_flag("--force", tr.force, "Write into a non-empty output directory");

  DistillArgs ds;
  auto* di = app.add_subcommand("distill", "Self-distillation generations and their ensemble");
  di->add_option("--config", ds.config, "Train config JSON")->required();
  di->add_option("--data", ds.data, "Dataset file")->required();
  di->add_option("--out", ds.out, "Output directory");
  di->add_option("--teacher", ds.teacher, "Teacher checkpoint; without it generation 0 is trained first");
  di->add_option("--generations", ds.generations, "Models to train, counting generation 0 when no teacher is given");
  di->add_flag("--force", ds.force, "Write into a non-empty output directory");

  EnsembleArgs en;
  auto* e = app.add_subcommand("ensemble", "Evaluate the softmax average of checkpoints");
  e->add_option("--data", en.data, "Dataset file")->required();
  e->add_option("--checkpoint", en.checkpoints, "Checkpoint file (repeatable)")->required();
  e->add_option("--split", en.split, "train, val or test");
  e->add_option("--out", en.out, "Optional JSON result file");
  e->add_flag("--force", en.force, "Overwrite the result file");

  AblateArgs ab;
  auto* a = app.add_subcommand("ablate", "Run an ablation plan and emit its analysis bundle");
  a->add_option("--plan", ab.plan, "Ablation plan JSON")->required();
  a->add_option("--data", ab.data, "Dataset file")->required();
  a->add_option("--out", ab.out, "Output directory");
  a->add_option("--jobs", ab.jobs, "Parallel runs (default LIPBENCH_JOBS or 1)");
  a->add_flag("--force", ab.force, "Write into a non-empty output directory");

  ReportArgs rp;
  auto* r = app.add_subcommand("report", "Build the analysis bundle from saved run reports");
  r->add_option("--in", rp.in, "Directory searched recursively for run reports (repeatable)")->required();
  r->add_option("--out", rp.out, "Output directory");
  r->add_flag("--force", rp.force, "Write into a non-empty output directory");

  // Status lines name the subcommand; a missing one (or a leading option) reports as "lipbench".
  std::string command = argc > 1 && argv[1][0] != '-' ? argv[1] : "lipbench";
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    print_summary(out, command, "ok", kExitOk, {});
    return kExitOk;
  } catch (const CLI::ParseError& ex) {
    err << "error: " << ex.what() << "\n";
    print_summary(out, command, "error", kExitConfig, {{"error", "usage"}});
    return kExitConfig;
  }

  auto run = [&]() -> Fields {
    if (*g) return cmd_generate(gen, out);
    if (*t) return cmd_train(tr, out);
    if (*di) return cmd_distill(ds, out);
    if (*e) return cmd_ensemble(en, out);
    if (*a) return cmd_ablate(ab, out);
    return cmd_report(rp, out);
  };
  auto fail = [&](int code, const char* kind, const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    print_summary(out, command, "error", code, {{"error", kind}});
    return code;
  };
  try {
    print_summary(out, command, "ok", kExitOk, run());
    return kExitOk;
  } catch (const ConfigError& ex) {
    return fail(kExitConfig, "config", ex);
  } catch (const DataError& ex) {
    return fail(kExitData, "data", ex);
  } catch (const InputError& ex) {
    return fail(kExitData, "input", ex);
  } catch (const NumericalError& ex) {
    return fail(kExitNumerical, "numerical", ex);
  } catch (const fs::filesystem_error& ex) {
    return fail(kExitData, "filesystem", ex);
  } catch (const std::exception& ex) {
    return fail(kExitFailure, "internal", ex);
  }
}

}  // namespace lipbench::cli
