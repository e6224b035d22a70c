#include "lipbench/train/config.hpp"

namespace lipbench::train {

std::string to_string(KLDirection d) {
  return d == KLDirection::teacher_to_student ? "teacher_to_student" : "student_to_teacher";
}

namespace {

KLDirection direction_from_string(const std::string& s) {
  if (s == "teacher_to_student") return KLDirection::teacher_to_student;
  if (s == "student_to_teacher") return KLDirection::student_to_teacher;
  throw ConfigError("config key 'distill_direction': expected teacher_to_student or student_to_teacher");
}

}  // namespace

void validate(const TrainConfig& c) {
  models::validate(c.model);
  if (c.model.encoder.frame_height != c.augment.crop_height || c.model.encoder.frame_width != c.augment.crop_width) {
    throw ConfigError("encoder frame size must equal the crop size (" + std::to_string(c.augment.crop_height) + "x" +
                      std::to_string(c.augment.crop_width) + ")");
  }
  if (c.effective_epochs() < 0) throw ConfigError("epochs must be >= 0");
  if (c.effective_batch_size() < 1 || c.eval_batch_size < 1) throw ConfigError("batch sizes must be >= 1");
  if (!(c.lr > 0.0)) throw ConfigError("lr must be > 0");
  if (!(c.weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (!(c.beta1 >= 0.0 && c.beta1 < 1.0 && c.beta2 >= 0.0 && c.beta2 < 1.0)) throw ConfigError("betas must lie in [0, 1)");
  if (!(c.eps > 0.0)) throw ConfigError("eps must be > 0");
  if (!(c.distill_alpha >= 0.0)) throw ConfigError("distill_alpha must be >= 0");
  if (!(c.distill_temperature > 0.0)) throw ConfigError("distill_temperature must be > 0");
}

Json to_json(const TrainConfig& c) {
  Json model = models::to_json(c.model);
  model.erase("boundary_indicator");
  Json j{{"version", kTrainConfigVersion},
         {"name", c.name},
         {"boundary_indicator", c.model.boundary_indicator},
         {"model", std::move(model)},
         {"augment", augment::to_json(c.augment)},
         {"epochs", c.epochs},
         {"batch_size", c.batch_size},
         {"lr", c.lr},
         {"weight_decay", c.weight_decay},
         {"betas", {c.beta1, c.beta2}},
         {"eps", c.eps},
         {"distill_alpha", c.distill_alpha},
         {"distill_temperature", c.distill_temperature},
         {"distill_direction", to_string(c.distill_direction)},
         {"teacher_clean_input", c.teacher_clean_input},
         {"chain_early_stop", c.chain_early_stop},
         {"eval_batch_size", c.eval_batch_size},
         {"seed", c.seed}};
  if (c.desk_epochs || c.desk_batch_size) {
    Json desk = Json::object();
    if (c.desk_epochs) desk["epochs"] = *c.desk_epochs;
    if (c.desk_batch_size) desk["batch_size"] = *c.desk_batch_size;
    j["desk_scale"] = std::move(desk);
  }
  return j;
}

TrainConfig train_config_from_json(const Json& j, const std::string& path) {
  TrainConfig c;
  StrictObject o(j, path);
  int version = 0;
  o.required("version", version);
  if (version != kTrainConfigVersion) {
    throw ConfigError("train config: unsupported version " + std::to_string(version) + " (expected " +
                      std::to_string(kTrainConfigVersion) + ")");
  }
  o.optional("name", c.name);
  if (const Json* m = o.child("model")) {
    if (m->is_object() && m->contains("boundary_indicator")) {
      throw ConfigError("config key '" + o.child_path("model.boundary_indicator") +
                        "': set boundary_indicator at the top level");
    }
    c.model = models::model_spec_from_json(*m, o.child_path("model"));
  }
  o.optional("boundary_indicator", c.model.boundary_indicator);
  if (const Json* a = o.child("augment")) c.augment = augment::augment_config_from_json(*a, o.child_path("augment"));
  o.optional("epochs", c.epochs);
  o.optional("batch_size", c.batch_size);
  o.optional("lr", c.lr);
  o.optional("weight_decay", c.weight_decay);
  std::vector<double> betas{c.beta1, c.beta2};
  o.optional("betas", betas);
  if (betas.size() != 2) throw ConfigError("config key 'betas': expected two numbers");
  c.beta1 = betas[0];
  c.beta2 = betas[1];
  o.optional("eps", c.eps);
  o.optional("distill_alpha", c.distill_alpha);
  o.optional("distill_temperature", c.distill_temperature);
  std::string direction = to_string(c.distill_direction);
  o.optional("distill_direction", direction);
  c.distill_direction = direction_from_string(direction);
  o.optional("teacher_clean_input", c.teacher_clean_input);
  o.optional("chain_early_stop", c.chain_early_stop);
  o.optional("eval_batch_size", c.eval_batch_size);
  o.optional("seed", c.seed);
  if (const Json* d = o.child("desk_scale")) {
    StrictObject dobj(*d, o.child_path("desk_scale"));
    Index v = 0;
    if (dobj.has("epochs")) {
      dobj.optional("epochs", v);
      c.desk_epochs = v;
    }
    if (dobj.has("batch_size")) {
      dobj.optional("batch_size", v);
      c.desk_batch_size = v;
    }
    dobj.finish();
  }
  o.finish();
  validate(c);
  return c;
}

TrainConfig load_train_config(const std::string& path) { return train_config_from_json(read_json_file(path)); }

std::string config_hash(const TrainConfig& c) {
  const std::string text = to_json(c).dump();
  return hex64(fnv1a64(text.data(), text.size()));
}

}  // namespace lipbench::train
