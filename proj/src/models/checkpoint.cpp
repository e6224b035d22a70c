#include "lipbench/models/checkpoint.hpp"

#include "lipbench/common/binary_io.hpp"
#include "lipbench/common/container.hpp"

namespace lipbench::models {

void save_checkpoint(const std::string& path, const Model& model, const Json& metadata) {
  Json header;
  header["spec"] = to_json(model.spec());
  header["metadata"] = metadata;
  Json tensors = Json::array();
  binary::Writer w;
  for (const auto& e : model.store().entries()) {
    tensors.push_back({{"name", e.name}, {"shape", e.tensor.shape()}, {"trainable", e.trainable}});
    w.put_f64s(e.tensor.data());
  }
  header["tensors"] = std::move(tensors);
  write_container(path, kCheckpointMagic, kCheckpointVersion, std::move(header), w.bytes());
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  Container c = read_container(path, kCheckpointMagic, kCheckpointVersion);
  ModelSpec spec;
  ParameterStore store;
  Json metadata;
  try {
    spec = model_spec_from_json(c.header.at("spec"), "spec");
    metadata = c.header.value("metadata", Json::object());
    binary::Reader r(c.payload, 0, path);
    for (const auto& t : c.header.at("tensors")) {
      Tensor tensor = Tensor::zeros(t.at("shape").get<Shape>());
      r.get_f64s(tensor.data());
      store.add(t.at("name").get<std::string>(), tensor, t.at("trainable").get<bool>());
    }
    if (!r.at_end()) throw DataError(path + ": trailing payload bytes");
  } catch (const Json::exception& e) {
    throw DataError(path + ": malformed checkpoint header (" + e.what() + ")");
  } catch (const ConfigError& e) {
    throw DataError(path + ": invalid model spec (" + e.what() + ")");
  }
  return {Model(spec, store), std::move(metadata)};
}

}  // namespace lipbench::models
