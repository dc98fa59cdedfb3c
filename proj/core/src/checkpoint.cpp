#include <fstream>

#include "json_codec.hpp"

#include "modad/netcore.hpp"

namespace modad {

namespace {

constexpr int kCheckpointVersion = 1;

}  // namespace

void save_checkpoint(const MlpModel& model, const TrainConfig& cfg, const std::filesystem::path& path) {
  nlohmann::json j;
  j["format"] = "modad-mlp";
  j["version"] = kCheckpointVersion;
  j["layer_dims"] = model.layer_dims();
  j["parameters"] = model.flatten();
  j["train_config"] = codec::to_json(cfg);
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write checkpoint '" + path.string() + "'");
  os << j.dump() << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open checkpoint '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("checkpoint '" + path.string() + "' is not valid JSON: " + e.what());
  }
  if (j.value("format", std::string()) != "modad-mlp" || j.value("version", 0) != kCheckpointVersion)
    throw IoError("checkpoint '" + path.string() + "' has an unsupported format or version");

  const auto dims = j.at("layer_dims").get<std::vector<int>>();
  if (dims.size() < 3) throw IoError("checkpoint needs at least input, embedding and class dims");
  const std::vector<int> hidden(dims.begin() + 1, dims.end() - 2);
  Checkpoint cp;
  cp.model = init_mlp(dims.front(), hidden, dims[dims.size() - 2], dims.back(), 0);
  cp.model.unflatten(j.at("parameters").get<std::vector<double>>());
  cp.config = codec::train_config_from(j.at("train_config"), TrainConfig{}, false);
  return cp;
}

}  // namespace modad
