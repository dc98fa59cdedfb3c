#pragma once

// JSON encoding of configuration structs. Private to the core library.

#include <initializer_list>
#include <string>

#include <json.hpp>

#include "modad/biasid.hpp"
#include "modad/debias.hpp"
#include "modad/detectors.hpp"
#include "modad/netcore.hpp"
#include "modad/synthdata.hpp"

namespace modad::codec {

using nlohmann::json;

/// Rejects keys outside `allowed` so that typos in configs fail loudly.
inline void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ValidationError(where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ValidationError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end() && !it->is_null()) out = it->get<T>();
}

inline json to_json(const DatasetSpec& s) {
  return {{"num_classes", s.num_classes},           {"num_bias_attributes", s.num_bias_attributes},
          {"signal_dim", s.signal_dim},             {"bias_dim", s.bias_dim},
          {"rho", s.rho},                           {"samples_per_class", s.samples_per_class},
          {"class_separation", s.class_separation}, {"bias_separation", s.bias_separation},
          {"noise_std", s.noise_std},               {"seed", s.seed}};
}

inline DatasetSpec dataset_spec_from(const json& j, bool strict) {
  if (strict)
    check_keys(j, "dataset spec",
               {"num_classes", "num_bias_attributes", "signal_dim", "bias_dim", "rho", "samples_per_class",
                "class_separation", "bias_separation", "noise_std", "seed"});
  DatasetSpec s;
  read(j, "num_classes", s.num_classes);
  read(j, "num_bias_attributes", s.num_bias_attributes);
  read(j, "signal_dim", s.signal_dim);
  read(j, "bias_dim", s.bias_dim);
  read(j, "rho", s.rho);
  read(j, "samples_per_class", s.samples_per_class);
  read(j, "class_separation", s.class_separation);
  read(j, "bias_separation", s.bias_separation);
  read(j, "noise_std", s.noise_std);
  read(j, "seed", s.seed);
  return s;
}

inline json to_json(const TrainConfig& c) {
  return {{"loss", to_string(c.loss)},    {"q", c.q},           {"learning_rate", c.learning_rate},
          {"weight_decay", c.weight_decay}, {"beta1", c.beta1}, {"beta2", c.beta2},
          {"epsilon", c.epsilon},         {"epochs", c.epochs}, {"batch_size", c.batch_size},
          {"seed", c.seed}};
}

inline TrainConfig train_config_from(const json& j, TrainConfig c, bool strict) {
  if (strict)
    check_keys(j, "train config",
               {"loss", "q", "learning_rate", "weight_decay", "beta1", "beta2", "epsilon", "epochs",
                "batch_size", "seed"});
  if (auto it = j.find("loss"); it != j.end()) c.loss = parse_loss_kind(it->get<std::string>());
  read(j, "q", c.q);
  read(j, "learning_rate", c.learning_rate);
  read(j, "weight_decay", c.weight_decay);
  read(j, "beta1", c.beta1);
  read(j, "beta2", c.beta2);
  read(j, "epsilon", c.epsilon);
  read(j, "epochs", c.epochs);
  read(j, "batch_size", c.batch_size);
  read(j, "seed", c.seed);
  return c;
}

inline json to_json(const NetworkShape& n) {
  return {{"hidden_dims", n.hidden_dims}, {"embedding_dim", n.embedding_dim}};
}

inline NetworkShape network_from(const json& j) {
  check_keys(j, "network", {"hidden_dims", "embedding_dim"});
  NetworkShape n;
  read(j, "hidden_dims", n.hidden_dims);
  read(j, "embedding_dim", n.embedding_dim);
  return n;
}

inline json to_json(const DebiasConfig& d) {
  return {{"input_model", to_string(d.input_model)},
          {"k_aug", d.k_aug},
          {"sigma_aug", d.sigma_aug ? json(*d.sigma_aug) : json()},
          {"dropout_frac", d.dropout_frac},
          {"epochs", d.epochs},
          {"learning_rate", d.learning_rate},
          {"weight_decay", d.weight_decay},
          {"batch_size", d.batch_size}};
}

inline DebiasConfig debias_from(const json& j) {
  check_keys(j, "debias",
             {"input_model", "k_aug", "sigma_aug", "dropout_frac", "epochs", "learning_rate", "weight_decay",
              "batch_size"});
  DebiasConfig d;
  if (auto it = j.find("input_model"); it != j.end()) d.input_model = parse_input_model_kind(it->get<std::string>());
  read(j, "k_aug", d.k_aug);
  if (auto it = j.find("sigma_aug"); it != j.end() && !it->is_null()) d.sigma_aug = it->get<double>();
  read(j, "dropout_frac", d.dropout_frac);
  read(j, "epochs", d.epochs);
  read(j, "learning_rate", d.learning_rate);
  read(j, "weight_decay", d.weight_decay);
  read(j, "batch_size", d.batch_size);
  return d;
}

inline json to_json(const DetectorConfig& d) {
  return {{"kind", to_string(d.kind)},
          {"nu", d.nu},
          {"gamma", d.gamma ? json(*d.gamma) : json()},
          {"tolerance", d.ocsvm.tolerance},
          {"max_iterations", d.ocsvm.max_iterations},
          {"lof_k", d.alternate.lof_k},
          {"iforest_trees", d.alternate.iforest_trees},
          {"iforest_subsample", d.alternate.iforest_subsample},
          {"mcd_restarts", d.alternate.mcd_restarts},
          {"mcd_csteps", d.alternate.mcd_csteps},
          {"ridge", d.alternate.ridge}};
}

inline DetectorConfig detector_from(const json& j) {
  check_keys(j, "detector",
             {"kind", "nu", "gamma", "tolerance", "max_iterations", "lof_k", "iforest_trees", "iforest_subsample",
              "mcd_restarts", "mcd_csteps", "ridge"});
  DetectorConfig d;
  if (auto it = j.find("kind"); it != j.end()) d.kind = parse_detector_kind(it->get<std::string>());
  read(j, "nu", d.nu);
  if (auto it = j.find("gamma"); it != j.end() && !it->is_null()) d.gamma = it->get<double>();
  read(j, "tolerance", d.ocsvm.tolerance);
  read(j, "max_iterations", d.ocsvm.max_iterations);
  read(j, "lof_k", d.alternate.lof_k);
  read(j, "iforest_trees", d.alternate.iforest_trees);
  read(j, "iforest_subsample", d.alternate.iforest_subsample);
  read(j, "mcd_restarts", d.alternate.mcd_restarts);
  read(j, "mcd_csteps", d.alternate.mcd_csteps);
  read(j, "ridge", d.alternate.ridge);
  return d;
}

}  // namespace modad::codec
