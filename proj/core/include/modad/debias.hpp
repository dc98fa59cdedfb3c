#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "modad/estimate.hpp"
#include "modad/netcore.hpp"
#include "modad/synthdata.hpp"

namespace modad {

enum class InputModelKind { erm, gce };
std::string to_string(InputModelKind kind);
InputModelKind parse_input_model_kind(const std::string& text);

struct DebiasConfig {
  InputModelKind input_model = InputModelKind::erm;
  int k_aug = 3;
  std::optional<double> sigma_aug;  // nullopt: 0.1 x pooled feature std
  double dropout_frac = 0.1;
  int epochs = 30;
  double learning_rate = 1e-5;
  double weight_decay = 1e-2;
  int batch_size = 64;
  std::uint64_t seed = 0;

  void validate() const;
};

struct DebiasEpochLog {
  int epoch = 0;
  double loss = 0.0;
  std::size_t raw_aligned = 0;
  std::size_t raw_conflicting = 0;
  std::size_t augmented = 0;
};

struct DebiasResult {
  MlpModel model;
  std::vector<DebiasEpochLog> log;
};

/// Fine-tunes a copy of `biased_model` under CE. Raw batches come from a
/// with-replacement sampler weighted by the inverse of the estimated
/// aligned/conflicting populations; each raw batch is then expanded with k_aug
/// augmented copies of its estimated-conflicting members.
DebiasResult debias_finetune(const MlpModel& biased_model, const LabeledDataset& data,
                             const BiasSplitEstimate& estimate, const DebiasConfig& cfg);

void write_training_log(const std::vector<DebiasEpochLog>& log, const std::filesystem::path& path);

struct ErmConfig {
  NetworkShape network;
  TrainConfig ce{.loss = LossKind::ce, .learning_rate = 1e-3};
  std::uint64_t seed = 0;
};

/// Fresh network trained with CE under a class-balanced sampler.
MlpModel train_erm_baseline(const LabeledDataset& data, const ErmConfig& cfg);

}  // namespace modad
