#include "modad/debias.hpp"

#include <fstream>

#include "modad/rng.hpp"
#include "modad/sampling.hpp"

namespace modad {

namespace {

constexpr std::uint64_t kErmInitStream = 51;
constexpr std::uint64_t kErmTrainStream = 52;
constexpr std::uint64_t kRawBatchStream = 61;
constexpr std::uint64_t kAugmentStream = 62;

}  // namespace

std::string to_string(InputModelKind kind) { return kind == InputModelKind::erm ? "erm" : "gce"; }

InputModelKind parse_input_model_kind(const std::string& text) {
  if (text == "erm") return InputModelKind::erm;
  if (text == "gce") return InputModelKind::gce;
  throw ValidationError("unknown input model kind '" + text + "'");
}

void DebiasConfig::validate() const {
  if (k_aug < 0) throw ValidationError("k_aug must be >= 0");
  if (!(learning_rate > 0.0)) throw ValidationError("debias learning_rate must be > 0");
  if (sigma_aug && !(*sigma_aug >= 0.0)) throw ValidationError("sigma_aug must be >= 0");
  if (!(dropout_frac >= 0.0 && dropout_frac < 1.0)) throw ValidationError("dropout_frac must lie in [0, 1)");
  if (epochs < 0) throw ValidationError("debias epochs must be >= 0");
  if (batch_size < 1) throw ValidationError("debias batch_size must be >= 1");
}

DebiasResult debias_finetune(const MlpModel& biased_model, const LabeledDataset& data,
                             const BiasSplitEstimate& estimate, const DebiasConfig& cfg) {
  cfg.validate();
  if (data.empty()) throw ValidationError("debias_finetune: empty dataset");
  if (estimate.size() != data.size())
    throw ValidationError("estimate covers " + std::to_string(estimate.size()) + " samples, data has " +
                          std::to_string(data.size()));
  if (biased_model.input_dim() != data.feature_dim())
    throw ShapeError("biased model input width does not match the data");

  SamplerWeights weights = inverse_population_weights(estimate.group_labels());
  weights.replacement = true;
  const double sigma = cfg.sigma_aug.value_or(0.1 * pooled_feature_std(data));

  TrainConfig tc;
  tc.loss = LossKind::ce;
  tc.learning_rate = cfg.learning_rate;
  tc.weight_decay = cfg.weight_decay;
  tc.epochs = cfg.epochs;
  tc.batch_size = cfg.batch_size;
  tc.seed = cfg.seed;

  const std::size_t n = data.size();
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  const std::size_t per_epoch = (n + bs - 1) / bs;

  DebiasResult result;
  auto make_epoch = [&](int epoch) {
    std::vector<TrainingBatch> batches;
    batches.reserve(per_epoch);
    DebiasEpochLog entry;
    entry.epoch = epoch;
    for (std::size_t b = 0; b < per_epoch; ++b) {
      const std::uint64_t stream = static_cast<std::uint64_t>(epoch) * per_epoch + b;
      const auto raw = draw_batch(weights, bs, derive_seed(derive_seed(cfg.seed, kRawBatchStream), stream));
      TrainingBatch batch = build_debias_batch(raw, estimate, data, cfg.k_aug, sigma, cfg.dropout_frac,
                                               derive_seed(derive_seed(cfg.seed, kAugmentStream), stream));
      entry.raw_aligned += batch.raw_aligned;
      entry.raw_conflicting += batch.raw_conflicting;
      entry.augmented += batch.augmented;
      batches.push_back(std::move(batch));
    }
    result.log.push_back(entry);
    return batches;
  };
  TrainResult trained = train_with_batches(biased_model, tc, make_epoch);
  for (std::size_t e = 0; e < result.log.size(); ++e) result.log[e].loss = trained.loss_history[e];
  result.model = std::move(trained.model);
  return result;
}

void write_training_log(const std::vector<DebiasEpochLog>& log, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write training log '" + path.string() + "'");
  os << "epoch,loss,raw_aligned,raw_conflicting,augmented,batch_total\n";
  char buf[64];
  for (const auto& e : log) {
    std::snprintf(buf, sizeof(buf), "%.17g", e.loss);
    os << e.epoch << ',' << buf << ',' << e.raw_aligned << ',' << e.raw_conflicting << ','
       << e.augmented << ',' << (e.raw_aligned + e.raw_conflicting + e.augmented) << '\n';
  }
}

MlpModel train_erm_baseline(const LabeledDataset& data, const ErmConfig& cfg) {
  if (data.empty()) throw ValidationError("ERM baseline needs a nonempty training split");
  const SamplerWeights weights = inverse_population_weights(data.labels());
  MlpModel model = init_mlp(data.feature_dim(), cfg.network, data.num_classes(),
                            derive_seed(cfg.seed, kErmInitStream));
  TrainConfig tc = cfg.ce;
  tc.loss = LossKind::ce;
  tc.seed = derive_seed(cfg.seed, kErmTrainStream);
  return train_model(std::move(model), data, tc, weights).model;
}

}  // namespace modad
