#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "modad/detectors.hpp"
#include "modad/estimate.hpp"
#include "modad/netcore.hpp"
#include "modad/synthdata.hpp"

namespace modad {

enum class ThresholdMode {
  per_class_percentile,  // tau_y at the alpha_y percentile of A_y
  default_zero,          // plain sign of the detector score
};
std::string to_string(ThresholdMode mode);
ThresholdMode parse_threshold_mode(const std::string& text);

struct ClassThreshold {
  double alpha = 0.0;  // 100 * 1/2 * (psi - |C|) / psi
  double tau = 0.0;
};

/// Linear interpolation between closest ranks, rank h = (n - 1) * pct / 100.
double percentile_linear(std::span<const double> values, double pct);

ClassThreshold compute_class_threshold(std::span<const double> scores, std::size_t psi,
                                       std::size_t correct_count);

/// flag = score > tau; with alpha == 0 every sample is aligned.
std::vector<bool> classify_by_threshold(std::span<const double> scores, double tau, double alpha);

struct IdentifyConfig {
  NetworkShape network;
  TrainConfig gce{.loss = LossKind::gce, .q = 0.7, .learning_rate = 1e-3};
  DetectorConfig detector;
  ThresholdMode threshold = ThresholdMode::per_class_percentile;
  std::size_t min_fit_size = 8;
  std::uint64_t seed = 0;  // model initialisation and sampler
};

/// Class-balanced sampler, fresh network, GCE training.
MlpModel train_gce_model(const LabeledDataset& data, const IdentifyConfig& cfg);

/// Embeddings, one detector per class fitted on C_y, scores, thresholds, flags.
/// `fitted`, when given, receives the per-class detectors in class order.
BiasSplitEstimate identify_with_model(const MlpModel& gce_model, const LabeledDataset& data,
                                      const IdentifyConfig& cfg, std::vector<DetectorModel>* fitted = nullptr);

/// train_gce_model followed by identify_with_model.
BiasSplitEstimate run_bias_identification(const LabeledDataset& data, const IdentifyConfig& cfg);

struct JttConfig {
  NetworkShape network;
  TrainConfig ce{.loss = LossKind::ce, .learning_rate = 1e-3, .epochs = 1};
  std::uint64_t seed = 0;
};

/// Misclassified = conflicting.
BiasSplitEstimate estimate_from_correctness(const std::vector<bool>& correct, const LabeledDataset& data);
BiasSplitEstimate jtt_identify(const LabeledDataset& data, const JttConfig& cfg);

struct F1Report {
  std::vector<double> per_class;
  double mean = 0.0;
  double stddev = 0.0;  // population std across classes
};

/// Positive class = conflicting. A class without ground-truth conflicting
/// samples scores 1 if nothing was flagged there, else 0.
F1Report bias_f1(const BiasSplitEstimate& estimate, const LabeledDataset& data);

}  // namespace modad
