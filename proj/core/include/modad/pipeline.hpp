#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "modad/biasid.hpp"
#include "modad/debias.hpp"
#include "modad/detectors.hpp"
#include "modad/estimate.hpp"
#include "modad/evalkit.hpp"
#include "modad/netcore.hpp"
#include "modad/synthdata.hpp"

namespace modad {

/// Failure inside a named pipeline stage ("data", "train-erm", "identify", ...).
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& cause)
      : Error("[" + stage + "] " + cause), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

/// Where the data comes from. With no paths a population is generated from
/// `spec` and split; `dataset_path` is a full population to split; the
/// train/test paths are used as given (val is optional).
struct DataSource {
  DatasetSpec spec;
  std::optional<std::filesystem::path> dataset_path;
  std::optional<std::filesystem::path> train_path;
  std::optional<std::filesystem::path> val_path;
  std::optional<std::filesystem::path> test_path;
  double train_frac = 0.8;
  double val_frac = 0.1;
  TestBiasMode test_bias_mode = TestBiasMode::uniform;
};

struct RunConfig {
  DataSource data;
  NetworkShape network;
  TrainConfig erm{.loss = LossKind::ce, .learning_rate = 1e-3};
  TrainConfig gce{.loss = LossKind::gce, .q = 0.7, .learning_rate = 1e-3};
  DebiasConfig debias;
  DetectorConfig detector;
  ThresholdMode threshold = ThresholdMode::per_class_percentile;
  std::size_t min_fit_size = 8;
  bool run_jtt = true;
  int jtt_epochs = 1;
  std::vector<std::uint64_t> seeds{0};
  std::filesystem::path output_dir = "modad_out";
  bool overwrite = false;

  /// Checks values and that every input path exists.
  void validate() const;
};

/// Strict parse: unknown keys are rejected, missing keys keep their defaults.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::filesystem::path& path);
/// Canonical JSON with every field spelled out.
std::string run_config_to_json(const RunConfig& cfg);
/// 16 hex digits of FNV-1a over the canonical JSON, ignoring seeds and output
/// settings.
std::string config_hash(const RunConfig& cfg);

struct LoadedData {
  LabeledDataset train;
  LabeledDataset val;
  LabeledDataset test;
};

LoadedData load_data(const RunConfig& cfg);

ErmConfig erm_config(const RunConfig& cfg, std::uint64_t seed);
IdentifyConfig identify_config(const RunConfig& cfg, std::uint64_t seed);
JttConfig jtt_config(const RunConfig& cfg, std::uint64_t seed);
DebiasConfig debias_config(const RunConfig& cfg, std::uint64_t seed);

/// Models shared by every variant of one seed.
struct SeedContext {
  std::uint64_t seed = 0;
  MlpModel erm;
  MlpModel gce;
};

SeedContext prepare_seed(const RunConfig& cfg, const LoadedData& data, std::uint64_t seed);

EvalReport evaluate_model(const MlpModel& model, const LabeledDataset& test, std::uint64_t seed,
                          const std::string& hash, const std::string& label);

struct VariantOutcome {
  DebiasResult debiased;
  EvalReport report;
};

/// Fine-tunes the context's ERM or GCE model on `estimate` and evaluates it.
VariantOutcome debias_and_evaluate(const RunConfig& cfg, const LoadedData& data, const SeedContext& ctx,
                                   const BiasSplitEstimate& estimate, InputModelKind input,
                                   const std::string& label);

struct MetricSummary {
  double mean = 0.0;
  double stddev = 0.0;  // population std over seeds
  std::size_t count = 0;
};
MetricSummary summarize(const std::vector<double>& values);

struct SeedOutcome {
  std::uint64_t seed = 0;
  EvalReport erm;
  EvalReport debiased;
  BiasSplitEstimate estimate;
  F1Report f1;
  std::optional<BiasSplitEstimate> jtt_estimate;
  std::optional<F1Report> jtt_f1;
  // class_pca_shift of the GCE embeddings (empty when a class lacks a group).
  std::vector<std::vector<ComponentShift>> class_projection_shift;
};

struct PipelineResult {
  std::string config_hash;
  std::filesystem::path output_dir;
  std::vector<SeedOutcome> seeds;
  MetricSummary erm_average, erm_conflicting;
  MetricSummary debiased_average, debiased_conflicting;
  MetricSummary f1;
  std::optional<MetricSummary> jtt_f1;

  std::string summary_json() const;
};

/// Full run for every seed. Writes datasets, checkpoints, detectors, estimates,
/// reports, logs and a projection under `output_dir` (one subdirectory per
/// seed). Refuses a non-empty output directory unless `overwrite` is set.
PipelineResult run_pipeline(const RunConfig& cfg);

enum class AblationKind { detector, threshold, input_model, unbiased, jtt };
std::string to_string(AblationKind kind);
AblationKind parse_ablation_kind(const std::string& text);

struct AblationRow {
  std::string variant;
  std::vector<double> average;      // per seed
  std::vector<double> conflicting;  // per seed; NaN when the test set has none
  std::vector<double> f1;           // per seed; empty when not applicable
  MetricSummary average_summary, conflicting_summary;
  std::optional<MetricSummary> f1_summary;
};

struct AblationReport {
  AblationKind kind = AblationKind::detector;
  std::string config_hash;
  std::vector<std::uint64_t> seeds;
  std::vector<AblationRow> rows;

  const AblationRow* find(const std::string& variant) const;
  std::string to_json() const;
  std::string to_table() const;
};

/// Runs the variants of one ablation for every seed. Writes
/// `ablation_<kind>.json` when `write_report` is set.
AblationReport run_ablation(const RunConfig& cfg, AblationKind kind, bool write_report = true);

// Single-stage commands operating on `cfg.output_dir`, for step-by-step use.
// Each reads what earlier stages wrote there.
void step_gen_data(const RunConfig& cfg);
void step_train_erm(const RunConfig& cfg, std::uint64_t seed);
void step_train_gce(const RunConfig& cfg, std::uint64_t seed);
void step_identify(const RunConfig& cfg, std::uint64_t seed);
void step_debias(const RunConfig& cfg, std::uint64_t seed);
/// Evaluates every checkpoint present and returns the reports.
std::vector<EvalReport> step_evaluate(const RunConfig& cfg, std::uint64_t seed);

}  // namespace modad
