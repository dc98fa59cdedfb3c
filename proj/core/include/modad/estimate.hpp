#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace modad {

struct LabeledDataset;

/// Per-class record of the identification step.
struct ClassDiagnostics {
  int class_id = 0;
  std::size_t population = 0;     // psi_y
  std::size_t correct_count = 0;  // |C_y|
  double alpha = 0.0;             // percentile in [0, 50]
  double tau = 0.0;               // score threshold
  std::size_t flagged_conflicting = 0;
  bool fit_fallback = false;  // detector fitted on all class samples, not C_y
  bool zero_budget = false;   // alpha == 0, every sample flagged aligned
  bool regularized = false;   // detector needed a ridge on its covariance
  std::vector<double> scores;  // A_y, in dataset order of the class-y samples
};

/// The estimated split: one flag per training sample (true = bias-aligned).
struct BiasSplitEstimate {
  std::vector<bool> aligned;
  std::vector<ClassDiagnostics> classes;
  std::string method;  // "ocsvm", "lof", "iforest", "robustcov", "jtt", "oracle", ...
  int jtt_epochs = 0;

  std::size_t size() const { return aligned.size(); }
  std::size_t conflicting_count() const;
  std::vector<int> group_labels() const;  // 1 = aligned, 0 = conflicting
};

/// Ground-truth flags of a synthetic dataset as an estimate.
BiasSplitEstimate oracle_estimate(const LabeledDataset& data);
/// Swaps aligned and conflicting.
BiasSplitEstimate inverted_estimate(const BiasSplitEstimate& estimate);

/// Writes `sample_index,aligned_pred` rows to `csv_path` and the diagnostics
/// (without raw scores) as JSON to `json_path`.
void write_estimate(const BiasSplitEstimate& estimate, const std::filesystem::path& csv_path,
                    const std::filesystem::path& json_path);
BiasSplitEstimate read_estimate(const std::filesystem::path& csv_path,
                                const std::filesystem::path& json_path);

}  // namespace modad
