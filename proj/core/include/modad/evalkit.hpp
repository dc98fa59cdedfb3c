#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "modad/common.hpp"
#include "modad/synthdata.hpp"

namespace modad {

/// Accuracies in percent.
struct EvalReport {
  double average_accuracy = 0.0;
  std::optional<double> conflicting_accuracy;  // absent without conflicting samples
  std::optional<double> aligned_accuracy;
  std::vector<double> per_class_accuracy;
  std::vector<std::size_t> per_class_count;
  std::size_t samples = 0;
  std::size_t conflicting_samples = 0;
  // Run metadata.
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string model;

  std::string to_json() const;
};

EvalReport accuracy_metrics(std::span<const int> predictions, const LabeledDataset& data);

struct PcaProjection {
  Matrix components;  // E x k, orthonormal columns
  Vector mean;
  std::vector<double> explained_variance;  // nonincreasing

  Matrix project(const Matrix& x) const;
};

/// Top eigenvectors of the sample covariance; each component's first non-zero
/// coordinate is made positive.
PcaProjection pca_top_components(const Matrix& x, int num_components = 2);

/// Writes `pc1,pc2,aligned` rows.
void export_projection(const PcaProjection& projection, const Matrix& embeddings,
                       const std::vector<bool>& aligned, const std::filesystem::path& path);

/// Separation of conflicting from aligned points along each component.
struct ComponentShift {
  double aligned_mean = 0.0;
  double conflicting_mean = 0.0;
  double pooled_std = 0.0;  // sqrt((var_aligned + var_conflicting) / 2)
  double ratio = 0.0;       // |mean difference| / pooled_std
};
std::vector<ComponentShift> projection_shift(const Matrix& projected, const std::vector<bool>& aligned);

/// Per class y: top-2 PCA of the class-y training embeddings, applied to the
/// class-y test embeddings, then projection_shift. A class whose test samples
/// are all aligned or all conflicting gets an empty entry.
std::vector<std::vector<ComponentShift>> class_pca_shift(const Matrix& train_embeddings, const LabeledDataset& train,
                                                         const Matrix& test_embeddings, const LabeledDataset& test);

}  // namespace modad
