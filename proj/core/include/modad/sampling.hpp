#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "modad/common.hpp"
#include "modad/estimate.hpp"
#include "modad/synthdata.hpp"

namespace modad {

struct SamplerWeights {
  std::vector<double> weights;
  bool replacement = true;
  double total = 0.0;  // sum of weights

  std::size_t size() const { return weights.size(); }
  void validate() const;
};

/// w_i = 1 / psi_{g_i}. Replacement is on iff the groups are uneven.
SamplerWeights inverse_population_weights(std::span<const int> group_labels);
SamplerWeights uniform_weights(std::size_t n, bool replacement);

/// With replacement: i.i.d. draws proportional to the weights. Without:
/// sequential draws, each renormalised over the samples not yet taken.
std::vector<std::size_t> draw_batch(const SamplerWeights& weights, std::size_t batch_size,
                                    std::uint64_t seed);

/// A materialised mini-batch ready for the network.
struct TrainingBatch {
  Matrix features;
  std::vector<int> labels;
  std::size_t raw_aligned = 0;
  std::size_t raw_conflicting = 0;
  std::size_t augmented = 0;

  std::size_t size() const { return labels.size(); }
};

TrainingBatch gather_batch(const Matrix& features, std::span<const int> labels,
                           std::span<const std::size_t> indices);

/// Every raw sample, followed by k_aug augmented copies of each raw sample the
/// estimate marks conflicting.
TrainingBatch build_debias_batch(std::span<const std::size_t> raw_indices,
                                 const BiasSplitEstimate& estimate, const LabeledDataset& data,
                                 int k_aug, double sigma_aug, double dropout_frac,
                                 std::uint64_t seed);

}  // namespace modad
