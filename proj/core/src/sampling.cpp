#include "modad/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "modad/rng.hpp"

namespace modad {

namespace {

// Prefix-sum tree over the weights; supports point updates and inverse-CDF
// lookup in O(log n).
class FenwickSampler {
 public:
  explicit FenwickSampler(const std::vector<double>& w) : tree_(w.size() + 1, 0.0) {
    for (std::size_t i = 0; i < w.size(); ++i) add(i, w[i]);
    total_ = 0.0;
    for (double v : w) total_ += v;
  }

  void add(std::size_t i, double delta) {
    for (std::size_t k = i + 1; k < tree_.size(); k += k & (~k + 1)) tree_[k] += delta;
  }

  // Smallest index whose prefix sum exceeds `target`.
  std::size_t find(double target) const {
    std::size_t pos = 0;
    std::size_t step = 1;
    while (step * 2 < tree_.size()) step *= 2;
    for (; step > 0; step /= 2) {
      if (pos + step < tree_.size() && tree_[pos + step] <= target) {
        pos += step;
        target -= tree_[pos];
      }
    }
    return std::min(pos, tree_.size() - 2);
  }

  double total() const { return total_; }
  void set_total(double t) { total_ = t; }

 private:
  std::vector<double> tree_;
  double total_ = 0.0;
};

}  // namespace

void SamplerWeights::validate() const {
  if (weights.empty()) throw ValidationError("sampler has no weights");
  bool any_positive = false;
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0) throw ValidationError("sampler weights must be finite and >= 0");
    any_positive = any_positive || w > 0.0;
  }
  if (!any_positive) throw ValidationError("sampler needs at least one positive weight");
}

SamplerWeights inverse_population_weights(std::span<const int> group_labels) {
  if (group_labels.empty()) throw ValidationError("inverse_population_weights: no groups");
  std::map<int, std::size_t> population;
  for (int g : group_labels) ++population[g];

  SamplerWeights out;
  out.weights.reserve(group_labels.size());
  for (int g : group_labels) out.weights.push_back(1.0 / static_cast<double>(population[g]));
  const std::size_t first = population.begin()->second;
  out.replacement = std::any_of(population.begin(), population.end(),
                                [first](const auto& kv) { return kv.second != first; });
  out.total = static_cast<double>(population.size());
  return out;
}

SamplerWeights uniform_weights(std::size_t n, bool replacement) {
  if (n == 0) throw ValidationError("uniform_weights: n must be >= 1");
  SamplerWeights out;
  out.weights.assign(n, 1.0);
  out.replacement = replacement;
  out.total = static_cast<double>(n);
  return out;
}

std::vector<std::size_t> draw_batch(const SamplerWeights& weights, std::size_t batch_size,
                                    std::uint64_t seed) {
  if (batch_size == 0) throw ValidationError("batch_size must be >= 1");
  weights.validate();
  const std::size_t positive = static_cast<std::size_t>(
      std::count_if(weights.weights.begin(), weights.weights.end(), [](double w) { return w > 0.0; }));
  if (!weights.replacement && batch_size > positive)
    throw ValidationError("batch_size " + std::to_string(batch_size) +
                          " exceeds the drawable population without replacement");

  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> remaining = weights.weights;
  FenwickSampler tree(remaining);
  std::vector<std::size_t> out;
  out.reserve(batch_size);
  for (std::size_t b = 0; b < batch_size; ++b) {
    std::size_t idx = tree.find(unit(rng) * tree.total());
    // Rounding can land on an exhausted slot; step to the nearest live one.
    if (remaining[idx] <= 0.0) {
      std::size_t lo = idx, hi = idx;
      while (true) {
        if (lo > 0 && remaining[--lo] > 0.0) { idx = lo; break; }
        if (hi + 1 < remaining.size() && remaining[++hi] > 0.0) { idx = hi; break; }
      }
    }
    out.push_back(idx);
    if (!weights.replacement) {
      tree.add(idx, -remaining[idx]);
      tree.set_total(tree.total() - remaining[idx]);
      remaining[idx] = 0.0;
    }
  }
  return out;
}

TrainingBatch gather_batch(const Matrix& features, std::span<const int> labels,
                           std::span<const std::size_t> indices) {
  TrainingBatch batch;
  batch.features.resize(static_cast<Eigen::Index>(indices.size()), features.cols());
  batch.labels.reserve(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    batch.features.row(static_cast<Eigen::Index>(r)) = features.row(static_cast<Eigen::Index>(indices[r]));
    batch.labels.push_back(labels[indices[r]]);
  }
  return batch;
}

TrainingBatch build_debias_batch(std::span<const std::size_t> raw_indices,
                                 const BiasSplitEstimate& estimate, const LabeledDataset& data,
                                 int k_aug, double sigma_aug, double dropout_frac,
                                 std::uint64_t seed) {
  if (k_aug < 0) throw ValidationError("k_aug must be >= 0");
  if (estimate.size() != data.size())
    throw ValidationError("estimate covers " + std::to_string(estimate.size()) + " samples, data has " +
                          std::to_string(data.size()));
  std::size_t conflicting = 0;
  for (std::size_t idx : raw_indices) {
    if (idx >= data.size()) throw ValidationError("batch index out of range");
    if (!estimate.aligned[idx]) ++conflicting;
  }
  const std::size_t total = raw_indices.size() + conflicting * static_cast<std::size_t>(k_aug);
  const int d = data.feature_dim();

  TrainingBatch batch;
  batch.features.resize(static_cast<Eigen::Index>(total), d);
  batch.labels.reserve(total);
  Eigen::Index row = 0;
  for (std::size_t idx : raw_indices) {
    const Sample& s = data.samples[idx];
    batch.features.row(row++) = Eigen::Map<const RowVector>(s.features.data(), d);
    batch.labels.push_back(s.class_label);
  }
  Rng rng(seed);
  for (std::size_t idx : raw_indices) {
    if (estimate.aligned[idx]) continue;
    for (int c = 0; c < k_aug; ++c) {
      const Sample aug = augment_sample(data.samples[idx], sigma_aug, dropout_frac, rng);
      batch.features.row(row++) = Eigen::Map<const RowVector>(aug.features.data(), d);
      batch.labels.push_back(aug.class_label);
    }
  }
  batch.raw_conflicting = conflicting;
  batch.raw_aligned = raw_indices.size() - conflicting;
  batch.augmented = conflicting * static_cast<std::size_t>(k_aug);
  return batch;
}

}  // namespace modad
