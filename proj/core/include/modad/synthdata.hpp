#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "modad/common.hpp"
#include "modad/rng.hpp"

namespace modad {

enum class SplitTag { train, val, test };
enum class TestBiasMode { same_rho, uniform, conflicting_heavy };

std::string to_string(SplitTag tag);
SplitTag parse_split_tag(const std::string& text);
std::string to_string(TestBiasMode mode);
TestBiasMode parse_test_bias_mode(const std::string& text);

// Synthetic biased data: every sample is [signal block | bias block]. The
// signal block is centred on the class centroid, the bias block on the centroid
// of the sample's bias attribute. Class y is paired with attribute y mod A.
struct DatasetSpec {
  int num_classes = 10;
  int num_bias_attributes = 0;  // 0 means "same as num_classes"
  int signal_dim = 10;
  int bias_dim = 10;
  double rho = 0.95;
  int samples_per_class = 500;
  double class_separation = 2.0;
  double bias_separation = 4.0;
  double noise_std = 1.0;
  std::uint64_t seed = 0;

  int attributes() const { return num_bias_attributes > 0 ? num_bias_attributes : num_classes; }
  int feature_dim() const { return signal_dim + bias_dim; }
  int matched_attribute(int class_label) const { return class_label % attributes(); }
  void validate() const;

  bool operator==(const DatasetSpec&) const = default;
};

struct Sample {
  std::vector<double> features;
  int class_label = 0;
  int bias_attribute = 0;
  bool aligned = true;

  bool operator==(const Sample&) const = default;
};

struct LabeledDataset {
  std::vector<Sample> samples;
  DatasetSpec spec;
  SplitTag split_tag = SplitTag::train;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  int feature_dim() const;
  int num_classes() const;

  Matrix feature_matrix() const;
  std::vector<int> labels() const;
  std::vector<bool> aligned_flags() const;
  /// psi_y for y in [0, num_classes()).
  std::vector<std::size_t> class_populations() const;
  double aligned_fraction() const;

  bool operator==(const LabeledDataset&) const = default;
};

/// Class and attribute centroids implied by a DatasetSpec; deterministic in its fields.
struct BiasGeometry {
  Matrix class_centroids;      // K x signal_dim
  Matrix attribute_centroids;  // A x bias_dim

  static BiasGeometry from_spec(const DatasetSpec& spec);
};

LabeledDataset generate_biased_dataset(const DatasetSpec& spec);

struct DatasetSplits {
  LabeledDataset train;
  LabeledDataset val;
  LabeledDataset test;
};

/// Shuffles and partitions the population. Train/val keep their samples; the
/// test part has its bias attributes and bias blocks redrawn according to
/// `test_bias_mode` (same_rho keeps them as generated).
DatasetSplits split_dataset(const LabeledDataset& data, double train_frac, double val_frac,
                            TestBiasMode test_bias_mode);

void write_dataset(const LabeledDataset& data, const std::filesystem::path& path);
LabeledDataset read_dataset(const std::filesystem::path& path);

/// Gaussian jitter of std `sigma_aug` plus zeroing of round(dropout_frac * d)
/// randomly chosen coordinates. Labels and flags are copied unchanged.
Sample augment_sample(const Sample& x, double sigma_aug, double dropout_frac, Rng& rng);
Sample augment_sample(const Sample& x, double sigma_aug, double dropout_frac, std::uint64_t seed);

/// Mean over coordinates of the per-coordinate standard deviation.
double pooled_feature_std(const LabeledDataset& data);

}  // namespace modad
