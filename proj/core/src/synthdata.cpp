#include "modad/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace modad {

namespace {

constexpr std::uint64_t kGenerateStream = 11;
constexpr std::uint64_t kGeometryStream = 12;
constexpr std::uint64_t kShuffleStream = 21;
constexpr std::uint64_t kTestStream = 22;

// Equidistant centroids (pairwise distance == separation) when dim >= count,
// otherwise random directions scaled to the same norm.
Matrix make_centroids(int count, int dim, double separation, Rng& rng) {
  Matrix centroids = Matrix::Zero(count, dim);
  const double radius = separation / std::sqrt(2.0);
  if (dim >= count) {
    for (int k = 0; k < count; ++k) centroids(k, k) = radius;
    return centroids;
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int k = 0; k < count; ++k) {
    for (int j = 0; j < dim; ++j) centroids(k, j) = normal(rng);
    const double norm = centroids.row(k).norm();
    if (norm > 0.0) centroids.row(k) *= radius / norm;
  }
  return centroids;
}

int draw_attribute(const DatasetSpec& spec, int class_label, double aligned_prob, Rng& rng) {
  const int attrs = spec.attributes();
  const int matched = spec.matched_attribute(class_label);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (attrs == 1 || unit(rng) < aligned_prob) return matched;
  std::uniform_int_distribution<int> other(0, attrs - 2);
  int attr = other(rng);
  if (attr >= matched) ++attr;
  return attr;
}

void fill_block(std::vector<double>& features, int offset, const auto& centroid, double noise_std,
                Rng& rng) {
  std::normal_distribution<double> noise(0.0, noise_std);
  for (Eigen::Index j = 0; j < centroid.size(); ++j) {
    features[static_cast<std::size_t>(offset + j)] = centroid(j) + noise(rng);
  }
}

}  // namespace

std::string to_string(SplitTag tag) {
  switch (tag) {
    case SplitTag::train: return "train";
    case SplitTag::val: return "val";
    case SplitTag::test: return "test";
  }
  return "train";
}

SplitTag parse_split_tag(const std::string& text) {
  if (text == "train") return SplitTag::train;
  if (text == "val") return SplitTag::val;
  if (text == "test") return SplitTag::test;
  throw ValidationError("unknown split tag '" + text + "'");
}

std::string to_string(TestBiasMode mode) {
  switch (mode) {
    case TestBiasMode::same_rho: return "same_rho";
    case TestBiasMode::uniform: return "uniform";
    case TestBiasMode::conflicting_heavy: return "conflicting_heavy";
  }
  return "uniform";
}

TestBiasMode parse_test_bias_mode(const std::string& text) {
  if (text == "same_rho") return TestBiasMode::same_rho;
  if (text == "uniform") return TestBiasMode::uniform;
  if (text == "conflicting_heavy") return TestBiasMode::conflicting_heavy;
  throw ValidationError("unknown test bias mode '" + text + "'");
}

void DatasetSpec::validate() const {
  if (num_classes < 2) throw ValidationError("num_classes must be >= 2");
  if (num_bias_attributes < 0) throw ValidationError("num_bias_attributes must be >= 1");
  if (signal_dim < 1 || bias_dim < 1) throw ValidationError("signal_dim and bias_dim must be >= 1");
  if (!(rho >= 0.0 && rho <= 1.0)) throw ValidationError("rho must lie in [0, 1]");
  if (samples_per_class < 1) throw ValidationError("samples_per_class must be >= 1");
  if (!(class_separation > 0.0) || !(bias_separation > 0.0))
    throw ValidationError("separations must be positive");
  if (!(noise_std > 0.0)) throw ValidationError("noise_std must be positive");
  if (attributes() < 2 && rho < 1.0)
    throw ValidationError("rho < 1 needs at least two bias attributes");
}

int LabeledDataset::feature_dim() const {
  if (!samples.empty()) return static_cast<int>(samples.front().features.size());
  return spec.feature_dim();
}

int LabeledDataset::num_classes() const {
  int k = spec.num_classes;
  for (const auto& s : samples) k = std::max(k, s.class_label + 1);
  return k;
}

Matrix LabeledDataset::feature_matrix() const {
  Matrix x(static_cast<Eigen::Index>(samples.size()), feature_dim());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& f = samples[i].features;
    if (static_cast<int>(f.size()) != x.cols()) throw ShapeError("ragged feature rows");
    x.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const RowVector>(f.data(), x.cols());
  }
  return x;
}

std::vector<int> LabeledDataset::labels() const {
  std::vector<int> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.class_label);
  return out;
}

std::vector<bool> LabeledDataset::aligned_flags() const {
  std::vector<bool> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.aligned);
  return out;
}

std::vector<std::size_t> LabeledDataset::class_populations() const {
  std::vector<std::size_t> psi(static_cast<std::size_t>(num_classes()), 0);
  for (const auto& s : samples) ++psi[static_cast<std::size_t>(s.class_label)];
  return psi;
}

double LabeledDataset::aligned_fraction() const {
  if (samples.empty()) return 0.0;
  const auto n = std::count_if(samples.begin(), samples.end(), [](const Sample& s) { return s.aligned; });
  return static_cast<double>(n) / static_cast<double>(samples.size());
}

BiasGeometry BiasGeometry::from_spec(const DatasetSpec& spec) {
  Rng rng(derive_seed(spec.seed, kGeometryStream));
  BiasGeometry g;
  g.class_centroids = make_centroids(spec.num_classes, spec.signal_dim, spec.class_separation, rng);
  g.attribute_centroids = make_centroids(spec.attributes(), spec.bias_dim, spec.bias_separation, rng);
  return g;
}

LabeledDataset generate_biased_dataset(const DatasetSpec& spec) {
  spec.validate();
  const BiasGeometry geometry = BiasGeometry::from_spec(spec);
  Rng rng(derive_seed(spec.seed, kGenerateStream));

  LabeledDataset data;
  data.spec = spec;
  data.split_tag = SplitTag::train;
  data.samples.reserve(static_cast<std::size_t>(spec.num_classes) * spec.samples_per_class);
  for (int y = 0; y < spec.num_classes; ++y) {
    for (int i = 0; i < spec.samples_per_class; ++i) {
      Sample s;
      s.class_label = y;
      s.bias_attribute = draw_attribute(spec, y, spec.rho, rng);
      s.aligned = s.bias_attribute == spec.matched_attribute(y);
      s.features.assign(static_cast<std::size_t>(spec.feature_dim()), 0.0);
      fill_block(s.features, 0, geometry.class_centroids.row(y), spec.noise_std, rng);
      fill_block(s.features, spec.signal_dim, geometry.attribute_centroids.row(s.bias_attribute),
                 spec.noise_std, rng);
      data.samples.push_back(std::move(s));
    }
  }
  return data;
}

DatasetSplits split_dataset(const LabeledDataset& data, double train_frac, double val_frac,
                            TestBiasMode test_bias_mode) {
  if (!(train_frac > 0.0) || !(val_frac >= 0.0) || !(train_frac + val_frac < 1.0))
    throw ValidationError("split fractions need train_frac > 0, val_frac >= 0, train_frac + val_frac < 1");
  const std::size_t n = data.size();
  const auto n_train = static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(std::llround(val_frac * static_cast<double>(n)));
  if (n_train == 0 || (val_frac > 0.0 && n_val == 0) || n_train + n_val >= n)
    throw ValidationError("split of " + std::to_string(n) + " samples leaves an empty partition");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng shuffle_rng(derive_seed(data.spec.seed, kShuffleStream));
  std::shuffle(order.begin(), order.end(), shuffle_rng);

  DatasetSplits out;
  for (LabeledDataset* part : {&out.train, &out.val, &out.test}) part->spec = data.spec;
  out.train.split_tag = SplitTag::train;
  out.val.split_tag = SplitTag::val;
  out.test.split_tag = SplitTag::test;

  for (std::size_t i = 0; i < n; ++i) {
    const Sample& s = data.samples[order[i]];
    if (i < n_train) out.train.samples.push_back(s);
    else if (i < n_train + n_val) out.val.samples.push_back(s);
    else out.test.samples.push_back(s);
  }

  if (test_bias_mode != TestBiasMode::same_rho) {
    const DatasetSpec& spec = data.spec;
    const BiasGeometry geometry = BiasGeometry::from_spec(spec);
    Rng rng(derive_seed(spec.seed, kTestStream));
    for (Sample& s : out.test.samples) {
      if (test_bias_mode == TestBiasMode::uniform) {
        std::uniform_int_distribution<int> any(0, spec.attributes() - 1);
        s.bias_attribute = any(rng);
      } else {
        s.bias_attribute = draw_attribute(spec, s.class_label, 0.10, rng);
      }
      s.aligned = s.bias_attribute == spec.matched_attribute(s.class_label);
      fill_block(s.features, spec.signal_dim, geometry.attribute_centroids.row(s.bias_attribute),
                 spec.noise_std, rng);
    }
  }
  return out;
}

Sample augment_sample(const Sample& x, double sigma_aug, double dropout_frac, Rng& rng) {
  if (!(sigma_aug >= 0.0)) throw ValidationError("sigma_aug must be >= 0");
  if (!(dropout_frac >= 0.0 && dropout_frac < 1.0))
    throw ValidationError("dropout_frac must lie in [0, 1)");
  Sample out = x;
  if (sigma_aug > 0.0) {
    std::normal_distribution<double> jitter(0.0, sigma_aug);
    for (double& v : out.features) v += jitter(rng);
  }
  const std::size_t d = out.features.size();
  const auto drops = static_cast<std::size_t>(std::llround(dropout_frac * static_cast<double>(d)));
  if (drops > 0) {
    // Partial Fisher-Yates picks `drops` distinct coordinates.
    std::vector<std::size_t> idx(d);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < drops; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, d - 1);
      std::swap(idx[i], idx[pick(rng)]);
      out.features[idx[i]] = 0.0;
    }
  }
  return out;
}

Sample augment_sample(const Sample& x, double sigma_aug, double dropout_frac, std::uint64_t seed) {
  Rng rng(seed);
  return augment_sample(x, sigma_aug, dropout_frac, rng);
}

double pooled_feature_std(const LabeledDataset& data) {
  if (data.size() < 2) return 0.0;
  const Matrix x = data.feature_matrix();
  const RowVector mean = x.colwise().mean();
  const RowVector var = (x.rowwise() - mean).array().square().colwise().sum() / static_cast<double>(x.rows() - 1);
  return var.array().sqrt().mean();
}

}  // namespace modad
