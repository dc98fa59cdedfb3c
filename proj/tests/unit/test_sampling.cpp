#include <doctest.h>

#include <set>

#include "modad/sampling.hpp"
#include "oracles.hpp"

using namespace modad;

namespace {

// n samples in two classes; the first `conflicting` ones are conflicting.
LabeledDataset toy(std::size_t n, std::size_t conflicting) {
  LabeledDataset d;
  d.spec.num_classes = 2;
  for (std::size_t i = 0; i < n; ++i) {
    Sample s;
    s.class_label = static_cast<int>(i % 2);
    s.aligned = i >= conflicting;
    s.features = {static_cast<double>(i), -static_cast<double>(i), 1.0};
    d.samples.push_back(s);
  }
  return d;
}

std::vector<int> groups(std::size_t a, std::size_t b) {
  std::vector<int> g(a, 1);
  g.insert(g.end(), b, 0);
  return g;
}

}  // namespace

TEST_CASE("balanced groups give equal weights without replacement") {
  const auto w = inverse_population_weights(groups(50, 50));
  CHECK_FALSE(w.replacement);
  for (double v : w.weights) CHECK(v == w.weights.front());
}

TEST_CASE("populations 90 and 10 give a 1:9 weight ratio with replacement") {
  const auto w = inverse_population_weights(groups(90, 10));
  CHECK(w.replacement);
  CHECK(w.weights[95] / w.weights[0] == doctest::Approx(9.0).epsilon(1e-14));
  CHECK(w.total == doctest::Approx(2.0));
}

TEST_CASE("every group carries the same total weight") {
  std::vector<int> g;
  for (int k = 0; k < 4; ++k) g.insert(g.end(), static_cast<std::size_t>(10 + 37 * k), k);
  const auto w = inverse_population_weights(g);
  std::vector<double> mass(4, 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) mass[static_cast<std::size_t>(g[i])] += w.weights[i];
  for (double m : mass) CHECK(m == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("weighted draws make both groups equally frequent") {
  // 10^5 draws, std of each frequency 0.0016: the 1 percent band is 6 sigma.
  const auto g = groups(90, 10);
  const auto w = inverse_population_weights(g);
  const auto idx = draw_batch(w, 100000, 5);
  std::size_t minority = 0;
  for (std::size_t i : idx) minority += g[i] == 0;
  CHECK(std::abs(static_cast<double>(minority) / 1e5 - 0.5) < 0.01);
}

TEST_CASE("a single positive weight repeats its index") {
  SamplerWeights w;
  w.weights = {0.0, 0.0, 3.0, 0.0};
  w.total = 3.0;
  w.replacement = true;
  const auto idx = draw_batch(w, 17, 1);
  CHECK(idx == std::vector<std::size_t>(17, 2));
  w.replacement = false;
  CHECK(draw_batch(w, 1, 1) == std::vector<std::size_t>{2});
  CHECK_THROWS_AS(draw_batch(w, 2, 1), ValidationError);
}

TEST_CASE("uniform weights pass a chi-square test") {
  const std::size_t bins = 20, draws = 100000;
  const auto idx = draw_batch(uniform_weights(bins, true), draws, 42);
  std::vector<double> counts(bins, 0.0);
  for (std::size_t i : idx) counts[i] += 1.0;
  const double expected = static_cast<double>(draws) / bins;
  double chi2 = 0.0;
  for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
  CHECK(chi2 < oracle::chi_square_critical(bins - 1.0, 3.09));
}

TEST_CASE("draws are deterministic given the seed") {
  const auto w = inverse_population_weights(groups(30, 5));
  CHECK(draw_batch(w, 64, 9) == draw_batch(w, 64, 9));
  CHECK(draw_batch(w, 64, 9) != draw_batch(w, 64, 10));
}

TEST_CASE("draws without replacement are distinct and can cover everything") {
  SamplerWeights w = uniform_weights(50, false);
  w.weights[7] = 100.0;
  w.total += 99.0;
  const auto all = draw_batch(w, 50, 3);
  CHECK(std::set<std::size_t>(all.begin(), all.end()).size() == 50);
  const auto some = draw_batch(w, 10, 3);
  CHECK(std::set<std::size_t>(some.begin(), some.end()).size() == 10);
  CHECK_THROWS_AS(draw_batch(w, 51, 3), ValidationError);
}

TEST_CASE("heavy weights come first without replacement") {
  // Index 0 holds half the mass, so it is the first draw half of the time.
  SamplerWeights w = uniform_weights(11, false);
  w.weights[0] = 10.0;
  w.total = 20.0;
  int first = 0;
  for (std::uint64_t s = 0; s < 4000; ++s) first += draw_batch(w, 3, s).front() == 0;
  CHECK(std::abs(first / 4000.0 - 0.5) < 0.04);
}

TEST_CASE("invalid weights are rejected") {
  SamplerWeights w;
  w.weights = {1.0, -1.0};
  w.total = 0.0;
  CHECK_THROWS_AS(draw_batch(w, 1, 0), ValidationError);
  w.weights = {0.0, 0.0};
  CHECK_THROWS_AS(draw_batch(w, 1, 0), ValidationError);
  CHECK_THROWS_AS(inverse_population_weights(std::vector<int>{}), ValidationError);
}

TEST_CASE("debias batch: 16 conflicting of 32 with k_aug 3 gives 80 rows") {
  const LabeledDataset d = toy(64, 16);
  const BiasSplitEstimate est = oracle_estimate(d);
  std::vector<std::size_t> raw;
  for (std::size_t i = 0; i < 16; ++i) raw.push_back(i);
  for (std::size_t i = 40; i < 56; ++i) raw.push_back(i);
  const TrainingBatch b = build_debias_batch(raw, est, d, 3, 0.1, 0.1, 7);
  CHECK(b.size() == 80);
  CHECK(b.raw_aligned == 16);
  CHECK(b.raw_conflicting == 16);
  CHECK(b.augmented == 48);
  CHECK((b.raw_conflicting + b.augmented) == 4 * b.raw_aligned);
  CHECK(b.features.rows() == 80);
}

TEST_CASE("augmented copies keep the label of their source") {
  const LabeledDataset d = toy(12, 6);
  const BiasSplitEstimate est = oracle_estimate(d);
  const std::vector<std::size_t> raw{1, 8, 3};
  const LabeledDataset before = d;
  const TrainingBatch b = build_debias_batch(raw, est, d, 2, 0.5, 0.0, 1);
  CHECK(d == before);
  CHECK(b.size() == 3 + 2 * 2);
  for (std::size_t r = 0; r < 3; ++r) CHECK(b.labels[r] == d.samples[raw[r]].class_label);
  std::multiset<int> aug(b.labels.begin() + 3, b.labels.end());
  CHECK(aug == std::multiset<int>{1, 1, 1, 1});
}

TEST_CASE("nothing flagged conflicting leaves the raw batch unchanged") {
  const LabeledDataset d = toy(20, 0);
  const BiasSplitEstimate est = oracle_estimate(d);
  const std::vector<std::size_t> raw{4, 2, 2, 19};
  const TrainingBatch b = build_debias_batch(raw, est, d, 3, 0.1, 0.1, 3);
  const TrainingBatch plain = gather_batch(d.feature_matrix(), d.labels(), raw);
  CHECK(b.features == plain.features);
  CHECK(b.labels == plain.labels);
  CHECK(b.augmented == 0);
}

TEST_CASE("batch construction is deterministic") {
  const LabeledDataset d = toy(30, 10);
  const BiasSplitEstimate est = oracle_estimate(d);
  const std::vector<std::size_t> raw{0, 1, 2, 20, 21};
  const TrainingBatch a = build_debias_batch(raw, est, d, 3, 0.2, 0.3, 5);
  const TrainingBatch b = build_debias_batch(raw, est, d, 3, 0.2, 0.3, 5);
  CHECK(a.features == b.features);
  CHECK(a.labels == b.labels);
}

TEST_CASE("split-balanced raw batches hold as many conflicting as aligned") {
  const LabeledDataset d = toy(1000, 50);
  const BiasSplitEstimate est = oracle_estimate(d);
  SamplerWeights w = inverse_population_weights(est.group_labels());
  w.replacement = true;
  double ratio_sum = 0.0;
  for (std::uint64_t b = 0; b < 1000; ++b) {
    std::size_t conf = 0;
    for (std::size_t i : draw_batch(w, 64, b)) conf += !d.samples[i].aligned;
    ratio_sum += static_cast<double>(conf) / static_cast<double>(64 - conf);
  }
  const double mean_ratio = ratio_sum / 1000.0;
  CHECK(mean_ratio >= 0.9);
  CHECK(mean_ratio <= 1.1);
}
