#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "modad/biasid.hpp"
#include "modad/rng.hpp"
#include "oracles.hpp"

using namespace modad;

namespace {

// One sample per entry: (class, truly aligned).
LabeledDataset hand_dataset(const std::vector<std::pair<int, bool>>& rows, int k) {
  LabeledDataset d;
  d.spec.num_classes = k;
  for (const auto& [y, aligned] : rows) {
    Sample s;
    s.class_label = y;
    s.aligned = aligned;
    s.features = {static_cast<double>(y)};
    d.samples.push_back(s);
  }
  return d;
}

IdentifyConfig small_identify(std::uint64_t seed) {
  IdentifyConfig c;
  c.network = NetworkShape{{16}, 8};
  c.gce.epochs = 5;
  c.gce.batch_size = 32;
  c.seed = seed;
  return c;
}

LabeledDataset small_biased(std::uint64_t seed) {
  DatasetSpec s;
  s.num_classes = 3;
  s.signal_dim = 3;
  s.bias_dim = 3;
  s.rho = 0.9;
  s.samples_per_class = 120;
  s.class_separation = 1.5;
  s.seed = seed;
  return generate_biased_dataset(s);
}

}  // namespace

TEST_CASE("percentile budget from population and correct count") {
  const std::vector<double> scores{0.0, 1.0, 2.0, 3.0};
  CHECK(compute_class_threshold(scores, 100, 80).alpha == doctest::Approx(10.0));
  CHECK(compute_class_threshold(scores, 40, 22).alpha == doctest::Approx(22.5));
  CHECK(compute_class_threshold(scores, 10, 0).alpha == doctest::Approx(50.0));
  const ClassThreshold none = compute_class_threshold(scores, 10, 10);
  CHECK(none.alpha == 0.0);
  CHECK(none.tau == 0.0);
  CHECK_THROWS_AS(compute_class_threshold(scores, 10, 11), ValidationError);
  CHECK_THROWS_AS(compute_class_threshold(std::vector<double>{}, 10, 5), ValidationError);
}

TEST_CASE("linear percentile agrees with a sort-and-interpolate reference") {
  Rng rng(3);
  std::normal_distribution<double> nd(0.0, 2.0);
  for (int n : {1, 2, 7, 50, 333}) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (double& x : v) x = nd(rng);
    for (double p : {0.0, 5.0, 22.5, 50.0, 73.1, 100.0}) CHECK(percentile_linear(v, p) == doctest::Approx(oracle::percentile(v, p)).epsilon(1e-14));
  }
  CHECK_THROWS_AS(percentile_linear(std::vector<double>{1.0}, 101.0), ValidationError);
}

TEST_CASE("zero budget puts tau at the minimum and flags nothing") {
  const std::vector<double> scores{0.4, -1.0, 2.0, -3.5};
  const ClassThreshold t = compute_class_threshold(scores, 4, 4);
  CHECK(t.tau == -3.5);
  const auto flags = classify_by_threshold(scores, t.tau, t.alpha);
  CHECK(std::all_of(flags.begin(), flags.end(), [](bool b) { return b; }));
}

TEST_CASE("a score equal to tau is conflicting") {
  const std::vector<double> scores{1.0, 2.0, 3.0};
  const auto flags = classify_by_threshold(scores, 2.0, 25.0);
  CHECK(flags == std::vector<bool>{false, false, true});
}

TEST_CASE("flag count tracks the percentile") {
  Rng rng(8);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> scores(1000);
  for (double& s : scores) s = u(rng);
  for (std::size_t correct : {1000u, 900u, 700u, 500u, 123u, 0u}) {
    const ClassThreshold t = compute_class_threshold(scores, 1000, correct);
    const auto flags = classify_by_threshold(scores, t.tau, t.alpha);
    const auto conflicting = static_cast<double>(std::count(flags.begin(), flags.end(), false));
    CAPTURE(correct);
    CHECK(std::abs(conflicting - t.alpha / 100.0 * 1000.0) <= 1.0);
  }
}

TEST_CASE("fewer correct samples never flags fewer conflicting") {
  Rng rng(9);
  std::normal_distribution<double> nd;
  std::vector<double> scores(200);
  for (double& s : scores) s = nd(rng);
  std::size_t prev = 0;
  for (std::size_t correct = 200; correct-- > 0;) {
    const ClassThreshold t = compute_class_threshold(scores, 200, correct);
    const auto flags = classify_by_threshold(scores, t.tau, t.alpha);
    const auto n = static_cast<std::size_t>(std::count(flags.begin(), flags.end(), false));
    CHECK(n >= prev);
    prev = n;
  }
}

TEST_CASE("F1 on a hand-built split") {
  // Class 0: truth {0,1}, flagged {1,2} -> F1 0.5. Class 1: exact -> 1.
  // Class 2: nothing to find and nothing flagged -> 1.
  const auto d = hand_dataset({{0, false}, {0, false}, {0, true}, {0, true},
                               {1, false}, {1, true}, {1, true}, {1, true},
                               {2, true}, {2, true}, {2, true}, {2, true}},
                              3);
  BiasSplitEstimate est;
  est.aligned = {true, false, false, true, false, true, true, true, true, true, true, true};
  const F1Report r = bias_f1(est, d);
  REQUIRE(r.per_class.size() == 3);
  CHECK(r.per_class[0] == doctest::Approx(0.5));
  CHECK(r.per_class[1] == doctest::Approx(1.0));
  CHECK(r.per_class[2] == doctest::Approx(1.0));
  CHECK(r.mean == doctest::Approx(2.5 / 3.0));
  const double m = 2.5 / 3.0;
  CHECK(r.stddev == doctest::Approx(std::sqrt(((0.5 - m) * (0.5 - m) + 2.0 * (1.0 - m) * (1.0 - m)) / 3.0)));

  // A false alarm in a class without conflicting samples scores 0 there.
  est.aligned[9] = false;
  CHECK(bias_f1(est, d).per_class[2] == 0.0);
  CHECK(bias_f1(oracle_estimate(d), d).mean == 1.0);
}

TEST_CASE("misclassified samples become the conflicting set") {
  const auto d = hand_dataset({{0, true}, {0, false}, {1, true}, {1, true}, {1, false}}, 2);
  const std::vector<bool> correct{true, false, true, false, false};
  const BiasSplitEstimate est = estimate_from_correctness(correct, d);
  CHECK(est.aligned == correct);
  CHECK(est.method == "jtt");
  CHECK(est.conflicting_count() == 3);
  REQUIRE(est.classes.size() == 2);
  CHECK(est.classes[1].population == 3);
  CHECK(est.classes[1].correct_count == 1);
  CHECK(est.classes[1].flagged_conflicting == 2);
  CHECK_THROWS_AS(estimate_from_correctness({true}, d), ValidationError);
}

TEST_CASE("identification bookkeeping is consistent") {
  const auto d = small_biased(4);
  const IdentifyConfig cfg = small_identify(1);
  const MlpModel gce = train_gce_model(d, cfg);
  std::vector<DetectorModel> fitted;
  const BiasSplitEstimate est = identify_with_model(gce, d, cfg, &fitted);
  REQUIRE(est.classes.size() == 3);
  CHECK(fitted.size() == 3);
  CHECK(est.size() == d.size());
  const Predictions pred = predict_with_correctness(gce, d);
  std::size_t flagged = 0;
  for (const auto& c : est.classes) {
    std::size_t correct = 0, members = 0, conf = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (d.samples[i].class_label != c.class_id) continue;
      ++members;
      correct += pred.correct[i];
      conf += !est.aligned[i];
    }
    CHECK(c.population == members);
    CHECK(c.correct_count == correct);
    CHECK(c.flagged_conflicting == conf);
    CHECK(c.scores.size() == members);
    CHECK(c.alpha == doctest::Approx(50.0 * static_cast<double>(members - correct) / static_cast<double>(members)));
    CHECK(static_cast<double>(conf) <= c.alpha / 100.0 * static_cast<double>(members) + 1.0);
    flagged += conf;
  }
  CHECK(flagged == est.conflicting_count());
}

TEST_CASE("identification does not depend on sample order") {
  const auto d = small_biased(5);
  const IdentifyConfig cfg = small_identify(2);
  const MlpModel gce = train_gce_model(d, cfg);
  const BiasSplitEstimate est = identify_with_model(gce, d, cfg);

  std::vector<std::size_t> perm(d.size());
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(6);
  std::shuffle(perm.begin(), perm.end(), rng);
  LabeledDataset shuffled = d;
  for (std::size_t i = 0; i < perm.size(); ++i) shuffled.samples[i] = d.samples[perm[i]];
  const BiasSplitEstimate est2 = identify_with_model(gce, shuffled, cfg);
  for (std::size_t i = 0; i < perm.size(); ++i) CHECK(est2.aligned[i] == est.aligned[perm[i]]);
}

TEST_CASE("default-zero threshold uses the detector sign") {
  const auto d = small_biased(6);
  IdentifyConfig cfg = small_identify(3);
  cfg.threshold = ThresholdMode::default_zero;
  const MlpModel gce = train_gce_model(d, cfg);
  const BiasSplitEstimate est = identify_with_model(gce, d, cfg);
  for (const auto& c : est.classes) {
    CHECK(c.tau == 0.0);
    const auto neg = static_cast<std::size_t>(std::count_if(c.scores.begin(), c.scores.end(), [](double s) { return s <= 0.0; }));
    CHECK(c.flagged_conflicting == neg);
  }
}

TEST_CASE("small correct sets fall back to the whole class") {
  const auto d = small_biased(7);
  IdentifyConfig cfg = small_identify(4);
  cfg.min_fit_size = 100000;
  const BiasSplitEstimate est = run_bias_identification(d, cfg);
  for (const auto& c : est.classes) CHECK(c.fit_fallback);
}

TEST_CASE("identification is deterministic") {
  const auto d = small_biased(8);
  const IdentifyConfig cfg = small_identify(5);
  CHECK(run_bias_identification(d, cfg).aligned == run_bias_identification(d, cfg).aligned);
  JttConfig j;
  j.network = cfg.network;
  j.seed = 5;
  const BiasSplitEstimate a = jtt_identify(d, j);
  CHECK(a.aligned == jtt_identify(d, j).aligned);
  CHECK(a.jtt_epochs == 1);
}
