#include "modad/biasid.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "modad/rng.hpp"

namespace modad {

namespace {

constexpr std::uint64_t kGceInitStream = 31;
constexpr std::uint64_t kGceTrainStream = 32;
constexpr std::uint64_t kDetectorStream = 100;
constexpr std::uint64_t kJttInitStream = 41;
constexpr std::uint64_t kJttTrainStream = 42;

std::vector<std::vector<std::size_t>> indices_by_class(const LabeledDataset& data, int k) {
  std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < data.size(); ++i)
    out[static_cast<std::size_t>(data.samples[i].class_label)].push_back(i);
  return out;
}

Matrix gather_rows(const Matrix& m, const std::vector<std::size_t>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t r = 0; r < rows.size(); ++r)
    out.row(static_cast<Eigen::Index>(r)) = m.row(static_cast<Eigen::Index>(rows[r]));
  return out;
}

}  // namespace

std::string to_string(ThresholdMode mode) {
  return mode == ThresholdMode::per_class_percentile ? "per_class_percentile" : "default_zero";
}

ThresholdMode parse_threshold_mode(const std::string& text) {
  if (text == "per_class_percentile" || text == "custom") return ThresholdMode::per_class_percentile;
  if (text == "default_zero" || text == "default") return ThresholdMode::default_zero;
  throw ValidationError("unknown threshold mode '" + text + "'");
}

double percentile_linear(std::span<const double> values, double pct) {
  if (values.empty()) throw ValidationError("percentile of an empty set");
  if (!(pct >= 0.0 && pct <= 100.0)) throw ValidationError("percentile must lie in [0, 100]");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double h = static_cast<double>(sorted.size() - 1) * pct / 100.0;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

ClassThreshold compute_class_threshold(std::span<const double> scores, std::size_t psi,
                                       std::size_t correct_count) {
  if (scores.empty()) throw ValidationError("compute_class_threshold: empty scores");
  if (psi == 0 || correct_count > psi)
    throw ValidationError("compute_class_threshold: need 0 <= |C_y| <= psi_y and psi_y > 0");
  ClassThreshold t;
  t.alpha = 100.0 * 0.5 * (static_cast<double>(psi - correct_count) / static_cast<double>(psi));
  t.tau = percentile_linear(scores, t.alpha);
  return t;
}

std::vector<bool> classify_by_threshold(std::span<const double> scores, double tau, double alpha) {
  std::vector<bool> flags(scores.size(), true);
  if (alpha == 0.0) return flags;
  for (std::size_t i = 0; i < scores.size(); ++i) flags[i] = scores[i] > tau;
  return flags;
}

MlpModel train_gce_model(const LabeledDataset& data, const IdentifyConfig& cfg) {
  if (data.empty()) throw ValidationError("bias identification needs a nonempty training split");
  const std::vector<int> labels = data.labels();
  const SamplerWeights weights = inverse_population_weights(labels);
  MlpModel model = init_mlp(data.feature_dim(), cfg.network, data.num_classes(),
                            derive_seed(cfg.seed, kGceInitStream));
  TrainConfig tc = cfg.gce;
  tc.loss = LossKind::gce;
  tc.seed = derive_seed(cfg.seed, kGceTrainStream);
  return train_model(std::move(model), data, tc, weights).model;
}

BiasSplitEstimate identify_with_model(const MlpModel& gce_model, const LabeledDataset& data,
                                      const IdentifyConfig& cfg, std::vector<DetectorModel>* fitted) {
  const int k = data.num_classes();
  if (fitted) fitted->clear();
  const Predictions pred = predict_with_correctness(gce_model, data);
  const auto by_class = indices_by_class(data, k);

  BiasSplitEstimate est;
  est.method = to_string(cfg.detector.kind);
  est.aligned.assign(data.size(), true);
  for (int y = 0; y < k; ++y) {
    const auto& members = by_class[static_cast<std::size_t>(y)];
    if (members.empty()) throw ValidationError("class " + std::to_string(y) + " has no training samples");

    ClassDiagnostics diag;
    diag.class_id = y;
    diag.population = members.size();
    std::vector<std::size_t> fit_rows;
    for (std::size_t i : members)
      if (pred.correct[i]) fit_rows.push_back(i);
    diag.correct_count = fit_rows.size();
    if (fit_rows.size() < cfg.min_fit_size) {
      fit_rows = members;
      diag.fit_fallback = true;
    }

    DetectorConfig dc = cfg.detector;
    dc.alternate.seed = derive_seed(cfg.seed, kDetectorStream + static_cast<std::uint64_t>(y));
    const Matrix class_embeddings = gather_rows(pred.embeddings, members);
    DetectorModel detector;
    try {
      detector = fit_detector(dc, gather_rows(pred.embeddings, fit_rows));
      diag.scores = detector_score(detector, class_embeddings);
    } catch (const Error& e) {
      throw Error("class " + std::to_string(y) + ": " + e.what());
    }
    diag.regularized = detector_regularized(detector);
    if (fitted) fitted->push_back(detector);

    std::vector<bool> flags;
    const ClassThreshold th = compute_class_threshold(diag.scores, diag.population, diag.correct_count);
    diag.alpha = th.alpha;
    if (cfg.threshold == ThresholdMode::per_class_percentile) {
      diag.tau = th.tau;
      diag.zero_budget = th.alpha == 0.0;
      flags = classify_by_threshold(diag.scores, th.tau, th.alpha);
    } else {
      diag.tau = 0.0;
      flags.resize(diag.scores.size());
      for (std::size_t i = 0; i < flags.size(); ++i) flags[i] = diag.scores[i] > 0.0;
    }
    for (std::size_t r = 0; r < members.size(); ++r) {
      est.aligned[members[r]] = flags[r];
      if (!flags[r]) ++diag.flagged_conflicting;
    }
    est.classes.push_back(std::move(diag));
  }
  return est;
}

BiasSplitEstimate run_bias_identification(const LabeledDataset& data, const IdentifyConfig& cfg) {
  return identify_with_model(train_gce_model(data, cfg), data, cfg);
}

BiasSplitEstimate estimate_from_correctness(const std::vector<bool>& correct, const LabeledDataset& data) {
  if (correct.size() != data.size()) throw ValidationError("correctness mask length mismatch");
  BiasSplitEstimate est;
  est.method = "jtt";
  est.aligned = correct;
  const int k = data.num_classes();
  est.classes.resize(static_cast<std::size_t>(k));
  for (int y = 0; y < k; ++y) est.classes[static_cast<std::size_t>(y)].class_id = y;
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto& c = est.classes[static_cast<std::size_t>(data.samples[i].class_label)];
    ++c.population;
    if (correct[i]) ++c.correct_count;
    else ++c.flagged_conflicting;
  }
  return est;
}

BiasSplitEstimate jtt_identify(const LabeledDataset& data, const JttConfig& cfg) {
  if (cfg.ce.epochs < 1) throw ValidationError("JTT needs an epoch budget >= 1");
  if (data.empty()) throw ValidationError("JTT needs a nonempty training split");
  const SamplerWeights weights = inverse_population_weights(data.labels());
  MlpModel model = init_mlp(data.feature_dim(), cfg.network, data.num_classes(),
                            derive_seed(cfg.seed, kJttInitStream));
  TrainConfig tc = cfg.ce;
  tc.loss = LossKind::ce;
  tc.seed = derive_seed(cfg.seed, kJttTrainStream);
  model = train_model(std::move(model), data, tc, weights).model;
  BiasSplitEstimate est = estimate_from_correctness(predict_with_correctness(model, data).correct, data);
  est.jtt_epochs = cfg.ce.epochs;
  return est;
}

F1Report bias_f1(const BiasSplitEstimate& estimate, const LabeledDataset& data) {
  if (estimate.size() != data.size()) throw ValidationError("estimate/data size mismatch");
  const int k = data.num_classes();
  std::vector<std::size_t> tp(static_cast<std::size_t>(k), 0), fp(tp), fn(tp);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto y = static_cast<std::size_t>(data.samples[i].class_label);
    const bool truth_conflicting = !data.samples[i].aligned;
    const bool pred_conflicting = !estimate.aligned[i];
    if (pred_conflicting && truth_conflicting) ++tp[y];
    else if (pred_conflicting) ++fp[y];
    else if (truth_conflicting) ++fn[y];
  }
  F1Report report;
  for (int y = 0; y < k; ++y) {
    const auto c = static_cast<std::size_t>(y);
    double f1;
    if (tp[c] + fn[c] == 0) f1 = fp[c] == 0 ? 1.0 : 0.0;
    else f1 = 2.0 * tp[c] / static_cast<double>(2 * tp[c] + fp[c] + fn[c]);
    report.per_class.push_back(f1);
  }
  report.mean = std::accumulate(report.per_class.begin(), report.per_class.end(), 0.0) / k;
  double ss = 0.0;
  for (double f : report.per_class) ss += (f - report.mean) * (f - report.mean);
  report.stddev = std::sqrt(ss / k);
  return report;
}

}  // namespace modad
