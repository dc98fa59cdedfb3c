#include "modad/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "json_codec.hpp"
#include "modad/rng.hpp"

namespace modad {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <class F>
auto in_stage(const char* name, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

json optional_path(const std::optional<fs::path>& p) { return p ? json(p->string()) : json(); }

void read_optional_path(const json& j, const char* key, std::optional<fs::path>& out) {
  if (auto it = j.find(key); it != j.end() && !it->is_null()) out = fs::path(it->get<std::string>());
}

json config_json(const RunConfig& cfg, bool with_run_settings) {
  json data = {{"spec", codec::to_json(cfg.data.spec)},
               {"dataset_path", optional_path(cfg.data.dataset_path)},
               {"train_path", optional_path(cfg.data.train_path)},
               {"val_path", optional_path(cfg.data.val_path)},
               {"test_path", optional_path(cfg.data.test_path)},
               {"train_frac", cfg.data.train_frac},
               {"val_frac", cfg.data.val_frac},
               {"test_bias_mode", to_string(cfg.data.test_bias_mode)}};
  json erm = codec::to_json(cfg.erm);
  json gce = codec::to_json(cfg.gce);
  // Stage seeds are derived from the run seed, so they carry no information.
  erm.erase("seed");
  gce.erase("seed");
  json j = {{"data", std::move(data)},
            {"network", codec::to_json(cfg.network)},
            {"erm", std::move(erm)},
            {"gce", std::move(gce)},
            {"debias", codec::to_json(cfg.debias)},
            {"detector", codec::to_json(cfg.detector)},
            {"threshold", to_string(cfg.threshold)},
            {"min_fit_size", cfg.min_fit_size},
            {"jtt", {{"enabled", cfg.run_jtt}, {"epochs", cfg.jtt_epochs}}}};
  if (with_run_settings) {
    j["seeds"] = cfg.seeds;
    j["output_dir"] = cfg.output_dir.string();
    j["overwrite"] = cfg.overwrite;
  }
  return j;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write '" + path.string() + "'");
  os << text;
  if (text.empty() || text.back() != '\n') os << '\n';
  if (!os) throw IoError("write to '" + path.string() + "' failed");
}

bool directory_has_entries(const fs::path& dir) {
  return fs::exists(dir) && fs::is_directory(dir) && fs::directory_iterator(dir) != fs::directory_iterator();
}

void prepare_output_dir(const fs::path& dir, bool overwrite) {
  if (fs::exists(dir) && !fs::is_directory(dir))
    throw IoError("output path '" + dir.string() + "' exists and is not a directory");
  if (directory_has_entries(dir) && !overwrite)
    throw IoError("output directory '" + dir.string() + "' is not empty; pass --overwrite to reuse it");
  fs::create_directories(dir);
}

void guard_file(const fs::path& path, bool overwrite) {
  if (fs::exists(path) && !overwrite)
    throw IoError("'" + path.string() + "' already exists; pass --overwrite to replace it");
}

double nan_if_absent(const std::optional<double>& v) {
  return v.value_or(std::numeric_limits<double>::quiet_NaN());
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(); }

json numbers_or_null(const std::vector<double>& v) {
  json out = json::array();
  for (double x : v) out.push_back(number_or_null(x));
  return out;
}

json summary_json(const MetricSummary& s) {
  return {{"mean", number_or_null(s.mean)}, {"std", number_or_null(s.stddev)}, {"count", s.count}};
}

std::string mean_pm_std(const MetricSummary& s) {
  if (s.count == 0 || !std::isfinite(s.mean)) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f +- %.2f", s.mean, s.stddev);
  return buf;
}

json f1_json(const F1Report& f1) {
  return {{"per_class", f1.per_class}, {"mean", f1.mean}, {"std", f1.stddev}};
}

fs::path data_dir(const fs::path& out) { return out / "data"; }

void write_splits(const LoadedData& data, const fs::path& dir) {
  fs::create_directories(dir);
  write_dataset(data.train, dir / "train.csv");
  write_dataset(data.val, dir / "val.csv");
  write_dataset(data.test, dir / "test.csv");
}

void write_detectors(const std::vector<DetectorModel>& detectors, const fs::path& dir) {
  fs::create_directories(dir);
  for (std::size_t y = 0; y < detectors.size(); ++y)
    save_detector(detectors[y], dir / ("class_" + std::to_string(y) + ".json"));
}

MlpModel input_model(const SeedContext& ctx, InputModelKind kind) {
  return kind == InputModelKind::erm ? ctx.erm : ctx.gce;
}

}  // namespace

void RunConfig::validate() const {
  if (seeds.empty()) throw ValidationError("seed list must not be empty");
  if (data.train_path.has_value() != data.test_path.has_value())
    throw ValidationError("train_path and test_path must be given together");
  if (data.dataset_path && data.train_path)
    throw ValidationError("give either dataset_path or train_path/test_path, not both");
  if (data.val_path && !data.train_path) throw ValidationError("val_path requires train_path and test_path");
  for (const auto* p : {&data.dataset_path, &data.train_path, &data.val_path, &data.test_path})
    if (*p && !fs::is_regular_file(**p)) throw IoError("dataset file '" + (*p)->string() + "' does not exist");
  if (!data.train_path) {
    if (!(data.train_frac > 0.0 && data.val_frac >= 0.0 && data.train_frac + data.val_frac < 1.0))
      throw ValidationError("split fractions need train_frac > 0, val_frac >= 0, train + val < 1");
    if (!data.dataset_path) data.spec.validate();
  }
  if (network.embedding_dim < 1) throw ValidationError("embedding_dim must be >= 1");
  for (int h : network.hidden_dims)
    if (h < 1) throw ValidationError("hidden layer widths must be >= 1");
  erm.validate();
  gce.validate();
  debias.validate();
  if (!(detector.nu > 0.0 && detector.nu <= 1.0)) throw ValidationError("detector nu must lie in (0, 1]");
  if (detector.gamma && !(*detector.gamma > 0.0)) throw ValidationError("detector gamma must be > 0");
  if (min_fit_size < 2) throw ValidationError("min_fit_size must be >= 2");
  if (run_jtt && jtt_epochs < 1) throw ValidationError("JTT epoch budget must be >= 1");
  if (output_dir.empty()) throw ValidationError("output directory must be set");
}

RunConfig parse_run_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
  try {
    codec::check_keys(j, "config",
                      {"data", "network", "erm", "gce", "debias", "detector", "threshold", "min_fit_size", "jtt",
                       "seeds", "output_dir", "overwrite"});
    RunConfig cfg;
    if (auto it = j.find("data"); it != j.end()) {
      const json& d = *it;
      codec::check_keys(d, "data",
                        {"spec", "dataset_path", "train_path", "val_path", "test_path", "train_frac", "val_frac",
                         "test_bias_mode"});
      if (auto s = d.find("spec"); s != d.end()) cfg.data.spec = codec::dataset_spec_from(*s, true);
      read_optional_path(d, "dataset_path", cfg.data.dataset_path);
      read_optional_path(d, "train_path", cfg.data.train_path);
      read_optional_path(d, "val_path", cfg.data.val_path);
      read_optional_path(d, "test_path", cfg.data.test_path);
      codec::read(d, "train_frac", cfg.data.train_frac);
      codec::read(d, "val_frac", cfg.data.val_frac);
      if (auto m = d.find("test_bias_mode"); m != d.end())
        cfg.data.test_bias_mode = parse_test_bias_mode(m->get<std::string>());
    }
    if (auto it = j.find("network"); it != j.end()) cfg.network = codec::network_from(*it);
    if (auto it = j.find("erm"); it != j.end()) cfg.erm = codec::train_config_from(*it, cfg.erm, true);
    if (auto it = j.find("gce"); it != j.end()) cfg.gce = codec::train_config_from(*it, cfg.gce, true);
    cfg.erm.loss = LossKind::ce;
    cfg.gce.loss = LossKind::gce;
    if (auto it = j.find("debias"); it != j.end()) cfg.debias = codec::debias_from(*it);
    if (auto it = j.find("detector"); it != j.end()) cfg.detector = codec::detector_from(*it);
    if (auto it = j.find("threshold"); it != j.end()) cfg.threshold = parse_threshold_mode(it->get<std::string>());
    codec::read(j, "min_fit_size", cfg.min_fit_size);
    if (auto it = j.find("jtt"); it != j.end()) {
      codec::check_keys(*it, "jtt", {"enabled", "epochs"});
      codec::read(*it, "enabled", cfg.run_jtt);
      codec::read(*it, "epochs", cfg.jtt_epochs);
    }
    codec::read(j, "seeds", cfg.seeds);
    if (auto it = j.find("output_dir"); it != j.end()) cfg.output_dir = it->get<std::string>();
    codec::read(j, "overwrite", cfg.overwrite);
    return cfg;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad config value: ") + e.what());
  }
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_run_config(ss.str());
}

std::string run_config_to_json(const RunConfig& cfg) { return config_json(cfg, true).dump(2); }

std::string config_hash(const RunConfig& cfg) {
  const std::string text = config_json(cfg, false).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

LoadedData load_data(const RunConfig& cfg) {
  const DataSource& src = cfg.data;
  LoadedData out;
  if (src.train_path) {
    out.train = read_dataset(*src.train_path);
    out.test = read_dataset(*src.test_path);
    if (src.val_path) out.val = read_dataset(*src.val_path);
    out.train.split_tag = SplitTag::train;
    out.val.split_tag = SplitTag::val;
    out.test.split_tag = SplitTag::test;
    if (out.train.feature_dim() != out.test.feature_dim())
      throw ShapeError("train and test files have different feature widths");
  } else {
    const LabeledDataset population =
        src.dataset_path ? read_dataset(*src.dataset_path) : generate_biased_dataset(src.spec);
    DatasetSplits s = split_dataset(population, src.train_frac, src.val_frac, src.test_bias_mode);
    out.train = std::move(s.train);
    out.val = std::move(s.val);
    out.test = std::move(s.test);
  }
  if (out.train.empty()) throw ValidationError("training split is empty");
  if (out.test.empty()) throw ValidationError("test split is empty");
  return out;
}

ErmConfig erm_config(const RunConfig& cfg, std::uint64_t seed) {
  ErmConfig c;
  c.network = cfg.network;
  c.ce = cfg.erm;
  c.seed = seed;
  return c;
}

IdentifyConfig identify_config(const RunConfig& cfg, std::uint64_t seed) {
  IdentifyConfig c;
  c.network = cfg.network;
  c.gce = cfg.gce;
  c.detector = cfg.detector;
  c.threshold = cfg.threshold;
  c.min_fit_size = cfg.min_fit_size;
  c.seed = seed;
  return c;
}

JttConfig jtt_config(const RunConfig& cfg, std::uint64_t seed) {
  JttConfig c;
  c.network = cfg.network;
  c.ce = cfg.erm;
  c.ce.epochs = cfg.jtt_epochs;
  c.seed = seed;
  return c;
}

DebiasConfig debias_config(const RunConfig& cfg, std::uint64_t seed) {
  DebiasConfig c = cfg.debias;
  c.seed = seed;
  return c;
}

SeedContext prepare_seed(const RunConfig& cfg, const LoadedData& data, std::uint64_t seed) {
  SeedContext ctx;
  ctx.seed = seed;
  ctx.erm = in_stage("train-erm", [&] { return train_erm_baseline(data.train, erm_config(cfg, seed)); });
  ctx.gce = in_stage("train-gce", [&] { return train_gce_model(data.train, identify_config(cfg, seed)); });
  return ctx;
}

EvalReport evaluate_model(const MlpModel& model, const LabeledDataset& test, std::uint64_t seed,
                          const std::string& hash, const std::string& label) {
  const Predictions pred = predict_with_correctness(model, test);
  EvalReport r = accuracy_metrics(pred.predicted, test);
  r.seed = seed;
  r.config_hash = hash;
  r.model = label;
  return r;
}

VariantOutcome debias_and_evaluate(const RunConfig& cfg, const LoadedData& data, const SeedContext& ctx,
                                   const BiasSplitEstimate& estimate, InputModelKind input,
                                   const std::string& label) {
  VariantOutcome out;
  DebiasConfig dc = debias_config(cfg, ctx.seed);
  dc.input_model = input;
  out.debiased = in_stage("debias", [&] { return debias_finetune(input_model(ctx, input), data.train, estimate, dc); });
  out.report = in_stage("evaluate", [&] { return evaluate_model(out.debiased.model, data.test, ctx.seed,
                                                               config_hash(cfg), label); });
  return out;
}

MetricSummary summarize(const std::vector<double>& values) {
  MetricSummary s;
  s.count = values.size();
  if (values.empty()) {
    s.mean = s.stddev = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(sq / static_cast<double>(values.size()));
  return s;
}

std::string PipelineResult::summary_json() const {
  json per_seed = json::array();
  for (const auto& s : seeds) {
    json row = {{"seed", s.seed},
                {"erm_average_accuracy", s.erm.average_accuracy},
                {"erm_conflicting_accuracy", number_or_null(nan_if_absent(s.erm.conflicting_accuracy))},
                {"debiased_average_accuracy", s.debiased.average_accuracy},
                {"debiased_conflicting_accuracy", number_or_null(nan_if_absent(s.debiased.conflicting_accuracy))},
                {"bias_f1", s.f1.mean}};
    if (s.jtt_f1) row["jtt_f1"] = s.jtt_f1->mean;
    per_seed.push_back(std::move(row));
  }
  json j = {{"config_hash", config_hash},
            {"seeds", per_seed},
            {"erm_average_accuracy", modad::summary_json(erm_average)},
            {"erm_conflicting_accuracy", modad::summary_json(erm_conflicting)},
            {"debiased_average_accuracy", modad::summary_json(debiased_average)},
            {"debiased_conflicting_accuracy", modad::summary_json(debiased_conflicting)},
            {"bias_f1", modad::summary_json(f1)}};
  if (jtt_f1) j["jtt_f1"] = modad::summary_json(*jtt_f1);
  return j.dump(2);
}

PipelineResult run_pipeline(const RunConfig& cfg) {
  in_stage("config", [&] {
    cfg.validate();
    prepare_output_dir(cfg.output_dir, cfg.overwrite);
  });
  const std::string hash = config_hash(cfg);
  write_text(cfg.output_dir / "config.json", run_config_to_json(cfg));

  const LoadedData data = in_stage("data", [&] {
    LoadedData d = load_data(cfg);
    write_splits(d, data_dir(cfg.output_dir));
    return d;
  });

  PipelineResult result;
  result.config_hash = hash;
  result.output_dir = cfg.output_dir;
  std::vector<double> erm_avg, erm_conf, deb_avg, deb_conf, f1s, jtt_f1s;

  for (std::uint64_t seed : cfg.seeds) {
    const fs::path dir = cfg.output_dir / ("seed_" + std::to_string(seed));
    fs::create_directories(dir);
    SeedOutcome so;
    so.seed = seed;

    const SeedContext ctx = prepare_seed(cfg, data, seed);
    in_stage("train-erm", [&] { save_checkpoint(ctx.erm, cfg.erm, dir / "erm_model.json"); });
    in_stage("train-gce", [&] { save_checkpoint(ctx.gce, cfg.gce, dir / "gce_model.json"); });
    so.erm = in_stage("evaluate", [&] { return evaluate_model(ctx.erm, data.test, seed, hash, "erm"); });
    write_text(dir / "eval_erm.json", so.erm.to_json());

    in_stage("identify", [&] {
      std::vector<DetectorModel> detectors;
      so.estimate = identify_with_model(ctx.gce, data.train, identify_config(cfg, seed), &detectors);
      write_detectors(detectors, dir / "detectors");
      write_estimate(so.estimate, dir / "estimate.csv", dir / "estimate.json");
      so.f1 = bias_f1(so.estimate, data.train);
    });
    if (cfg.run_jtt) {
      in_stage("jtt", [&] {
        so.jtt_estimate = jtt_identify(data.train, jtt_config(cfg, seed));
        write_estimate(*so.jtt_estimate, dir / "jtt_estimate.csv", dir / "jtt_estimate.json");
        so.jtt_f1 = bias_f1(*so.jtt_estimate, data.train);
      });
    }

    VariantOutcome deb = debias_and_evaluate(cfg, data, ctx, so.estimate, cfg.debias.input_model, "modad");
    so.debiased = deb.report;
    in_stage("debias", [&] {
      TrainConfig saved = cfg.erm;
      saved.learning_rate = cfg.debias.learning_rate;
      saved.weight_decay = cfg.debias.weight_decay;
      saved.epochs = cfg.debias.epochs;
      saved.batch_size = cfg.debias.batch_size;
      saved.seed = seed;
      save_checkpoint(deb.debiased.model, saved, dir / "debiased_model.json");
      write_training_log(deb.debiased.log, dir / "debias_log.csv");
    });
    write_text(dir / "eval_debiased.json", so.debiased.to_json());

    in_stage("projection", [&] {
      const Matrix train_emb = forward(ctx.gce, data.train.feature_matrix()).embeddings;
      const Matrix test_emb = forward(ctx.gce, data.test.feature_matrix()).embeddings;
      export_projection(pca_top_components(train_emb, 2), test_emb, data.test.aligned_flags(), dir / "projection.csv");
      so.class_projection_shift = class_pca_shift(train_emb, data.train, test_emb, data.test);
    });

    json report = {{"seed", seed},
                   {"config_hash", hash},
                   {"erm", json::parse(so.erm.to_json())},
                   {"debiased", json::parse(so.debiased.to_json())},
                   {"bias_f1", f1_json(so.f1)},
                   {"estimated_conflicting", so.estimate.conflicting_count()}};
    if (so.jtt_f1) report["jtt_f1"] = f1_json(*so.jtt_f1);
    json shifts = json::array();
    for (const auto& per_class : so.class_projection_shift) {
      json cls = json::array();
      for (const auto& c : per_class)
        cls.push_back({{"aligned_mean", c.aligned_mean},
                       {"conflicting_mean", c.conflicting_mean},
                       {"pooled_std", c.pooled_std},
                       {"ratio", c.ratio}});
      shifts.push_back(std::move(cls));
    }
    report["class_projection_shift"] = std::move(shifts);
    write_text(dir / "report.json", report.dump(2));

    erm_avg.push_back(so.erm.average_accuracy);
    erm_conf.push_back(nan_if_absent(so.erm.conflicting_accuracy));
    deb_avg.push_back(so.debiased.average_accuracy);
    deb_conf.push_back(nan_if_absent(so.debiased.conflicting_accuracy));
    f1s.push_back(so.f1.mean);
    if (so.jtt_f1) jtt_f1s.push_back(so.jtt_f1->mean);
    result.seeds.push_back(std::move(so));
  }

  result.erm_average = summarize(erm_avg);
  result.erm_conflicting = summarize(erm_conf);
  result.debiased_average = summarize(deb_avg);
  result.debiased_conflicting = summarize(deb_conf);
  result.f1 = summarize(f1s);
  if (cfg.run_jtt) result.jtt_f1 = summarize(jtt_f1s);
  write_text(cfg.output_dir / "summary.json", result.summary_json());
  return result;
}

std::string to_string(AblationKind kind) {
  switch (kind) {
    case AblationKind::detector: return "detector";
    case AblationKind::threshold: return "threshold";
    case AblationKind::input_model: return "input_model";
    case AblationKind::unbiased: return "unbiased";
    case AblationKind::jtt: return "jtt";
  }
  return "detector";
}

AblationKind parse_ablation_kind(const std::string& text) {
  if (text == "detector") return AblationKind::detector;
  if (text == "threshold") return AblationKind::threshold;
  if (text == "input_model" || text == "input-model") return AblationKind::input_model;
  if (text == "unbiased") return AblationKind::unbiased;
  if (text == "jtt") return AblationKind::jtt;
  throw ValidationError("unknown ablation '" + text + "' (detector, threshold, input_model, unbiased, jtt)");
}

const AblationRow* AblationReport::find(const std::string& variant) const {
  for (const auto& r : rows)
    if (r.variant == variant) return &r;
  return nullptr;
}

std::string AblationReport::to_json() const {
  json jrows = json::array();
  for (const auto& r : rows) {
    json row = {{"variant", r.variant},
                {"average_accuracy", numbers_or_null(r.average)},
                {"conflicting_accuracy", numbers_or_null(r.conflicting)},
                {"average_summary", summary_json(r.average_summary)},
                {"conflicting_summary", summary_json(r.conflicting_summary)}};
    if (r.f1_summary) {
      row["bias_f1"] = numbers_or_null(r.f1);
      row["bias_f1_summary"] = summary_json(*r.f1_summary);
    }
    jrows.push_back(std::move(row));
  }
  return json{{"ablation", to_string(kind)}, {"config_hash", config_hash}, {"seeds", seeds}, {"rows", jrows}}
      .dump(2);
}

std::string AblationReport::to_table() const {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-22s %-18s %-18s %s\n", "variant", "average acc", "conflicting acc", "bias F1");
  os << "ablation: " << to_string(kind) << " (config " << config_hash << ")\n" << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%-22s %-18s %-18s %s\n", r.variant.c_str(),
                  mean_pm_std(r.average_summary).c_str(), mean_pm_std(r.conflicting_summary).c_str(),
                  r.f1_summary ? mean_pm_std(*r.f1_summary).c_str() : "-");
    os << buf;
  }
  return os.str();
}

AblationReport run_ablation(const RunConfig& cfg, AblationKind kind, bool write_report) {
  const fs::path report_path = cfg.output_dir / ("ablation_" + to_string(kind) + ".json");
  RunConfig effective = cfg;
  in_stage("config", [&] {
    cfg.validate();
    if (kind == AblationKind::unbiased) {
      if (cfg.data.dataset_path || cfg.data.train_path)
        throw ValidationError("the unbiased ablation needs a generated dataset, not dataset files");
      effective.data.spec.rho = 1.0 / static_cast<double>(cfg.data.spec.attributes());
    }
    if (write_report) guard_file(report_path, cfg.overwrite);
  });
  const LoadedData data = in_stage("data", [&] { return load_data(effective); });

  AblationReport report;
  report.kind = kind;
  report.config_hash = config_hash(effective);
  report.seeds = cfg.seeds;

  auto row = [&](const std::string& name) -> AblationRow& {
    for (auto& r : report.rows)
      if (r.variant == name) return r;
    report.rows.push_back(AblationRow{name, {}, {}, {}, {}, {}, std::nullopt});
    return report.rows.back();
  };
  auto record = [&](const std::string& name, const EvalReport& eval, const BiasSplitEstimate* est) {
    AblationRow& r = row(name);
    r.average.push_back(eval.average_accuracy);
    r.conflicting.push_back(nan_if_absent(eval.conflicting_accuracy));
    if (est) r.f1.push_back(bias_f1(*est, data.train).mean);
  };
  auto identify = [&](const SeedContext& ctx, const IdentifyConfig& ic) {
    return in_stage("identify", [&] { return identify_with_model(ctx.gce, data.train, ic); });
  };
  const InputModelKind default_input = cfg.debias.input_model;

  for (std::uint64_t seed : cfg.seeds) {
    const SeedContext ctx = prepare_seed(effective, data, seed);
    const IdentifyConfig base = identify_config(effective, seed);
    switch (kind) {
      case AblationKind::detector:
        for (DetectorKind dk : {DetectorKind::ocsvm, DetectorKind::lof, DetectorKind::iforest,
                                DetectorKind::robustcov}) {
          IdentifyConfig ic = base;
          ic.detector.kind = dk;
          const BiasSplitEstimate est = identify(ctx, ic);
          record(to_string(dk), debias_and_evaluate(effective, data, ctx, est, default_input, to_string(dk)).report,
                 &est);
        }
        break;
      case AblationKind::threshold:
        for (ThresholdMode tm : {ThresholdMode::per_class_percentile, ThresholdMode::default_zero}) {
          IdentifyConfig ic = base;
          ic.threshold = tm;
          const BiasSplitEstimate est = identify(ctx, ic);
          record(to_string(tm), debias_and_evaluate(effective, data, ctx, est, default_input, to_string(tm)).report,
                 &est);
        }
        break;
      case AblationKind::input_model: {
        const BiasSplitEstimate est = identify(ctx, base);
        for (InputModelKind im : {InputModelKind::erm, InputModelKind::gce})
          record(to_string(im), debias_and_evaluate(effective, data, ctx, est, im, to_string(im)).report, nullptr);
        break;
      }
      case AblationKind::unbiased: {
        record("erm", in_stage("evaluate", [&] {
                 return evaluate_model(ctx.erm, data.test, seed, report.config_hash, "erm");
               }),
               nullptr);
        const BiasSplitEstimate est = identify(ctx, base);
        record("modad", debias_and_evaluate(effective, data, ctx, est, default_input, "modad").report, &est);
        break;
      }
      case AblationKind::jtt: {
        const BiasSplitEstimate est = identify(ctx, base);
        record("modad", debias_and_evaluate(effective, data, ctx, est, default_input, "modad").report, &est);
        const BiasSplitEstimate jtt =
            in_stage("jtt", [&] { return jtt_identify(data.train, jtt_config(effective, seed)); });
        record("jtt", debias_and_evaluate(effective, data, ctx, jtt, default_input, "jtt").report, &jtt);
        break;
      }
    }
  }

  for (auto& r : report.rows) {
    r.average_summary = summarize(r.average);
    r.conflicting_summary = summarize(r.conflicting);
    if (!r.f1.empty()) r.f1_summary = summarize(r.f1);
  }
  if (write_report) {
    in_stage("report", [&] {
      fs::create_directories(cfg.output_dir);
      write_text(report_path, report.to_json());
    });
  }
  return report;
}

namespace {

LoadedData step_data(const RunConfig& cfg) {
  const fs::path dir = data_dir(cfg.output_dir);
  if (fs::exists(dir / "train.csv") && fs::exists(dir / "test.csv")) {
    LoadedData d;
    d.train = read_dataset(dir / "train.csv");
    d.test = read_dataset(dir / "test.csv");
    if (fs::exists(dir / "val.csv")) d.val = read_dataset(dir / "val.csv");
    return d;
  }
  return load_data(cfg);
}

MlpModel step_checkpoint(const fs::path& path, const char* producer) {
  if (!fs::exists(path))
    throw IoError("'" + path.string() + "' not found; run " + producer + " first");
  return load_checkpoint(path).model;
}

}  // namespace

void step_gen_data(const RunConfig& cfg) {
  in_stage("data", [&] {
    cfg.validate();
    const fs::path dir = data_dir(cfg.output_dir);
    for (const char* name : {"train.csv", "val.csv", "test.csv"}) guard_file(dir / name, cfg.overwrite);
    write_splits(load_data(cfg), dir);
  });
}

void step_train_erm(const RunConfig& cfg, std::uint64_t seed) {
  in_stage("train-erm", [&] {
    cfg.validate();
    const fs::path path = cfg.output_dir / "erm_model.json";
    guard_file(path, cfg.overwrite);
    const LoadedData data = step_data(cfg);
    fs::create_directories(cfg.output_dir);
    save_checkpoint(train_erm_baseline(data.train, erm_config(cfg, seed)), cfg.erm, path);
  });
}

void step_train_gce(const RunConfig& cfg, std::uint64_t seed) {
  in_stage("train-gce", [&] {
    cfg.validate();
    const fs::path path = cfg.output_dir / "gce_model.json";
    guard_file(path, cfg.overwrite);
    const LoadedData data = step_data(cfg);
    fs::create_directories(cfg.output_dir);
    save_checkpoint(train_gce_model(data.train, identify_config(cfg, seed)), cfg.gce, path);
  });
}

void step_identify(const RunConfig& cfg, std::uint64_t seed) {
  in_stage("identify", [&] {
    cfg.validate();
    const fs::path csv = cfg.output_dir / "estimate.csv";
    guard_file(csv, cfg.overwrite);
    const MlpModel gce = step_checkpoint(cfg.output_dir / "gce_model.json", "train-gce");
    const LoadedData data = step_data(cfg);
    std::vector<DetectorModel> detectors;
    const BiasSplitEstimate est = identify_with_model(gce, data.train, identify_config(cfg, seed), &detectors);
    write_detectors(detectors, cfg.output_dir / "detectors");
    write_estimate(est, csv, cfg.output_dir / "estimate.json");
  });
}

void step_debias(const RunConfig& cfg, std::uint64_t seed) {
  in_stage("debias", [&] {
    cfg.validate();
    const fs::path path = cfg.output_dir / "debiased_model.json";
    guard_file(path, cfg.overwrite);
    const bool from_erm = cfg.debias.input_model == InputModelKind::erm;
    const MlpModel input = from_erm ? step_checkpoint(cfg.output_dir / "erm_model.json", "train-erm")
                                    : step_checkpoint(cfg.output_dir / "gce_model.json", "train-gce");
    const fs::path csv = cfg.output_dir / "estimate.csv";
    if (!fs::exists(csv)) throw IoError("'" + csv.string() + "' not found; run identify first");
    const BiasSplitEstimate est = read_estimate(csv, cfg.output_dir / "estimate.json");
    const LoadedData data = step_data(cfg);
    const DebiasResult res = debias_finetune(input, data.train, est, debias_config(cfg, seed));
    TrainConfig saved = cfg.erm;
    saved.learning_rate = cfg.debias.learning_rate;
    saved.weight_decay = cfg.debias.weight_decay;
    saved.epochs = cfg.debias.epochs;
    saved.batch_size = cfg.debias.batch_size;
    saved.seed = seed;
    save_checkpoint(res.model, saved, path);
    write_training_log(res.log, cfg.output_dir / "debias_log.csv");
  });
}

std::vector<EvalReport> step_evaluate(const RunConfig& cfg, std::uint64_t seed) {
  return in_stage("evaluate", [&] {
    cfg.validate();
    const LoadedData data = step_data(cfg);
    const std::string hash = config_hash(cfg);
    std::vector<EvalReport> reports;
    for (const char* name : {"erm", "gce", "debiased"}) {
      const fs::path model_path = cfg.output_dir / (std::string(name) + "_model.json");
      if (!fs::exists(model_path)) continue;
      const fs::path out = cfg.output_dir / ("eval_" + std::string(name) + ".json");
      guard_file(out, cfg.overwrite);
      EvalReport r = evaluate_model(load_checkpoint(model_path).model, data.test, seed, hash, name);
      write_text(out, r.to_json());
      reports.push_back(std::move(r));
    }
    if (reports.empty()) throw IoError("no model checkpoints found in '" + cfg.output_dir.string() + "'");
    return reports;
  });
}

}  // namespace modad
