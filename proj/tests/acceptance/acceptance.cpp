// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>
#include <string>

#include "fixture.hpp"
#include "modad/pipeline.hpp"
#include "modad/rng.hpp"
#include "oracles.hpp"

using namespace modad;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(int id, bool ok, const std::string& detail) {
  std::printf("%s criterion %d: %s\n", ok ? "PASS" : "FAIL", id, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? std::nan("") : s / static_cast<double>(v.size());
}

Matrix random_matrix(int n, int d, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Matrix x(n, d);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = nd(rng);
  return x;
}

oracle::Mat to_mat(const Matrix& x) {
  oracle::Mat m;
  for (Eigen::Index i = 0; i < x.rows(); ++i) m.emplace_back(x.row(i).data(), x.row(i).data() + x.cols());
  return m;
}

std::vector<double> row(const Matrix& x, Eigen::Index i) { return {x.row(i).data(), x.row(i).data() + x.cols()}; }

void criterion_ocsvm_oracle() {
  const auto t0 = Clock::now();
  Rng rng(101);
  const double nus[] = {0.3, 0.5, 0.8};
  double worst_obj = 0.0, worst_dec = 0.0;
  for (int inst = 0; inst < 20; ++inst) {
    const int m = 6 + inst % 11;  // 6..16
    const int e = 1 + inst % 4;   // 1..4
    const double nu = nus[inst % 3];
    const Matrix x = random_matrix(m, e, rng);
    const KernelSpec kernel{default_gamma(x)};
    const OcsvmModel model = fit_ocsvm(x, nu, kernel);
    const auto ref = oracle::ocsvm_qp(oracle::rbf_gram(to_mat(x), kernel.gamma), nu);
    worst_obj = std::max(worst_obj, std::abs(model.dual_objective - ref.objective) / std::abs(ref.objective));
    const Matrix queries = random_matrix(10, e, rng, 1.5);
    const auto xm = to_mat(x);
    for (const Matrix* q : {&x, &queries})
      for (Eigen::Index i = 0; i < q->rows(); ++i) {
        const auto p = row(*q, i);
        worst_dec = std::max(worst_dec, std::abs(ocsvm_score(model, p) - oracle::ocsvm_decision(xm, ref, kernel.gamma, p)));
      }
  }
  const double t = seconds_since(t0);
  report(1, worst_obj <= 1e-6 && worst_dec <= 1e-4 && t < 5.0,
         fmt("OCSVM vs QP oracle on 20 instances: max rel objective gap %.3g (<= 1e-6), max decision gap %.3g "
             "(<= 1e-4), %.2f s (< 5)",
             worst_obj, worst_dec, t));
}

void criterion_nu_property() {
  const auto t0 = Clock::now();
  Rng rng(202);
  const Matrix x = random_matrix(500, 2, rng);
  const OcsvmModel m = fit_ocsvm(x, 0.5);
  std::size_t outliers = 0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) outliers += ocsvm_score(m, row(x, i)) < 0.0;
  const double out_frac = static_cast<double>(outliers) / 500.0;
  const double sv_frac = static_cast<double>(m.alphas.size()) / 500.0;
  const double t = seconds_since(t0);
  report(2, out_frac <= 0.55 && sv_frac >= 0.45 && t < 10.0,
         fmt("nu = 0.5 on 500 points: outlier fraction %.3f (<= 0.55), SV fraction %.3f (>= 0.45), %.2f s (< 10)",
             out_frac, sv_frac, t));
}

double loss_at(const MlpModel& shape, const std::vector<double>& params, const Matrix& x, const std::vector<int>& y,
               LossKind kind, double q) {
  MlpModel m = shape;
  m.unflatten(params);
  std::vector<double> unused;
  return loss_and_gradients(m, x, y, kind, q, unused);
}

void criterion_gradients() {
  const auto t0 = Clock::now();
  struct Case {
    LossKind loss;
    double q;
  };
  const Case cases[] = {{LossKind::ce, 1.0}, {LossKind::gce, 0.3}, {LossKind::gce, 0.7}, {LossKind::gce, 1.0}};
  double worst = 0.0;
  for (const auto& c : cases)
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
      Rng rng(300 + seed);
      const int d = 2 + static_cast<int>(seed % 7);  // <= 8
      const int k = 2 + static_cast<int>(seed % 3);  // <= 4
      MlpModel m = init_mlp(d, NetworkShape{{6}, 5}, k, seed);
      std::vector<double> p = m.flatten();
      std::uniform_real_distribution<double> jitter(-0.2, 0.2);
      for (double& v : p) v += jitter(rng);
      m.unflatten(p);
      const Matrix x = random_matrix(8, d, rng);
      std::uniform_int_distribution<int> lab(0, k - 1);
      std::vector<int> y(8);
      for (int& v : y) v = lab(rng);
      std::vector<double> grads;
      loss_and_gradients(m, x, y, c.loss, c.q, grads);
      const auto numeric = oracle::numeric_gradient(
          [&](const std::vector<double>& params) { return loss_at(m, params, x, y, c.loss, c.q); }, p);
      worst = std::max(worst, oracle::relative_error(grads, numeric));
    }
  double worst_limit = 0.0;
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    Rng rng(400 + seed);
    const Matrix logits = random_matrix(16, 4, rng, 2.0);
    std::uniform_int_distribution<int> lab(0, 3);
    std::vector<int> y(16);
    for (int& v : y) v = lab(rng);
    worst_limit = std::max(worst_limit, std::abs(gce_loss_and_grad(logits, y, 1e-4).loss - ce_loss_and_grad(logits, y).loss));
  }
  const double t = seconds_since(t0);
  report(3, worst < 1e-4 && worst_limit <= 1e-3 && t < 5.0,
         fmt("max gradient relative error %.3g (< 1e-4), |GCE(q=1e-4) - CE| max %.3g (<= 1e-3), %.2f s (< 5)", worst,
             worst_limit, t));
}

void criterion_threshold_formula() {
  const std::vector<double> scores{-1.0, 0.0, 1.0, 2.0};
  const double a1 = compute_class_threshold(scores, 100, 80).alpha;
  const double a2 = compute_class_threshold(scores, 200, 110).alpha;
  Rng rng(500);
  std::normal_distribution<double> nd;
  double worst = 0.0;
  for (int n : {1, 2, 5, 37, 200, 1001}) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (double& s : v) s = nd(rng);
    for (double p : {0.0, 1.0, 10.0, 22.5, 37.3, 50.0, 99.0, 100.0})
      worst = std::max(worst, std::abs(percentile_linear(v, p) - oracle::percentile(v, p)));
  }
  report(4, a1 == 10.0 && a2 == 22.5 && worst <= 1e-12,
         fmt("alpha(100, 80) = %.17g (10), alpha(200, 110) = %.17g (22.5), percentile max gap %.3g (<= 1e-12)", a1, a2,
             worst));
}

std::vector<double> conflicting_means(const AblationRow* row) { return row ? row->conflicting : std::vector<double>{}; }

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "modad_acceptance";
  fs::create_directories(work);

  criterion_ocsvm_oracle();
  criterion_nu_property();
  criterion_gradients();
  criterion_threshold_formula();

  RunConfig cfg = fixture::biased_run();
  cfg.overwrite = true;
  cfg.output_dir = work / "pipeline";

  // 5: end-to-end.
  const auto t0 = Clock::now();
  const PipelineResult run = run_pipeline(cfg);
  const double t_run = seconds_since(t0);
  const double erm_avg = run.erm_average.mean, erm_conf = run.erm_conflicting.mean;
  const double deb_conf = run.debiased_conflicting.mean;
  const double f1 = run.f1.mean, jtt = run.jtt_f1 ? run.jtt_f1->mean : std::nan("");
  const std::size_t n_train = load_data(cfg).train.size();
  const bool a = erm_avg - erm_conf >= 15.0, b = deb_conf - erm_conf >= 10.0, c = f1 >= jtt;
  report(5, a && b && c && n_train == 5000 && t_run < 300.0,
         fmt("n_train %zu, ERM avg %.2f conf %.2f (gap %.2f >= 15); MoDAD conf %.2f (gain %.2f >= 10); F1 %.3f >= JTT "
             "F1 %.3f; %.1f s (< 300)",
             n_train, erm_avg, erm_conf, erm_avg - erm_conf, deb_conf, deb_conf - erm_conf, f1, jtt, t_run));

  // 6: oracle flags fed to the same debias step.
  {
    const LoadedData data = load_data(cfg);
    const BiasSplitEstimate truth = oracle_estimate(data.train);
    std::vector<double> oracle_conf;
    for (std::uint64_t seed : cfg.seeds) {
      const SeedContext ctx = prepare_seed(cfg, data, seed);
      const VariantOutcome v = debias_and_evaluate(cfg, data, ctx, truth, cfg.debias.input_model, "oracle");
      oracle_conf.push_back(*v.report.conflicting_accuracy);
    }
    const double mo = mean_of(oracle_conf);
    report(6, mo >= deb_conf,
           fmt("oracle-fed conflicting %.2f >= detector-fed conflicting %.2f (mean over seeds)", mo, deb_conf));
  }

  // 7: threshold ablation.
  {
    RunConfig ac = cfg;
    ac.output_dir = work / "ablate_threshold";
    const AblationReport r = run_ablation(ac, AblationKind::threshold);
    const double custom = mean_of(conflicting_means(r.find("per_class_percentile")));
    const double zero = mean_of(conflicting_means(r.find("default_zero")));
    report(7, custom >= zero, fmt("per-class tau conflicting %.2f >= default-zero conflicting %.2f", custom, zero));
  }

  // 8: unbiased data.
  {
    RunConfig ac = cfg;
    ac.output_dir = work / "ablate_unbiased";
    const AblationReport r = run_ablation(ac, AblationKind::unbiased);
    const AblationRow* erm = r.find("erm");
    const AblationRow* modad = r.find("modad");
    const double drop = erm && modad ? erm->average_summary.mean - modad->average_summary.mean : std::nan("");
    report(8, erm && modad && drop <= 5.0,
           fmt("unbiased data: ERM avg %.2f, MoDAD avg %.2f, drop %.2f (<= 5)", erm ? erm->average_summary.mean : 0.0,
               modad ? modad->average_summary.mean : 0.0, drop));
  }

  // 9: detector ablation.
  {
    RunConfig ac = cfg;
    ac.output_dir = work / "ablate_detector";
    const AblationReport r = run_ablation(ac, AblationKind::detector);
    const AblationRow* oc = r.find("ocsvm");
    bool ok = r.rows.size() == 4 && oc != nullptr;
    std::string detail = fmt("%zu rows;", r.rows.size());
    for (const char* alt : {"lof", "iforest", "robustcov"}) {
      const AblationRow* row = r.find(alt);
      ok = ok && row != nullptr && oc->average_summary.mean >= row->average_summary.mean - 3.0;
      if (row) detail += fmt(" %s %.2f", alt, row->average_summary.mean);
    }
    if (oc) detail += fmt("; ocsvm %.2f must be >= each minus 3", oc->average_summary.mean);
    report(9, ok, detail);
  }

  // 10: determinism.
  {
    RunConfig again = cfg;
    again.output_dir = work / "pipeline_repeat";
    const PipelineResult rerun = run_pipeline(again);
    bool same = rerun.summary_json() == run.summary_json();
    for (std::size_t i = 0; same && i < run.seeds.size(); ++i) {
      same = rerun.seeds[i].erm.to_json() == run.seeds[i].erm.to_json() &&
             rerun.seeds[i].debiased.to_json() == run.seeds[i].debiased.to_json() &&
             rerun.seeds[i].estimate.aligned == run.seeds[i].estimate.aligned &&
             rerun.seeds[i].f1.per_class == run.seeds[i].f1.per_class;
    }
    report(10, same, same ? "repeat run reproduced every metric bit-exactly" : "repeat run differs");
  }

  // 11: PCA shift on GCE embeddings, one class at a time.
  {
    const LoadedData data = load_data(cfg);
    bool ok = true;
    std::size_t passing = 0, total = 0;
    std::string detail = "per-class max(PC1, PC2) shift / pooled std, each must be > 2:";
    for (std::uint64_t seed : cfg.seeds) {
      const MlpModel gce = train_gce_model(data.train, identify_config(cfg, seed));
      const Matrix train_emb = forward(gce, data.train.feature_matrix()).embeddings;
      const Matrix test_emb = forward(gce, data.test.feature_matrix()).embeddings;
      detail += fmt(" seed %llu [", static_cast<unsigned long long>(seed));
      for (const auto& cls : class_pca_shift(train_emb, data.train, test_emb, data.test)) {
        const double r = cls.size() >= 2 ? std::max(cls[0].ratio, cls[1].ratio) : 0.0;
        ok = ok && r > 2.0;
        passing += r > 2.0;
        ++total;
        detail += fmt(" %.2f", r);
      }
      detail += " ]";
      // Whole test set on the PCs of all training embeddings, for reference.
      const auto whole = projection_shift(pca_top_components(train_emb, 2).project(test_emb), data.test.aligned_flags());
      detail += fmt(" (whole set %.2f)", std::max(whole[0].ratio, whole[1].ratio));
    }
    report(11, ok, detail + fmt("; %zu of %zu classes pass", passing, total));
  }

  std::printf("%s: %d criteria failed\n", failures == 0 ? "ALL PASS" : "SOME FAIL", failures);
  return failures == 0 ? 0 : 1;
}
