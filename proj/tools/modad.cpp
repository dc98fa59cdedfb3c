#include <cstdint>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "modad/pipeline.hpp"

namespace {

struct GlobalFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool overwrite = false;
};

modad::RunConfig resolve_config(const GlobalFlags& flags) {
  modad::RunConfig cfg;
  try {
    if (!flags.config.empty()) cfg = modad::load_run_config(flags.config);
  } catch (const std::exception& e) {
    throw modad::StageError("config", e.what());
  }
  if (flags.seed) cfg.seeds = {*flags.seed};
  if (!flags.out.empty()) cfg.output_dir = flags.out;
  if (flags.overwrite) cfg.overwrite = true;
  return cfg;
}

void print_summary(const modad::PipelineResult& r) {
  auto line = [](const char* name, const modad::MetricSummary& s) {
    std::printf("  %-30s %8.2f +- %.2f\n", name, s.mean, s.stddev);
  };
  std::printf("config %s, %zu seed(s), artifacts in %s\n", r.config_hash.c_str(), r.seeds.size(),
              r.output_dir.string().c_str());
  line("erm average accuracy", r.erm_average);
  line("erm conflicting accuracy", r.erm_conflicting);
  line("debiased average accuracy", r.debiased_average);
  line("debiased conflicting accuracy", r.debiased_conflicting);
  line("bias identification F1", r.f1);
  if (r.jtt_f1) line("jtt identification F1", *r.jtt_f1);
}

void print_eval(const modad::EvalReport& r) {
  std::printf("%-10s average %.2f", r.model.c_str(), r.average_accuracy);
  if (r.conflicting_accuracy) std::printf("  conflicting %.2f", *r.conflicting_accuracy);
  std::printf("\n");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"modad: bias identification by per-class anomaly detection, then debiasing"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalFlags flags;
  app.add_option("--config", flags.config, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", flags.seed, "run seed (replaces the config's seed list)");
  app.add_option("--out", flags.out, "output directory");
  app.add_flag("--overwrite", flags.overwrite, "allow writing into a non-empty output directory");

  auto* gen = app.add_subcommand("gen-data", "generate or load data and write the splits");
  auto* erm = app.add_subcommand("train-erm", "train the CE baseline");
  auto* gce = app.add_subcommand("train-gce", "train the GCE-biased model");
  auto* identify = app.add_subcommand("identify", "estimate the aligned/conflicting split");
  auto* debias = app.add_subcommand("debias", "fine-tune on the estimated split");
  auto* evaluate = app.add_subcommand("evaluate", "score every checkpoint on the test split");
  auto* pipeline = app.add_subcommand("pipeline", "run every stage for every seed");
  auto* ablate = app.add_subcommand("ablate", "run one ablation");
  std::string which;
  ablate->add_option("which", which, "detector | threshold | input_model | unbiased | jtt")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    const modad::RunConfig cfg = resolve_config(flags);
    const std::uint64_t seed = cfg.seeds.empty() ? 0 : cfg.seeds.front();
    if (gen->parsed()) {
      modad::step_gen_data(cfg);
    } else if (erm->parsed()) {
      modad::step_train_erm(cfg, seed);
    } else if (gce->parsed()) {
      modad::step_train_gce(cfg, seed);
    } else if (identify->parsed()) {
      modad::step_identify(cfg, seed);
    } else if (debias->parsed()) {
      modad::step_debias(cfg, seed);
    } else if (evaluate->parsed()) {
      for (const auto& r : modad::step_evaluate(cfg, seed)) print_eval(r);
    } else if (pipeline->parsed()) {
      print_summary(modad::run_pipeline(cfg));
    } else if (ablate->parsed()) {
      const modad::AblationKind kind = [&] {
        try {
          return modad::parse_ablation_kind(which);
        } catch (const std::exception& e) {
          throw modad::StageError("config", e.what());
        }
      }();
      std::cout << modad::run_ablation(cfg, kind).to_table();
    }
  } catch (const modad::StageError& e) {
    std::cerr << "modad: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "modad: [internal] " << e.what() << '\n';
    return 1;
  }
  return 0;
}
