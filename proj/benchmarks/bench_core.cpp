#include <random>

#include <benchmark/benchmark.h>

#include "modad/biasid.hpp"
#include "modad/detectors.hpp"
#include "modad/netcore.hpp"
#include "modad/rng.hpp"
#include "modad/sampling.hpp"

using namespace modad;

namespace {

Matrix gaussian(int n, int d, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> nd;
  Matrix x(n, d);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = nd(rng);
  return x;
}

void bm_ocsvm_fit(benchmark::State& state) {
  const Matrix x = gaussian(static_cast<int>(state.range(0)), 16, 1);
  for (auto _ : state) benchmark::DoNotOptimize(fit_ocsvm(x, 0.5));
}
BENCHMARK(bm_ocsvm_fit)->Arg(100)->Arg(400)->Arg(1000)->Unit(benchmark::kMillisecond);

void bm_ocsvm_score(benchmark::State& state) {
  const Matrix x = gaussian(1000, 16, 2);
  const OcsvmModel m = fit_ocsvm(x, 0.5);
  const Matrix q = gaussian(256, 16, 3);
  for (auto _ : state)
    for (Eigen::Index i = 0; i < q.rows(); ++i)
      benchmark::DoNotOptimize(ocsvm_score(m, std::span<const double>(q.row(i).data(), 16)));
  state.SetItemsProcessed(state.iterations() * q.rows());
}
BENCHMARK(bm_ocsvm_score);

void bm_detector_fit(benchmark::State& state) {
  const Matrix x = gaussian(1000, 16, 4);
  DetectorConfig cfg;
  cfg.kind = static_cast<DetectorKind>(state.range(0));
  state.SetLabel(to_string(cfg.kind));
  for (auto _ : state) benchmark::DoNotOptimize(fit_detector(cfg, x));
}
BENCHMARK(bm_detector_fit)->DenseRange(1, 3)->Unit(benchmark::kMillisecond);

void bm_gradient_step(benchmark::State& state) {
  const MlpModel m = init_mlp(20, NetworkShape{}, 10, 5);
  const Matrix x = gaussian(64, 20, 6);
  std::vector<int> y(64);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<int>(i % 10);
  std::vector<double> grads;
  const LossKind kind = state.range(0) == 0 ? LossKind::ce : LossKind::gce;
  for (auto _ : state) benchmark::DoNotOptimize(loss_and_gradients(m, x, y, kind, 0.7, grads));
}
BENCHMARK(bm_gradient_step)->Arg(0)->Arg(1);

void bm_draw_batch(benchmark::State& state) {
  std::vector<int> groups(10000, 1);
  for (std::size_t i = 0; i < 500; ++i) groups[i] = 0;
  const SamplerWeights w = inverse_population_weights(groups);
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(draw_batch(w, static_cast<std::size_t>(state.range(0)), ++seed));
}
BENCHMARK(bm_draw_batch)->Arg(64)->Arg(10000);

}  // namespace

BENCHMARK_MAIN();
