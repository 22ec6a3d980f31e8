// Parallel kernels against their serial references.
#include <benchmark/benchmark.h>

#include <random>

#include "mfgrid/batch.hpp"
#include "mfgrid/gtk.hpp"
#include "mfgrid/model_config.hpp"

using namespace mfgrid;

namespace {

GridModel mulfa(int res) {
  ModelConfig cfg;
  cfg.geometry.resolution = {res, res};
  return build_model(cfg, 2, 1, 1);
}

RowMatrix points(Eigen::Index n) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RowMatrix x(n, 2);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = u(rng);
  return x;
}

void BM_WeightsParallel(benchmark::State& state) {
  const auto model = mulfa(32);
  const SampleStencil stencil(model, points(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(compute_weights(model, stencil));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_WeightsSerial(benchmark::State& state) {
  const auto model = mulfa(32);
  const SampleStencil stencil(model, points(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(compute_weights_reference(model, stencil));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_ForwardParallel(benchmark::State& state) {
  auto model = mulfa(64);
  std::mt19937_64 rng(3);
  model.init_features_uniform(1.0, rng);
  const SampleStencil stencil(model, points(state.range(0)));
  const auto w = compute_weights(model, stencil).weights;
  for (auto _ : state) benchmark::DoNotOptimize(batch_forward(model.features(), stencil, w));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_ForwardSerial(benchmark::State& state) {
  auto model = mulfa(64);
  std::mt19937_64 rng(3);
  model.init_features_uniform(1.0, rng);
  const SampleStencil stencil(model, points(state.range(0)));
  const auto w = compute_weights(model, stencil).weights;
  for (auto _ : state) benchmark::DoNotOptimize(batch_forward_reference(model.features(), stencil, w));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_GtkParallel(benchmark::State& state) {
  const auto model = mulfa(16);
  const auto x = points(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(gtk_compute(model, x));
}

void BM_GtkSerial(benchmark::State& state) {
  const auto model = mulfa(16);
  const auto x = points(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(gtk_compute_reference(model, x));
}

}  // namespace

BENCHMARK(BM_WeightsParallel)->Arg(4096)->Arg(65536);
BENCHMARK(BM_WeightsSerial)->Arg(4096)->Arg(65536);
BENCHMARK(BM_ForwardParallel)->Arg(65536);
BENCHMARK(BM_ForwardSerial)->Arg(65536);
BENCHMARK(BM_GtkParallel)->Arg(100)->Arg(1000);
BENCHMARK(BM_GtkSerial)->Arg(100)->Arg(1000);

BENCHMARK_MAIN();
