// Parallel kernels against their serial references.

#include <numeric>

#include <benchmark/benchmark.h>

#include "satweight/eval.hpp"
#include "satweight/residual_matrix.hpp"
#include "satweight/synth.hpp"
#include "satweight/train.hpp"

using namespace satweight;

namespace {

GenConfig config(std::size_t epochs, std::size_t n) {
  GenConfig g;
  g.epochs = epochs;
  g.n_satellites = {n, n};
  g.seed = 17;
  return g;
}

const std::vector<LabeledEpoch>& dataset() {
  static const auto data = generate_dataset(config(512, 12));
  return data;
}

void residual_matrix(benchmark::State& state, bool parallel) {
  const auto n = static_cast<std::size_t>(state.range(0));
  auto rng = epoch_stream(3, 0);
  const Epoch e = generate_epoch(config(1, n), rng).epoch;
  for (auto _ : state) {
    benchmark::DoNotOptimize(parallel ? build_residual_matrix(e) : build_residual_matrix_serial(e));
  }
}

void generation(benchmark::State& state, Execution exec) {
  const GenConfig g = config(static_cast<std::size_t>(state.range(0)), 12);
  for (auto _ : state) benchmark::DoNotOptimize(generate_dataset(g, exec));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void gradient(benchmark::State& state, bool parallel) {
  const LstmModel model = LstmModel::initialized({12, 64, 1, 12}, 5);
  std::vector<TrainingSample> batch;
  for (std::size_t i = 0; i < static_cast<std::size_t>(state.range(0)); ++i) batch.push_back(make_sample(dataset()[i], model));
  std::vector<std::size_t> idx(batch.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::vector<double> grad(model.parameter_count());
  for (auto _ : state) {
    benchmark::DoNotOptimize(parallel ? batch_gradient(model, batch, idx, grad) : batch_gradient_serial(model, batch, idx, grad));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void benchmark_run(benchmark::State& state, Execution exec) {
  BenchmarkConfig cfg;
  cfg.strategies = {Strategy::equal, Strategy::ground_truth, Strategy::genie, Strategy::sigma_model, Strategy::fde};
  for (auto _ : state) benchmark::DoNotOptimize(run_benchmark(dataset(), cfg, nullptr, exec));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(dataset().size()));
}

}  // namespace

BENCHMARK_CAPTURE(residual_matrix, serial, false)->Arg(12)->Arg(30)->Arg(60);
BENCHMARK_CAPTURE(residual_matrix, parallel, true)->Arg(12)->Arg(30)->Arg(60);
BENCHMARK_CAPTURE(generation, serial, Execution::serial)->Arg(256);
BENCHMARK_CAPTURE(generation, parallel, Execution::parallel)->Arg(256);
BENCHMARK_CAPTURE(gradient, serial, false)->Arg(32)->Arg(128);
BENCHMARK_CAPTURE(gradient, parallel, true)->Arg(32)->Arg(128);
BENCHMARK_CAPTURE(benchmark_run, serial, Execution::serial);
BENCHMARK_CAPTURE(benchmark_run, parallel, Execution::parallel);

BENCHMARK_MAIN();
