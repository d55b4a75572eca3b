// Serial reference against the OpenMP path for the parallel kernels.

#include <benchmark/benchmark.h>

#include "gpusentinel/classifiers.hpp"
#include "gpusentinel/features.hpp"
#include "gpusentinel/simulator.hpp"

using namespace gpusentinel;

namespace {

Exec exec_of(const benchmark::State& state) { return state.range(0) ? Exec::parallel : Exec::serial; }

const std::vector<Trace>& corpus() {
  static const auto c = make_corpus(6, 6, ScenarioConfig{}, 42);
  return c;
}

const Dataset& dataset() {
  static const Dataset ds = build_dataset(corpus(), WindowSpec{});
  return ds;
}

void BM_MakeCorpus(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(make_corpus(4, 4, ScenarioConfig{}, 42, exec_of(state)));
}

void BM_BuildDataset(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(build_dataset(corpus(), WindowSpec{}, exec_of(state)));
}

void BM_TrainForest(benchmark::State& state) {
  ForestHyper hyper;
  hyper.tree_count = 50;
  for (auto _ : state) benchmark::DoNotOptimize(train_forest(dataset(), hyper, 42, exec_of(state)));
}

}  // namespace

// Argument 0 runs the serial reference, 1 the parallel path.
BENCHMARK(BM_MakeCorpus)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BuildDataset)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TrainForest)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
