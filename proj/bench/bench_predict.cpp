// Serial against OpenMP predict_curve on a synthetic training sample.

#include <benchmark/benchmark.h>
#include <omp.h>

#include "epy/species.hpp"

namespace {

struct Fixture {
  epy::NestedPartitionState train;
  epy::FittedModel model;
  epy::RunConfig config;

  Fixture() {
    epy::EpyModel truth;
    truth.alpha = 5.0;
    truth.default_params = epy::PyParams::make(0.4, 2.0);
    epy::Stream s(7, 0);
    const auto seq = epy::simulate_sequence(truth, 20000, s);
    train = epy::state_from_sequence(seq);
    model.alpha = truth.alpha;
    model.default_params = truth.default_params;
    config.grid = epy::default_grid(10000);
    config.reps = 200;
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

void BM_PredictSerial(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(epy::predict_curve_serial(f.train, f.model, f.config));
}

void BM_PredictParallel(benchmark::State& state) {
  const auto& f = fixture();
  auto config = f.config;
  config.threads = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(epy::predict_curve(f.train, f.model, config));
}

}  // namespace

BENCHMARK(BM_PredictSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PredictParallel)->Arg(1)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
