#include <benchmark/benchmark.h>

#include "g2i/experiment.hpp"

using namespace g2i;

namespace {

Config bench_config(std::size_t windows) {
  Config c;
  c.grid.window_M = windows;
  return c;
}

/// One 4x4 trace and its events, shared by the later stages.
struct Fixture {
  Config config = bench_config(100000);
  IntensityTrace trace = make_trace(config, config.grid, 1);
  EventStream events = simulate_events(config, trace, {}, 1);
  BinaryWindowSet bins = binarize(events, config.grid);
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

} // namespace

static void BM_synthesize(benchmark::State& state) {
  auto config = bench_config(100000);
  config.source.modes = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(make_trace(config, config.grid, 1));
  state.counters["pixels"] = static_cast<double>(config.geometry.pixel_count());
}
BENCHMARK(BM_synthesize)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);

static void BM_detect(benchmark::State& state) {
  const auto& f = fixture();
  std::size_t events = 0;
  for (auto _ : state) {
    const auto stream = simulate_events(f.config, f.trace, {}, 1);
    events = 0;
    for (std::size_t p = 0; p < stream.pixel_count(); ++p) events += stream.accepted(p);
  }
  state.counters["events/s"] = benchmark::Counter(static_cast<double>(events), benchmark::Counter::kIsIterationInvariantRate);
}
BENCHMARK(BM_detect)->Unit(benchmark::kMillisecond);

static void BM_binarize(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(binarize(f.events, f.config.grid));
}
BENCHMARK(BM_binarize)->Unit(benchmark::kMillisecond);

static void BM_correlate_pair(benchmark::State& state) {
  const auto& f = fixture();
  const auto variant = state.range(0) == 0 ? Variant::global : Variant::per_window;
  for (auto _ : state) benchmark::DoNotOptimize(g2_pair(f.bins, 5, 6, variant));
}
BENCHMARK(BM_correlate_pair)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);

static void BM_correlate_all_pairs(benchmark::State& state) {
  const auto& f = fixture();
  const auto threads = static_cast<unsigned>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(g2_all_pairs(f.bins, Variant::per_window, &f.config.geometry, threads));
  }
  state.counters["pairs"] = 120;
}
BENCHMARK(BM_correlate_all_pairs)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

static void BM_start_stop(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) {
    benchmark::DoNotOptimize(start_stop_histogram(f.events.times_ps[5], f.events.times_ps[6], 1000, 100000));
  }
}
BENCHMARK(BM_start_stop)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
