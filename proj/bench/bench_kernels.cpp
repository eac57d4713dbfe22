// Parallel kernels against their serial references.
#include <benchmark/benchmark.h>

#include "eqlab/fixtures.hpp"
#include "eqlab/spectrum.hpp"
#include "eqlab/walk.hpp"

using namespace eqlab;

namespace {

Execution mode(const benchmark::State& s) { return s.range(0) ? Execution::serial_reference : Execution::parallel; }

void BM_sample_paths(benchmark::State& s) {
  const auto sys = fixture_f1();
  SampleOptions o;
  o.execution = mode(s);
  for (auto _ : s) benchmark::DoNotOptimize(sample_paths(sys, surd_start(2), 30, 2000, 1, o));
  s.SetLabel(s.range(0) ? "serial_reference" : "parallel");
}

void BM_lyapunov(benchmark::State& s) {
  const auto sys = fixture_f1();
  const auto dec = decompose(sys);
  LyapunovOptions o;
  o.execution = mode(s);
  for (auto _ : s) benchmark::DoNotOptimize(lyapunov_estimate(sys, dec, 200, 500, 1, o));
  s.SetLabel(s.range(0) ? "serial_reference" : "parallel");
}

void BM_spectrum_scan(benchmark::State& s) {
  const auto ens = sample_paths(fixture_f1(), surd_start(2), 20, 20000, 1);
  for (auto _ : s) benchmark::DoNotOptimize(spectrum_scan(ens, 5, false, mode(s)));
  s.SetLabel(s.range(0) ? "serial_reference" : "parallel");
}

}  // namespace

BENCHMARK(BM_sample_paths)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_lyapunov)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_spectrum_scan)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
