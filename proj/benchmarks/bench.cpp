#include <benchmark/benchmark.h>

#include "shemfc/chaos.hpp"
#include "shemfc/kernels.hpp"
#include "shemfc/localtime.hpp"
#include "shemfc/mc.hpp"

using namespace shemfc;

static void BM_PhiloxU64(benchmark::State& state) {
  RngStream r(1, 1);
  for (auto _ : state) benchmark::DoNotOptimize(r.next_u64());
}
BENCHMARK(BM_PhiloxU64);

static void BM_Normal(benchmark::State& state) {
  RngStream r(1, 2);
  for (auto _ : state) benchmark::DoNotOptimize(r.normal());
}
BENCHMARK(BM_Normal);

static void BM_SampleBundle(benchmark::State& state) {
  RngStream base(1, 3);
  std::uint64_t i = 0;
  for (auto _ : state)
    benchmark::DoNotOptimize(sample_bundle(base.substream(i++), 2, 1, 0.5, state.range(0)));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_SampleBundle)->Arg(64)->Arg(256);

static void BM_MollifiedLookupRiesz(benchmark::State& state) {
  const KernelSpec spec(KernelFamily::Riesz, 1.0, 2);
  const MollifiedKernel kernel(spec, 0.1, 16.0);
  double r2 = 0.01;
  for (auto _ : state) {
    benchmark::DoNotOptimize(kernel.at_dist2(r2));
    r2 = r2 < 20.0 ? r2 * 1.01 : 0.01;
  }
}
BENCHMARK(BM_MollifiedLookupRiesz);

static void BM_LocalTimePair(benchmark::State& state) {
  const NoiseModel model(0.75, KernelSpec(KernelFamily::Heat, 1.0, 1));
  const WeightSpec w = WeightSpec::fractional(0.75);
  const int n = int(state.range(0));
  const LocalTimeGrid grid(w, 0.5, n);
  const MollifiedKernel kernel(model.kernel, 0.1, kernel_table_span(0.5));
  const PathBundle b = sample_bundle(RngStream(7, 7), 2, 1, 0.5, n);
  for (auto _ : state)
    benchmark::DoNotOptimize(local_time_on_paths(b, 0, 1, grid, kernel));
}
BENCHMARK(BM_LocalTimePair)->Arg(64)->Arg(128)->Arg(256);

static void BM_Psi2Quadrature(benchmark::State& state) {
  const NoiseModel model(0.75, KernelSpec(KernelFamily::Riesz, 1.0, 2));
  const SigmaMatrix sig = SigmaMatrix::from_entries(2, {0.9, 0.3, 0.3, 0.7});
  for (auto _ : state)
    benchmark::DoNotOptimize(psi2_quadrature(model, sig, 0.1, int(state.range(0))));
}
BENCHMARK(BM_Psi2Quadrature)->Arg(48)->Arg(96);

static void BM_PsiMc(benchmark::State& state) {
  const NoiseModel model(0.75, KernelSpec(KernelFamily::Riesz, 1.0, 2));
  const SigmaMatrix sig = SigmaMatrix::from_entries(2, {0.9, 0.3, 0.3, 0.7});
  for (auto _ : state)
    benchmark::DoNotOptimize(psi_n_mc(model, sig, 0.1, 1000, RngStream(3, 3)));
}
BENCHMARK(BM_PsiMc);

BENCHMARK_MAIN();
