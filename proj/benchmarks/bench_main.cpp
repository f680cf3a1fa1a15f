#include <benchmark/benchmark.h>

#include "rolab/product.hpp"
#include "rolab/spectral.hpp"
#include "rolab/tower.hpp"

namespace {

using namespace rolab;

tower::Construction chacon(i64 stages) {
  return tower::build_construction(tower::RankOneSpec::chacon(1, static_cast<std::size_t>(stages)),
                                   stages);
}

void BM_BuildStaircase(benchmark::State& state) {
  std::vector<i64> cuts;
  for (i64 n = 0; n < state.range(0); ++n) cuts.push_back(3 + (n % 5));
  auto spec = tower::RankOneSpec::staircase(1, cuts, Rat(1, 64));
  for (auto _ : state) {
    auto c = tower::build_construction(spec, state.range(0) + 1);
    benchmark::DoNotOptimize(c.stage_count());
  }
}
BENCHMARK(BM_BuildStaircase)->Arg(8)->Arg(16);

void BM_CorrelationBatch(benchmark::State& state) {
  auto c = chacon(9);
  auto f = tower::zero_mean(c, tower::indicator(c, 2, {0}));
  for (auto _ : state) {
    auto seq = tower::correlation_sequence(c, f, f, -state.range(0), state.range(0),
                                           tower::kBestEffort);
    benchmark::DoNotOptimize(seq.entries.size());
  }
}
BENCHMARK(BM_CorrelationBatch)->Arg(64)->Arg(256);

void BM_PairCountWindow(benchmark::State& state) {
  auto c = chacon(12);
  tower::Resolver resolver(c, 2);
  resolver.ensure_stage(c.deepest_stage());
  for (auto _ : state) {
    auto counts = resolver.pair_count_window(-state.range(0), state.range(0));
    benchmark::DoNotOptimize(counts.size());
  }
}
BENCHMARK(BM_PairCountWindow)->Arg(256)->Arg(2048);

void BM_TensorCanonicalize(benchmark::State& state) {
  product::BaseRegistry reg;
  int f = reg.add("f", Rat(1, 8));
  for (auto _ : state) {
    product::FormalTensor t;
    for (i64 i = 0; i < state.range(0); ++i)
      t += product::pair_power_tensor(f, i % 13, (7 * i) % 11);
    benchmark::DoNotOptimize(t.terms().size());
  }
}
BENCHMARK(BM_TensorCanonicalize)->Arg(64)->Arg(512);

void BM_FejerDensity(benchmark::State& state) {
  auto c = chacon(9);
  auto f = spectral::random_zero_mean(c, 2, 7);
  auto seq = tower::correlation_sequence(c, f, f, -256, 256, tower::kBestEffort);
  for (auto _ : state) {
    auto est = spectral::fejer_density(seq, state.range(0), 4 * state.range(0));
    benchmark::DoNotOptimize(est.density.size());
  }
}
BENCHMARK(BM_FejerDensity)->Arg(32)->Arg(128);

}  // namespace

BENCHMARK_MAIN();
