#include "cardloss/invariants.hpp"
#include "cardloss/synthdata.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace cardloss;

PointCloud random_cloud(Index n, Index dim, std::uint64_t seed) {
  Rng rng(seed);
  Matrix p(n, dim);
  for (Index i = 0; i < p.size(); ++i) p.data()[i] = rng.normal();
  return PointCloud(std::move(p));
}

void BM_Magnitude(benchmark::State& state) {
  const PointCloud cloud = random_cloud(state.range(0), 10, 1);
  for (auto _ : state) benchmark::DoNotOptimize(magnitude(cloud));
}
BENCHMARK(BM_Magnitude)->RangeMultiplier(4)->Range(8, 2048)->Unit(benchmark::kMicrosecond);

void BM_Spread(benchmark::State& state) {
  const PointCloud cloud = random_cloud(state.range(0), 10, 1);
  for (auto _ : state) benchmark::DoNotOptimize(spread(cloud));
}
BENCHMARK(BM_Spread)->RangeMultiplier(4)->Range(8, 2048)->Unit(benchmark::kMicrosecond);

void BM_MagnitudeGradient(benchmark::State& state) {
  const PointCloud cloud = random_cloud(state.range(0), 10, 2);
  for (auto _ : state) {
    ValueAndGradient vg = magnitude_with_gradient(cloud);
    benchmark::DoNotOptimize(vg.gradient.data());
  }
}
BENCHMARK(BM_MagnitudeGradient)->RangeMultiplier(4)->Range(8, 2048)->Unit(benchmark::kMicrosecond);

void BM_Dedup(benchmark::State& state) {
  const PointCloud cloud = random_cloud(state.range(0), 10, 3);
  for (auto _ : state) {
    DedupResult r = dedup(cloud);
    benchmark::DoNotOptimize(r.multiplicities.data());
  }
}
BENCHMARK(BM_Dedup)->Arg(33)->Arg(257);

}  // namespace
