// Serial reference vs OpenMP kernels.

#include <benchmark/benchmark.h>

#include "shapestab/feasibility.hpp"
#include "shapestab/simulate.hpp"

using namespace shapestab;

namespace {

// Ring of n nodes, one neighborhood per adjacent pair plus the triples.
StorageNetwork ring(int n) {
  StorageNetwork net;
  net.n = n;
  for (int l = 0; l < n; ++l) net.neighborhoods.push_back({std::min(l, (l + 1) % n), std::max(l, (l + 1) % n)});
  for (int l = 0; l < n; ++l) {
    std::vector<int> s{l, (l + 1) % n, (l + 2) % n};
    std::sort(s.begin(), s.end());
    net.neighborhoods.push_back(s);
  }
  const int K = static_cast<int>(net.neighborhoods.size());
  for (int i = 0; i < K; ++i) net.rates.emplace_back(1, K);
  return net;
}

Execution mode(const benchmark::State& state) { return state.range(0) == 0 ? Execution::Serial : Execution::Parallel; }

void BM_SubsetScan(benchmark::State& state) {
  const auto net = ring(11);  // K = 22
  for (auto _ : state) benchmark::DoNotOptimize(check_subset_condition(net, mode(state)));
  state.SetLabel(state.range(0) == 0 ? "serial" : "parallel");
}
BENCHMARK(BM_SubsetScan)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_SubsetScanRationalReference(benchmark::State& state) {
  const auto net = ring(8);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::subset_scan_reference(net));
}
BENCHMARK(BM_SubsetScanRationalReference)->Unit(benchmark::kMillisecond);

void BM_Vertices(benchmark::State& state) {
  const auto net = ring(6);  // 2^6 * 3^6 choice functions
  for (auto _ : state) {
    if (state.range(0) == 0) {
      benchmark::DoNotOptimize(kernels::enumerate_vertices_serial(net));
    } else {
      benchmark::DoNotOptimize(kernels::enumerate_vertices_parallel(net));
    }
  }
  state.SetLabel(state.range(0) == 0 ? "serial" : "parallel");
}
BENCHMARK(BM_Vertices)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_Replicas(benchmark::State& state) {
  SimConfig cfg;
  cfg.net = ring(6);
  cfg.initial.loads.assign(6, 0);
  cfg.max_steps = 50'000;
  cfg.replicas = 16;
  cfg.record_every = default_record_every(cfg.max_steps);
  cfg.tau_cutoff = default_tau_cutoff(cfg.max_steps);
  const auto policy = Policy::jsq();
  for (auto _ : state) benchmark::DoNotOptimize(run_replicas(cfg, policy, mode(state)));
  state.SetItemsProcessed(state.iterations() * cfg.max_steps * cfg.replicas);
  state.SetLabel(state.range(0) == 0 ? "serial" : "parallel");
}
BENCHMARK(BM_Replicas)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
