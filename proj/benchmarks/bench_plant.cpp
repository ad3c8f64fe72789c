#include <benchmark/benchmark.h>

#include "kinforge/plant.hpp"

using namespace kinforge;

static void BM_SimulateNominal(benchmark::State& state) {
    const PlantConfig cfg;
    for (auto _ : state) {
        const Trajectory traj = simulate(cfg.nominal, cfg);
        benchmark::DoNotOptimize(traj.final_kpi);
    }
}
BENCHMARK(BM_SimulateNominal)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
