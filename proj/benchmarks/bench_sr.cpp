#include <benchmark/benchmark.h>

#include "kinforge/sr.hpp"

using namespace kinforge;

namespace {

Dataset toy_dataset() {
    Dataset ds;
    ds.n_features = 7;
    Rng rng(3);
    for (int i = 0; i < 400; ++i) {
        std::array<double, 7> f{};
        for (double& v : f) v = rng.uniform(0.05, 1.0);
        for (double v : f) ds.features.push_back(v);
        ds.targets.push_back(f[6] * (f[2] - f[3] / (3.0 * f[5])));
    }
    ds.feature_spec = FeatureSpec::identity(default_feature_names());
    return ds;
}

}  // namespace

static void BM_TournamentBatch(benchmark::State& state) {
    const Dataset ds = toy_dataset();
    FitConfig cfg;
    cfg.population_count = 1;
    cfg.template_spec = TemplateSpec::rate_law();
    Population pop;
    pop.rng = Rng(11);
    for (int i = 0; i < cfg.population_size; ++i) {
        Individual ind;
        ind.expr = random_tree(cfg, pop.rng);
        ind.mse = weighted_mse(ind.expr, ds);
        ind.birth = ++pop.birth_counter;
        pop.members.push_back(std::move(ind));
    }
    const ParsimonySchedule sched = ParsimonySchedule::constant(1e-5, cfg.max_complexity);
    for (auto _ : state) {
        tournament_step(pop, ds, cfg, sched);
        benchmark::DoNotOptimize(pop.birth_counter);
    }
}
BENCHMARK(BM_TournamentBatch);

BENCHMARK_MAIN();
