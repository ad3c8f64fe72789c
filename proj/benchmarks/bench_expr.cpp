#include <benchmark/benchmark.h>

#include "kinforge/expr.hpp"
#include "kinforge/rng.hpp"

using namespace kinforge;

static void BM_Evaluate(benchmark::State& state) {
    const Expr e = parse_expr("((0.5 * gdot) * (X_L - (X_V / (3.0 * (T - 0.2)))))");
    std::vector<double> f{0.6, 0.2, 0.4, 0.1, 0.3, 0.7, 0.9};
    for (auto _ : state) {
        const double v = e.evaluate(f);
        benchmark::DoNotOptimize(v);
    }
}
BENCHMARK(BM_Evaluate);

static void BM_Simplify(benchmark::State& state) {
    const Expr e = parse_expr("(((X_W * 1.0) + 0.0) * ((2.0 * 3.0) - (X_L - X_L)))");
    for (auto _ : state) {
        const Expr s = simplify(e);
        benchmark::DoNotOptimize(s);
    }
}
BENCHMARK(BM_Simplify);

BENCHMARK_MAIN();
