#ifndef KINFORGE_OPTIMIZE_HPP
#define KINFORGE_OPTIMIZE_HPP

#include <cstdint>
#include <functional>
#include <vector>

#include "kinforge/rng.hpp"

namespace kinforge {

struct Bounds {
    std::vector<double> lb, ub;

    int dim() const { return static_cast<int>(lb.size()); }
    void validate() const;  // throws std::invalid_argument
    std::vector<double> clip(std::vector<double> x) const;
    std::vector<double> midpoint() const;
};

/// Budget for the two-stage (global sampling + simplex refinement) search.
struct OptimBudget {
    int global_samples = 200;
    int local_evals = 200;
    std::uint64_t seed = 0;
};

struct OptResult {
    std::vector<double> x;
    double value = 0.0;
    int evaluations = 0;
};

using ObjectiveFn = std::function<double(const std::vector<double>&)>;

std::vector<std::vector<double>> latin_hypercube(const Bounds& bounds, int n, Rng& rng);

/// Bounded Nelder-Mead: candidate points are clipped to the box before
/// evaluation. Non-finite objective values are treated as worst.
OptResult nelder_mead(const ObjectiveFn& f, const std::vector<double>& x0, const Bounds& bounds,
                      int max_evals, double ftol = 1e-10);

/// Latin-hypercube seeding, then a surrogate-guided sequential sampler (RBF
/// interpolant with a distance-based exploration bonus), then Nelder-Mead
/// refinement from the incumbent. Deterministic for a fixed (seed, budget).
/// Throws std::runtime_error if every evaluation is non-finite.
OptResult minimize_global_local(const ObjectiveFn& f, const Bounds& bounds,
                                const OptimBudget& budget, Rng rng);

}  // namespace kinforge

#endif
