#ifndef KINFORGE_MBDOE_HPP
#define KINFORGE_MBDOE_HPP

#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "kinforge/expr.hpp"
#include "kinforge/optimize.hpp"
#include "kinforge/plant.hpp"
#include "kinforge/sr.hpp"

namespace kinforge {

/// One selected rate-law candidate, kept in the scaled feature space it was
/// fitted in, together with everything needed to close the balance model.
struct RateCandidate {
    Expr expr;
    int complexity = 0;
    double loss = 0.0;
    double score = 0.0;
    bool gated = false;  // multiply by H(T - T_K) outside the expression
};

/// Top-k candidates per rate equation. Members are the Cartesian product of
/// the per-rate candidate lists (3 x 3 x 3 = 27 by default); the point
/// prediction uses index 0 of each list (the top scorer).
struct ModelEnsemble {
    FeatureSpec features;  // shared raw->scaled divisors
    std::array<double, 3> target_scales{1.0, 1.0, 1.0};
    std::array<std::vector<RateCandidate>, 3> candidates;

    int member_count() const {
        int n = 1;
        for (const auto& c : candidates) n *= static_cast<int>(c.size());
        return n;
    }
    std::array<int, 3> member_indices(int member) const;
    RateFn member_rates(int member) const;
    RateFn point_rates() const;

    void validate() const;
};

struct ProcessGoal {
    double psi_target = 7.0;
    double kappa = 0.03;
    bool include_batch_time = true;
    double epsilon_weight = 40.0;  // scales the quadratic miss onto minutes

    void validate() const;
};

struct AlphaState {
    double alpha = 0.5;  // exploration weight before any experiment
    double last_dj_m = std::numeric_limits<double>::quiet_NaN();
    double last_dj_p = std::numeric_limits<double>::quiet_NaN();
    double j_m_max = std::numeric_limits<double>::quiet_NaN();
    double j_p_max = std::numeric_limits<double>::quiet_NaN();
    double alpha_threshold = 1e-3;
};

struct KpiPrediction {
    bool ok = false;
    double final_kpi = std::numeric_limits<double>::quiet_NaN();
    std::vector<std::pair<double, double>> profile;
};

/// Simulates the recipe with a learned rate closure substituted for the
/// ground truth. A non-finite model output flags the member infeasible.
KpiPrediction predict_kpi(const PfdParams& params, const PlantConfig& cfg, const RateFn& member);

struct InfoResult {
    double j_m = 0.0;  // negative variance of the members' final KPIs
    int feasible = 0;
    int infeasible = 0;
    std::vector<double> psi_hats;  // per member, NaN when infeasible
};

InfoResult info_objective(const PfdParams& params, const PlantConfig& cfg,
                          const ModelEnsemble& ensemble, int workers = 1);

struct ProcessResult {
    double j_p = 0.0;
    double tau_min = 0.0;
    double epsilon = 0.0;
    double psi_hat = std::numeric_limits<double>::quiet_NaN();
    bool feasible = true;
};

/// (psi_t - psi_hat)^2 - (kappa psi_t)^2; negative inside the tolerance band.
double kpi_miss_epsilon(double psi_hat, const ProcessGoal& goal);

ProcessResult process_objective(const PfdParams& params, const PlantConfig& cfg,
                                const RateFn& point_model, const ProcessGoal& goal);

struct Normalizers {
    double j_m_max = 1.0;  // maximum achievable variance magnitude
    double j_p_max = 1.0;
};

/// Searches the design box for the normalisation constants with the same
/// global+local optimizer; floors at 1e-12.
Normalizers compute_normalizers(const PlantConfig& cfg, const ModelEnsemble& ensemble,
                                const ProcessGoal& goal, const OptimBudget& budget,
                                int workers = 1);

/// The convex combination alpha * J_M / J_M^max + (1 - alpha) * J_P / J_P^max.
double combined_objective(double j_m, double j_p, const Normalizers& norms, double alpha);

struct DesignResult {
    std::vector<double> theta;
    double value = 0.0;
    int evaluations = 0;
};

/// Two-stage search (Latin hypercube + surrogate-guided sampling, then
/// simplex refinement) over the design box. Deterministic per (seed, budget).
DesignResult design_experiment(const ObjectiveFn& objective, const Bounds& space,
                               const OptimBudget& budget, Rng rng);

/// Objective closures for the two campaign modes. Both take the full theta
/// vector of the free parameters. The combined objective falls back to pure
/// process optimisation when fewer than two ensemble members are feasible.
ObjectiveFn make_discrimination_objective(const PlantConfig& cfg, const ModelEnsemble& ensemble,
                                          int workers = 1);
ObjectiveFn make_combined_objective(const PlantConfig& cfg, const ModelEnsemble& ensemble,
                                    const ProcessGoal& goal, double alpha,
                                    const Normalizers& norms, int workers = 1);

/// Exploration-exploitation update from one finished experiment:
/// dJ_M = (psi_hat - psi_a)^2, dJ_P = max((psi_t - psi_a)^2 - (kappa psi_t)^2, 0),
/// alpha = dJ_M / (dJ_M + dJ_P), with 0/0 mapped to pure exploitation.
AlphaState update_alpha(double predicted_kpi, double actual_kpi, const ProcessGoal& goal,
                        AlphaState state);

struct GridPoint {
    double x = 0.0;
    double y = 0.0;
    double value = 0.0;
};

/// 2-D slice of an objective over design dimensions (dim_i, dim_j) with the
/// remaining components held at `at`.
std::vector<GridPoint> objective_grid(const ObjectiveFn& objective, const Bounds& space, int dim_i,
                                      int dim_j, int resolution, const std::vector<double>& at);

}  // namespace kinforge

#endif
