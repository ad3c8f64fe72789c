#ifndef KINFORGE_SR_HPP
#define KINFORGE_SR_HPP

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "kinforge/dataset.hpp"
#include "kinforge/expr.hpp"
#include "kinforge/rng.hpp"

namespace kinforge {

/// Relative weights of the move kinds a tournament winner's copy can take.
/// `none` is the chance the copy survives untouched.
struct MutationWeights {
    double perturb_constant = 2.0;
    double replace_operator = 1.0;
    double replace_subtree = 1.0;
    double insert_node = 1.5;
    double delete_node = 1.0;
    double crossover = 1.5;
    double none = 0.4;
};

struct FitConfig {
    std::vector<BinOp> operators{BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div};
    int n_features = 7;
    int max_complexity = 20;
    int population_count = 45;
    int population_size = 33;
    int max_iterations = 10000;  // tournament batches (one batch = size tournaments per population)
    int convergence_window = 500;
    double convergence_rel_tol = 1e-9;
    int tournament_size = 10;
    double selection_p = 0.9;  // geometric ranking sharpness, in (0.5, 1]
    MutationWeights mutation;
    double parsimony_base_frac = 1e-3;   // base parsimony as a fraction of target variance
    double parsimony_adapt_rate = 0.05;  // EMA rate of the complexity-frequency tracker
    std::vector<double> lambda_diag{1.0, 1.0, 1.0};  // per-output loss weights
    std::uint64_t seed = 0;
    double wall_clock_seconds = std::numeric_limits<double>::infinity();
    TemplateSpec template_spec = TemplateSpec::disabled();

    // engine cadence
    int simplify_every = 25;
    int optimize_every = 25;
    int migrate_every = 50;
    int optimize_iterations = 12;
    double seed_fraction = 0.1;  // carry-over share of each population
    int mutation_retry_cap = 24;
    int workers = 1;

    void validate() const;  // throws std::invalid_argument
};

struct ParetoEntry {
    Expr expr;
    int complexity = 0;
    double loss = 0.0;   // Eq-1a value without the parsimony term
    double score = 0.0;  // negated log-loss slope vs the previous entry
};

struct ParetoFront {
    std::vector<ParetoEntry> entries;
    int rate_index = -1;
    int iteration = -1;
    double baseline_loss = std::numeric_limits<double>::quiet_NaN();

    bool empty() const { return entries.empty(); }
    void validate() const;  // strict complexity/loss monotonicity
};

/// Weighted mean square error; +inf when any prediction is non-finite.
double weighted_mse(const Expr& expr, const Dataset& data);

/// MSE plus complexity * parsimony, or +inf when the template rejects the
/// tree (in which case the data pass is skipped entirely).
double fitness(const Expr& expr, const Dataset& data, double parsimony,
               const TemplateSpec& template_spec);

/// Random tree generation honouring the structural template by construction.
Expr random_tree(const FitConfig& cfg, Rng& rng);

/// One structural edit drawn from the configured move weights. When the
/// template is enabled, proposals that break it are resampled up to the retry
/// cap; if none survives, the input is returned unchanged.
Expr mutate(const Expr& expr, const FitConfig& cfg, Rng& rng,
            const Expr* crossover_partner = nullptr);

struct Individual {
    Expr expr;
    double mse = std::numeric_limits<double>::infinity();
    std::uint64_t birth = 0;
};

struct Population {
    std::vector<Individual> members;
    Rng rng{0};
    std::uint64_t birth_counter = 0;
};

/// Per-complexity parsimony coefficients (the adaptive weighting).
struct ParsimonySchedule {
    std::vector<double> coeff;  // indexed by complexity

    double at(int complexity) const {
        if (coeff.empty()) return 0.0;
        const int c = std::min<int>(complexity, static_cast<int>(coeff.size()) - 1);
        return coeff[static_cast<std::size_t>(std::max(0, c))];
    }
    static ParsimonySchedule constant(double value, int max_complexity);
};

/// One round of tournament selection: sample a subset, pick the winner by
/// geometric ranking, replace the subset's oldest member (the population
/// best is never displaced) with a possibly-mutated copy of the winner.
void tournament_step(Population& pop, const Dataset& data, const FitConfig& cfg,
                     const ParsimonySchedule& parsimony);

/// Full evolve-simplify-optimize loop over parallel populations with a
/// hall-of-fame per complexity level; returns the scored Pareto front.
ParetoFront evolve(const Dataset& data, const FitConfig& cfg,
                   const std::vector<Expr>& seed_population = {});

/// Attaches the negated log-loss derivative scores. Entry i >= 2 is scored
/// against its predecessor; the simplest entry against the best-constant
/// baseline at complexity 1. Losses are clamped at 1e-300 before the log.
ParetoFront score_front(ParetoFront front);

/// k highest-scoring entries, ties broken toward lower complexity.
std::vector<ParetoEntry> select_top(const ParetoFront& front, int k);

/// Local damped least-squares refinement of the numerical constants;
/// returns the input expression when no improvement is found.
Expr optimize_constants(const Expr& expr, const Dataset& data, int max_iterations = 12);

}  // namespace kinforge

#endif
