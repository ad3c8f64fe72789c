#include "kinforge/sr.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "kinforge/linalg.hpp"
#include "kinforge/parallel.hpp"

namespace kinforge {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

void FitConfig::validate() const {
    if (operators.empty()) throw std::invalid_argument("FitConfig: empty operator set");
    if (max_complexity < 3) throw std::invalid_argument("FitConfig: max_complexity must be >= 3");
    if (population_count < 1) throw std::invalid_argument("FitConfig: population_count must be >= 1");
    if (population_size < 2) throw std::invalid_argument("FitConfig: population_size must be >= 2");
    if (max_iterations <= 0) throw std::invalid_argument("FitConfig: iteration budget of zero");
    if (!(wall_clock_seconds > 0.0))
        throw std::invalid_argument("FitConfig: wall-clock budget of zero");
    if (tournament_size < 2) throw std::invalid_argument("FitConfig: tournament_size must be >= 2");
    if (!(selection_p > 0.5 && selection_p <= 1.0))
        throw std::invalid_argument("FitConfig: selection_p must lie in (0.5, 1]");
    for (double l : lambda_diag)
        if (!(l > 0.0)) throw std::invalid_argument("FitConfig: lambda_diag entries must be positive");
    if (!(seed_fraction >= 0.0 && seed_fraction <= 1.0))
        throw std::invalid_argument("FitConfig: seed_fraction must lie in [0, 1]");
    if (convergence_window < 1) throw std::invalid_argument("FitConfig: convergence_window >= 1");
    if (workers < 1) throw std::invalid_argument("FitConfig: workers must be >= 1");
}

void ParetoFront::validate() const {
    for (std::size_t i = 1; i < entries.size(); ++i) {
        if (entries[i].complexity <= entries[i - 1].complexity)
            throw std::logic_error("ParetoFront: complexities must strictly increase");
        if (!(entries[i].loss < entries[i - 1].loss))
            throw std::logic_error("ParetoFront: losses must strictly decrease");
    }
}

double weighted_mse(const Expr& expr, const Dataset& data) {
    const int n = data.rows();
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        const double pred = expr.evaluate({data.row(i), static_cast<std::size_t>(data.n_features)});
        if (!std::isfinite(pred)) return kInf;
        const double r = pred - data.targets[static_cast<std::size_t>(i)];
        acc += r * r;
    }
    return data.weight * acc / static_cast<double>(n);
}

double fitness(const Expr& expr, const Dataset& data, double parsimony,
               const TemplateSpec& template_spec) {
    if (!check_template(expr, template_spec)) return kInf;  // data pass skipped
    const double mse = weighted_mse(expr, data);
    if (!std::isfinite(mse)) return kInf;
    return mse + static_cast<double>(complexity(expr)) * parsimony;
}

namespace {

double random_constant(Rng& rng) {
    double c = std::exp(rng.uniform(std::log(0.05), std::log(5.0)));
    if (rng.bernoulli(0.15)) c = -c;
    return c;
}

Expr random_leaf(const FitConfig& cfg, Rng& rng, int n_features) {
    if (rng.bernoulli(0.65) && n_features > 0) return Expr::variable(rng.uniform_int(n_features));
    (void)cfg;
    return Expr::constant(random_constant(rng));
}

Expr grow_tree(int budget, const FitConfig& cfg, Rng& rng, int n_features) {
    if (budget < 3 || rng.bernoulli(0.3 + 0.7 / (1.0 + budget)))
        return random_leaf(cfg, rng, n_features);
    const BinOp op = cfg.operators[static_cast<std::size_t>(
        rng.uniform_int(static_cast<int>(cfg.operators.size())))];
    const int left = 1 + rng.uniform_int(budget - 2);
    return Expr::binary(op, grow_tree(left, cfg, rng, n_features),
                        grow_tree(budget - 1 - left, cfg, rng, n_features));
}

}  // namespace

Expr random_tree(const FitConfig& cfg, Rng& rng) {
    const int n_features = cfg.n_features;
    if (!cfg.template_spec.enabled) {
        const int budget = 1 + rng.uniform_int(cfg.max_complexity);
        return grow_tree(budget, cfg, rng, n_features);
    }
    // Assemble k(.) x [f(.) - b(.) / K(.)] from independently grown slots.
    for (int attempt = 0; attempt < 50; ++attempt) {
        const int nf = 1 + rng.uniform_int(5);
        const int nb = 1 + rng.uniform_int(3);
        const int nk = 1 + rng.uniform_int(5);
        Expr core = Expr::binary(
            BinOp::Sub, grow_tree(nf, cfg, rng, n_features),
            Expr::binary(BinOp::Div, grow_tree(nb, cfg, rng, n_features),
                         grow_tree(nk, cfg, rng, n_features)));
        const int factors = 1 + rng.uniform_int(3);
        Expr tree = core;
        for (int i = 0; i < factors; ++i)
            tree = Expr::binary(BinOp::Mul, grow_tree(1 + rng.uniform_int(3), cfg, rng, n_features),
                                tree);
        if (tree.size() <= cfg.max_complexity) return tree;
    }
    return Expr::binary(BinOp::Mul, Expr::constant(random_constant(rng)),
                        Expr::binary(BinOp::Sub, random_leaf(cfg, rng, n_features),
                                     Expr::binary(BinOp::Div, random_leaf(cfg, rng, n_features),
                                                  Expr::constant(random_constant(rng)))));
}

namespace {

enum class MoveKind {
    PerturbConstant,
    ReplaceOperator,
    ReplaceSubtree,
    InsertNode,
    DeleteNode,
    Crossover,
    None,
};

MoveKind pick_move(const MutationWeights& w, bool crossover_available, Rng& rng) {
    const double weights[7] = {w.perturb_constant, w.replace_operator, w.replace_subtree,
                               w.insert_node,      w.delete_node,
                               crossover_available ? w.crossover : 0.0,
                               w.none};
    double total = 0.0;
    for (double v : weights) total += std::max(0.0, v);
    if (total <= 0.0) return MoveKind::None;
    double u = rng.uniform01() * total;
    for (int i = 0; i < 7; ++i) {
        u -= std::max(0.0, weights[i]);
        if (u <= 0.0) return static_cast<MoveKind>(i);
    }
    return MoveKind::None;
}

std::optional<Expr> apply_move(const Expr& e, MoveKind kind, const FitConfig& cfg, Rng& rng,
                               const Expr* partner, int n_features) {
    switch (kind) {
        case MoveKind::PerturbConstant: {
            std::vector<int> const_idx;
            for (int i = 0; i < e.size(); ++i)
                if (e.node(i).kind == ExprNode::Kind::Constant) const_idx.push_back(i);
            if (const_idx.empty()) return std::nullopt;
            const int at = const_idx[static_cast<std::size_t>(
                rng.uniform_int(static_cast<int>(const_idx.size())))];
            double c = e.node(at).value;
            c = c == 0.0 ? 0.1 * rng.normal() : c * std::exp(0.3 * rng.normal());
            if (!std::isfinite(c) || std::abs(c) > 1e12) return std::nullopt;
            return e.with_replaced(at, Expr::constant(c));
        }
        case MoveKind::ReplaceOperator: {
            std::vector<int> ops;
            for (int i = 0; i < e.size(); ++i)
                if (e.node(i).kind == ExprNode::Kind::Op) ops.push_back(i);
            if (ops.empty()) return std::nullopt;
            const int at = ops[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(ops.size())))];
            const BinOp next = cfg.operators[static_cast<std::size_t>(
                rng.uniform_int(static_cast<int>(cfg.operators.size())))];
            if (next == e.node(at).op) return std::nullopt;
            std::vector<ExprNode> nodes(e.nodes().begin(), e.nodes().end());
            nodes[static_cast<std::size_t>(at)].op = next;
            return Expr::from_nodes(std::move(nodes));
        }
        case MoveKind::ReplaceSubtree: {
            const int at = rng.uniform_int(e.size());
            const int sub_size = e.subtree_end(at) - at;
            const int budget = cfg.max_complexity - (e.size() - sub_size);
            if (budget < 1) return std::nullopt;
            const int target = 1 + rng.uniform_int(std::min(budget, sub_size + 4));
            return e.with_replaced(at, grow_tree(target, cfg, rng, n_features));
        }
        case MoveKind::InsertNode: {
            if (e.size() + 2 > cfg.max_complexity) return std::nullopt;
            const int at = rng.uniform_int(e.size());
            const BinOp op = cfg.operators[static_cast<std::size_t>(
                rng.uniform_int(static_cast<int>(cfg.operators.size())))];
            const Expr leaf = random_leaf(cfg, rng, n_features);
            const Expr sub = e.subtree(at);
            const Expr repl = rng.bernoulli(0.5) ? Expr::binary(op, sub, leaf)
                                                 : Expr::binary(op, leaf, sub);
            return e.with_replaced(at, repl);
        }
        case MoveKind::DeleteNode: {
            std::vector<int> ops;
            for (int i = 0; i < e.size(); ++i)
                if (e.node(i).kind == ExprNode::Kind::Op) ops.push_back(i);
            if (ops.empty()) return std::nullopt;
            const int at = ops[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(ops.size())))];
            const int child = rng.bernoulli(0.5) ? e.left_child(at) : e.right_child(at);
            return e.with_replaced(at, e.subtree(child));
        }
        case MoveKind::Crossover: {
            if (partner == nullptr || partner->empty()) return std::nullopt;
            const int at = rng.uniform_int(e.size());
            const int sub_size = e.subtree_end(at) - at;
            const int budget = cfg.max_complexity - (e.size() - sub_size);
            if (budget < 1) return std::nullopt;
            for (int tries = 0; tries < 8; ++tries) {
                const int pat = rng.uniform_int(partner->size());
                const int psize = partner->subtree_end(pat) - pat;
                if (psize <= budget) return e.with_replaced(at, partner->subtree(pat));
            }
            return std::nullopt;
        }
        case MoveKind::None:
            return e;
    }
    return std::nullopt;
}

}  // namespace

Expr mutate(const Expr& expr, const FitConfig& cfg, Rng& rng, const Expr* crossover_partner) {
    const int n_features = cfg.n_features;
    for (int attempt = 0; attempt < cfg.mutation_retry_cap; ++attempt) {
        const MoveKind kind = pick_move(cfg.mutation, crossover_partner != nullptr, rng);
        std::optional<Expr> candidate = apply_move(expr, kind, cfg, rng, crossover_partner, n_features);
        if (!candidate) continue;
        if (candidate->size() > cfg.max_complexity) continue;
        if (!check_template(*candidate, cfg.template_spec)) continue;
        return std::move(*candidate);
    }
    return expr;  // retry cap exhausted, keep the parent
}

ParsimonySchedule ParsimonySchedule::constant(double value, int max_complexity) {
    ParsimonySchedule s;
    s.coeff.assign(static_cast<std::size_t>(max_complexity) + 1, value);
    return s;
}

namespace {

double individual_fitness(const Individual& ind, const ParsimonySchedule& parsimony) {
    return ind.mse + static_cast<double>(ind.expr.size()) * parsimony.at(ind.expr.size());
}

bool fitter(const Individual& a, const Individual& b, const ParsimonySchedule& parsimony) {
    const double fa = individual_fitness(a, parsimony);
    const double fb = individual_fitness(b, parsimony);
    if (fa != fb) return fa < fb;
    if (a.expr.size() != b.expr.size()) return a.expr.size() < b.expr.size();
    return a.birth < b.birth;
}

std::size_t population_best(const Population& pop, const ParsimonySchedule& parsimony) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < pop.members.size(); ++i)
        if (fitter(pop.members[i], pop.members[best], parsimony)) best = i;
    return best;
}

}  // namespace

void tournament_step(Population& pop, const Dataset& data, const FitConfig& cfg,
                     const ParsimonySchedule& parsimony) {
    const int n = static_cast<int>(pop.members.size());
    const int ts = std::min(cfg.tournament_size, n);

    std::vector<int> idx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    for (int j = 0; j < ts; ++j)
        std::swap(idx[static_cast<std::size_t>(j)],
                  idx[static_cast<std::size_t>(j + pop.rng.uniform_int(n - j))]);
    std::vector<int> subset(idx.begin(), idx.begin() + ts);

    std::stable_sort(subset.begin(), subset.end(), [&](int a, int b) {
        return fitter(pop.members[static_cast<std::size_t>(a)],
                      pop.members[static_cast<std::size_t>(b)], parsimony);
    });

    int winner = subset.back();
    for (int rank = 0; rank < ts; ++rank) {
        if (pop.rng.uniform01() < cfg.selection_p) {
            winner = subset[static_cast<std::size_t>(rank)];
            break;
        }
    }

    const std::size_t elite = population_best(pop, parsimony);
    int victim = -1;
    for (int s : subset) {
        if (static_cast<std::size_t>(s) == elite) continue;
        if (victim < 0 || pop.members[static_cast<std::size_t>(s)].birth <
                              pop.members[static_cast<std::size_t>(victim)].birth)
            victim = s;
    }
    if (victim < 0) return;  // subset was nothing but the elite

    const Expr& partner =
        pop.members[static_cast<std::size_t>(pop.rng.uniform_int(n))].expr;
    Individual child;
    child.expr = mutate(pop.members[static_cast<std::size_t>(winner)].expr, cfg, pop.rng, &partner);
    child.mse = weighted_mse(child.expr, data);
    child.birth = ++pop.birth_counter;
    pop.members[static_cast<std::size_t>(victim)] = std::move(child);
}

Expr optimize_constants(const Expr& expr, const Dataset& data, int max_iterations) {
    const int k = expr.constant_count();
    if (k == 0 || data.rows() == 0) return expr;
    const int n = data.rows();

    std::vector<double> c = expr.constants();
    auto mse_at = [&](const std::vector<double>& cs) {
        for (double v : cs)
            if (!std::isfinite(v)) return kInf;
        Expr trial;
        try {
            trial = expr.with_constants(cs);
        } catch (const std::invalid_argument&) {
            return kInf;
        }
        return weighted_mse(trial, data);
    };

    double best = mse_at(c);
    if (!std::isfinite(best)) return expr;

    std::vector<double> residual(static_cast<std::size_t>(n));
    std::vector<double> jac(static_cast<std::size_t>(n) * static_cast<std::size_t>(k));
    double lambda = 1e-3;

    for (int iter = 0; iter < max_iterations; ++iter) {
        const Expr current = expr.with_constants(c);
        bool finite = true;
        for (int i = 0; i < n; ++i) {
            const double pred =
                current.evaluate({data.row(i), static_cast<std::size_t>(data.n_features)});
            if (!std::isfinite(pred)) {
                finite = false;
                break;
            }
            residual[static_cast<std::size_t>(i)] = pred - data.targets[static_cast<std::size_t>(i)];
        }
        if (!finite) break;

        for (int j = 0; j < k; ++j) {
            std::vector<double> cj = c;
            const double eps = 1e-6 * std::max(1e-2, std::abs(cj[static_cast<std::size_t>(j)]));
            cj[static_cast<std::size_t>(j)] += eps;
            const Expr shifted = expr.with_constants(cj);
            for (int i = 0; i < n; ++i) {
                const double pred =
                    shifted.evaluate({data.row(i), static_cast<std::size_t>(data.n_features)});
                jac[static_cast<std::size_t>(i) * static_cast<std::size_t>(k) +
                    static_cast<std::size_t>(j)] =
                    std::isfinite(pred)
                        ? (pred - data.targets[static_cast<std::size_t>(i)] -
                           residual[static_cast<std::size_t>(i)]) /
                              eps
                        : 0.0;
            }
        }

        // (J^T J + lambda diag) delta = -J^T r
        std::vector<double> a(static_cast<std::size_t>(k) * static_cast<std::size_t>(k), 0.0);
        std::vector<double> b(static_cast<std::size_t>(k), 0.0);
        for (int i = 0; i < n; ++i)
            for (int p = 0; p < k; ++p) {
                const double jip = jac[static_cast<std::size_t>(i) * static_cast<std::size_t>(k) +
                                       static_cast<std::size_t>(p)];
                b[static_cast<std::size_t>(p)] -= jip * residual[static_cast<std::size_t>(i)];
                for (int q = p; q < k; ++q)
                    a[static_cast<std::size_t>(p) * static_cast<std::size_t>(k) +
                      static_cast<std::size_t>(q)] +=
                        jip * jac[static_cast<std::size_t>(i) * static_cast<std::size_t>(k) +
                                  static_cast<std::size_t>(q)];
            }
        for (int p = 0; p < k; ++p)
            for (int q = 0; q < p; ++q)
                a[static_cast<std::size_t>(p) * static_cast<std::size_t>(k) +
                  static_cast<std::size_t>(q)] =
                    a[static_cast<std::size_t>(q) * static_cast<std::size_t>(k) +
                      static_cast<std::size_t>(p)];

        bool improved = false;
        for (int damp = 0; damp < 6; ++damp) {
            std::vector<double> a_damped = a;
            std::vector<double> rhs = b;
            for (int p = 0; p < k; ++p)
                a_damped[static_cast<std::size_t>(p) * static_cast<std::size_t>(k) +
                         static_cast<std::size_t>(p)] +=
                    lambda * std::max(1e-12, a[static_cast<std::size_t>(p) * static_cast<std::size_t>(k) +
                                               static_cast<std::size_t>(p)]);
            if (!solve_dense(a_damped, rhs, static_cast<std::size_t>(k))) {
                lambda *= 10.0;
                continue;
            }
            std::vector<double> trial = c;
            for (int p = 0; p < k; ++p) trial[static_cast<std::size_t>(p)] += rhs[static_cast<std::size_t>(p)];
            const double m = mse_at(trial);
            if (m < best) {
                best = m;
                c = std::move(trial);
                lambda = std::max(lambda / 3.0, 1e-12);
                improved = true;
                break;
            }
            lambda *= 4.0;
        }
        if (!improved) break;
    }

    const double original = weighted_mse(expr, data);
    if (best < original) return expr.with_constants(c);
    return expr;  // revert on failure to improve
}

namespace {

ParetoFront evolve_impl(const Dataset& ds, const FitConfig& cfg,
                        const std::vector<Expr>& seed_population) {
    const double variance = ds.target_variance();
    const double base_parsimony = cfg.parsimony_base_frac * std::max(variance, 1e-30);
    const double baseline_loss = ds.weight * std::max(variance, 0.0);

    const int buckets = cfg.max_complexity + 1;
    std::vector<double> freq(static_cast<std::size_t>(buckets), 1.0 / buckets);
    ParsimonySchedule sched;
    sched.coeff.assign(static_cast<std::size_t>(buckets), base_parsimony);

    const Rng master(cfg.seed);
    std::vector<Population> pops(static_cast<std::size_t>(cfg.population_count));
    const int seed_slots =
        seed_population.empty()
            ? 0
            : std::max(static_cast<int>(seed_population.size()),
                       static_cast<int>(cfg.seed_fraction * cfg.population_size));
    for (int p = 0; p < cfg.population_count; ++p) {
        Population& pop = pops[static_cast<std::size_t>(p)];
        pop.rng = master.child(1000 + static_cast<std::uint64_t>(p));
        pop.members.reserve(static_cast<std::size_t>(cfg.population_size));
        for (int i = 0; i < cfg.population_size; ++i) {
            Individual ind;
            if (!seed_population.empty() && i < seed_slots) {
                const Expr& base =
                    seed_population[static_cast<std::size_t>(i) % seed_population.size()];
                ind.expr = i < static_cast<int>(seed_population.size())
                               ? base
                               : mutate(base, cfg, pop.rng);
            } else {
                ind.expr = random_tree(cfg, pop.rng);
            }
            ind.mse = weighted_mse(ind.expr, ds);
            ind.birth = ++pop.birth_counter;
            pop.members.push_back(std::move(ind));
        }
    }

    std::vector<std::optional<Individual>> hof(static_cast<std::size_t>(buckets));
    std::vector<int> bucket_updates(static_cast<std::size_t>(buckets), 0);
    auto hof_consider = [&](const Individual& ind) {
        const int c = ind.expr.size();
        if (c < 1 || c > cfg.max_complexity || !std::isfinite(ind.mse)) return;
        auto& slot = hof[static_cast<std::size_t>(c)];
        if (!slot || ind.mse < slot->mse) {
            slot = ind;
            ++bucket_updates[static_cast<std::size_t>(c)];
        }
    };
    for (const Population& pop : pops)
        for (const Individual& ind : pop.members) hof_consider(ind);

    auto best_hof_loss = [&] {
        double best = kInf;
        for (const auto& slot : hof)
            if (slot) best = std::min(best, slot->mse);
        return best;
    };

    std::vector<double> history;
    history.push_back(best_hof_loss());
    const auto t_start = std::chrono::steady_clock::now();

    for (int batch = 1; batch <= cfg.max_iterations; ++batch) {
        std::fill(bucket_updates.begin(), bucket_updates.end(), 0);

        parallel_for(cfg.population_count, cfg.workers, [&](int p) {
            Population& pop = pops[static_cast<std::size_t>(p)];
            for (int t = 0; t < cfg.population_size; ++t) tournament_step(pop, ds, cfg, sched);
        });
        for (const Population& pop : pops)
            for (const Individual& ind : pop.members) hof_consider(ind);

        if (batch % cfg.simplify_every == 0) {
            for (Population& pop : pops) {
                Individual& best = pop.members[population_best(pop, sched)];
                const Expr simplified = simplify(best.expr);
                if (!(simplified == best.expr) && simplified.size() >= 1 &&
                    check_template(simplified, cfg.template_spec)) {
                    const double m = weighted_mse(simplified, ds);
                    if (m <= best.mse + 1e-15 * std::abs(best.mse)) {
                        best.expr = simplified;
                        best.mse = m;
                        hof_consider(best);
                    }
                }
            }
        }

        if (batch % cfg.optimize_every == 0) {
            for (Population& pop : pops) {
                Individual& best = pop.members[population_best(pop, sched)];
                if (best.expr.constant_count() > 0 && std::isfinite(best.mse)) {
                    const Expr tuned = optimize_constants(best.expr, ds, cfg.optimize_iterations);
                    const double m = weighted_mse(tuned, ds);
                    if (m < best.mse) {
                        best.expr = tuned;
                        best.mse = m;
                        hof_consider(best);
                    }
                }
            }
        }

        if (batch % cfg.migrate_every == 0) {
            std::vector<int> filled;
            for (int c = 0; c < buckets; ++c)
                if (hof[static_cast<std::size_t>(c)]) filled.push_back(c);
            if (!filled.empty()) {
                for (Population& pop : pops) {
                    const int c = filled[static_cast<std::size_t>(
                        pop.rng.uniform_int(static_cast<int>(filled.size())))];
                    const std::size_t elite = population_best(pop, sched);
                    std::size_t at = static_cast<std::size_t>(
                        pop.rng.uniform_int(static_cast<int>(pop.members.size())));
                    if (at == elite) at = (at + 1) % pop.members.size();
                    Individual mig = *hof[static_cast<std::size_t>(c)];
                    mig.birth = ++pop.birth_counter;
                    pop.members[at] = std::move(mig);
                }
            }
        }

        // Adaptive parsimony: complexity bands that keep winning hall-of-fame
        // slots get penalised harder.
        int total_updates = 0;
        for (int u : bucket_updates) total_updates += u;
        if (total_updates > 0) {
            for (int c = 0; c < buckets; ++c) {
                const double obs = static_cast<double>(bucket_updates[static_cast<std::size_t>(c)]) /
                                   static_cast<double>(total_updates);
                freq[static_cast<std::size_t>(c)] =
                    (1.0 - cfg.parsimony_adapt_rate) * freq[static_cast<std::size_t>(c)] +
                    cfg.parsimony_adapt_rate * obs;
            }
            for (int c = 0; c < buckets; ++c)
                sched.coeff[static_cast<std::size_t>(c)] =
                    base_parsimony * freq[static_cast<std::size_t>(c)] * buckets;
        }

        const double best = best_hof_loss();
        history.push_back(best);
        if (best == 0.0) break;
        const int w = cfg.convergence_window;
        if (static_cast<int>(history.size()) > w) {
            const double then = history[history.size() - 1 - static_cast<std::size_t>(w)];
            if (then - best <= cfg.convergence_rel_tol * std::max(then, 1e-300)) break;
        }
        if (std::isfinite(cfg.wall_clock_seconds)) {
            const double elapsed =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
            if (elapsed >= cfg.wall_clock_seconds) break;
        }
    }

    // Final constant polish on the hall-of-fame.
    for (int c = 1; c < buckets; ++c) {
        auto& slot = hof[static_cast<std::size_t>(c)];
        if (!slot || slot->expr.constant_count() == 0 || !std::isfinite(slot->mse)) continue;
        const Expr tuned = optimize_constants(slot->expr, ds, 2 * cfg.optimize_iterations);
        const double m = weighted_mse(tuned, ds);
        if (m < slot->mse) {
            slot->expr = tuned;
            slot->mse = m;
        }
    }

    ParetoFront front;
    front.rate_index = ds.rate_index;
    front.baseline_loss = baseline_loss;
    double best_so_far = kInf;
    for (int c = 1; c < buckets; ++c) {
        const auto& slot = hof[static_cast<std::size_t>(c)];
        if (!slot || !std::isfinite(slot->mse)) continue;
        if (slot->mse < best_so_far) {
            front.entries.push_back({slot->expr, c, slot->mse, 0.0});
            best_so_far = slot->mse;
        }
    }
    if (front.entries.empty()) throw std::runtime_error("evolve produced an empty Pareto front");
    return score_front(std::move(front));
}

}  // namespace

ParetoFront evolve(const Dataset& data, const FitConfig& cfg,
                   const std::vector<Expr>& seed_population) {
    cfg.validate();
    data.validate();

    Dataset ds = data;
    if (ds.rate_index >= 0 && ds.rate_index < static_cast<int>(cfg.lambda_diag.size()))
        ds.weight = cfg.lambda_diag[static_cast<std::size_t>(ds.rate_index)];

    for (const Expr& s : seed_population) {
        if (s.empty() || s.size() > cfg.max_complexity)
            throw std::invalid_argument("evolve: seed expression violates the complexity cap");
        if (!check_template(s, cfg.template_spec))
            throw std::invalid_argument("evolve: seed expression violates the enabled template");
    }

    FitConfig engine_cfg = cfg;
    engine_cfg.n_features = ds.n_features;
    return evolve_impl(ds, engine_cfg, seed_population);
}

ParetoFront score_front(ParetoFront front) {
    constexpr double kClamp = 1e-300;
    for (std::size_t i = 0; i < front.entries.size(); ++i) {
        ParetoEntry& e = front.entries[i];
        if (i == 0) {
            if (std::isfinite(front.baseline_loss)) {
                const double dc = std::max(1, e.complexity - 1);
                e.score = -(std::log(std::max(e.loss, kClamp)) -
                            std::log(std::max(front.baseline_loss, kClamp))) /
                          dc;
            } else {
                e.score = 0.0;
            }
        } else {
            const ParetoEntry& prev = front.entries[i - 1];
            const double dc = e.complexity - prev.complexity;
            e.score = -(std::log(std::max(e.loss, kClamp)) - std::log(std::max(prev.loss, kClamp))) /
                      dc;
        }
    }
    return front;
}

std::vector<ParetoEntry> select_top(const ParetoFront& front, int k) {
    if (front.empty()) throw std::invalid_argument("select_top: empty front");
    std::vector<ParetoEntry> sorted = front.entries;
    std::stable_sort(sorted.begin(), sorted.end(), [](const ParetoEntry& a, const ParetoEntry& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.complexity < b.complexity;
    });
    if (static_cast<int>(sorted.size()) > k) sorted.resize(static_cast<std::size_t>(k));
    return sorted;
}

}  // namespace kinforge
