#include "kinforge/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "kinforge/linalg.hpp"

namespace kinforge {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

double safe_eval(const ObjectiveFn& f, const std::vector<double>& x) {
    const double v = f(x);
    return std::isfinite(v) ? v : kInf;
}
}  // namespace

void Bounds::validate() const {
    if (lb.size() != ub.size() || lb.empty())
        throw std::invalid_argument("Bounds: lb/ub must be non-empty and equal length");
    for (std::size_t i = 0; i < lb.size(); ++i)
        if (!(lb[i] <= ub[i]) || !std::isfinite(lb[i]) || !std::isfinite(ub[i]))
            throw std::invalid_argument("Bounds: require finite lb <= ub");
}

std::vector<double> Bounds::clip(std::vector<double> x) const {
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], lb[i], ub[i]);
    return x;
}

std::vector<double> Bounds::midpoint() const {
    std::vector<double> m(lb.size());
    for (std::size_t i = 0; i < lb.size(); ++i) m[i] = 0.5 * (lb[i] + ub[i]);
    return m;
}

std::vector<std::vector<double>> latin_hypercube(const Bounds& bounds, int n, Rng& rng) {
    bounds.validate();
    const int d = bounds.dim();
    std::vector<std::vector<double>> pts(static_cast<std::size_t>(n),
                                         std::vector<double>(static_cast<std::size_t>(d)));
    std::vector<int> perm(static_cast<std::size_t>(n));
    for (int j = 0; j < d; ++j) {
        std::iota(perm.begin(), perm.end(), 0);
        for (int i = n - 1; i > 0; --i) std::swap(perm[static_cast<std::size_t>(i)],
                                                  perm[static_cast<std::size_t>(rng.uniform_int(i + 1))]);
        for (int i = 0; i < n; ++i) {
            const double cell = (static_cast<double>(perm[static_cast<std::size_t>(i)]) + rng.uniform01()) /
                                static_cast<double>(n);
            pts[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                bounds.lb[static_cast<std::size_t>(j)] +
                cell * (bounds.ub[static_cast<std::size_t>(j)] - bounds.lb[static_cast<std::size_t>(j)]);
        }
    }
    return pts;
}

OptResult nelder_mead(const ObjectiveFn& f, const std::vector<double>& x0, const Bounds& bounds,
                      int max_evals, double ftol) {
    bounds.validate();
    const int d = bounds.dim();
    int evals = 0;
    auto eval = [&](const std::vector<double>& x) {
        ++evals;
        return safe_eval(f, x);
    };

    struct Vertex {
        std::vector<double> x;
        double fx;
    };
    std::vector<Vertex> simplex;
    simplex.reserve(static_cast<std::size_t>(d) + 1);
    simplex.push_back({bounds.clip(x0), 0.0});
    simplex[0].fx = eval(simplex[0].x);
    for (int j = 0; j < d; ++j) {
        std::vector<double> x = simplex[0].x;
        const double span = bounds.ub[static_cast<std::size_t>(j)] - bounds.lb[static_cast<std::size_t>(j)];
        double step = 0.05 * span;
        if (step == 0.0) step = 1e-8;
        x[static_cast<std::size_t>(j)] += x[static_cast<std::size_t>(j)] + step >
                                                  bounds.ub[static_cast<std::size_t>(j)]
                                              ? -step
                                              : step;
        simplex.push_back({bounds.clip(std::move(x)), 0.0});
        simplex.back().fx = eval(simplex.back().x);
    }

    auto order = [&] {
        std::stable_sort(simplex.begin(), simplex.end(),
                         [](const Vertex& a, const Vertex& b) { return a.fx < b.fx; });
    };
    order();

    while (evals < max_evals) {
        const double spread = std::abs(simplex.back().fx - simplex.front().fx);
        if (spread <= ftol * (std::abs(simplex.front().fx) + 1e-12)) break;

        std::vector<double> centroid(static_cast<std::size_t>(d), 0.0);
        for (int v = 0; v < d; ++v)
            for (int j = 0; j < d; ++j)
                centroid[static_cast<std::size_t>(j)] +=
                    simplex[static_cast<std::size_t>(v)].x[static_cast<std::size_t>(j)] /
                    static_cast<double>(d);

        auto along = [&](double coef) {
            std::vector<double> x(static_cast<std::size_t>(d));
            for (int j = 0; j < d; ++j)
                x[static_cast<std::size_t>(j)] =
                    centroid[static_cast<std::size_t>(j)] +
                    coef * (simplex.back().x[static_cast<std::size_t>(j)] -
                            centroid[static_cast<std::size_t>(j)]);
            return bounds.clip(std::move(x));
        };

        std::vector<double> xr = along(-1.0);
        const double fr = eval(xr);
        if (fr < simplex.front().fx) {
            std::vector<double> xe = along(-2.0);
            const double fe = eval(xe);
            if (fe < fr)
                simplex.back() = {std::move(xe), fe};
            else
                simplex.back() = {std::move(xr), fr};
        } else if (fr < simplex[simplex.size() - 2].fx) {
            simplex.back() = {std::move(xr), fr};
        } else {
            const bool outside = fr < simplex.back().fx;
            std::vector<double> xc = along(outside ? -0.5 : 0.5);
            const double fc = eval(xc);
            if (fc < std::min(fr, simplex.back().fx)) {
                simplex.back() = {std::move(xc), fc};
            } else {
                // shrink toward best
                for (std::size_t v = 1; v < simplex.size(); ++v) {
                    for (int j = 0; j < d; ++j)
                        simplex[v].x[static_cast<std::size_t>(j)] =
                            0.5 * (simplex[v].x[static_cast<std::size_t>(j)] +
                                   simplex[0].x[static_cast<std::size_t>(j)]);
                    simplex[v].fx = eval(simplex[v].x);
                    if (evals >= max_evals) break;
                }
            }
        }
        order();
    }

    return {simplex.front().x, simplex.front().fx, evals};
}

namespace {

/// Gaussian RBF interpolant over normalised inputs with ridge regularisation.
class RbfSurrogate {
public:
    bool fit(const std::vector<std::vector<double>>& xs, const std::vector<double>& ys,
             const Bounds& bounds) {
        const std::size_t n = xs.size();
        const std::size_t d = static_cast<std::size_t>(bounds.dim());
        if (n < d + 2) return false;
        xs_.assign(n, std::vector<double>(d));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j)
                xs_[i][j] = normalise(xs[i][j], bounds, j);

        // Length scale: median pairwise distance over a bounded subsample.
        std::vector<double> dists;
        const std::size_t stride = n > 64 ? n / 64 : 1;
        for (std::size_t i = 0; i < n; i += stride)
            for (std::size_t j = i + 1; j < n; j += stride) dists.push_back(dist(xs_[i], xs_[j]));
        if (dists.empty()) return false;
        std::nth_element(dists.begin(), dists.begin() + static_cast<long>(dists.size() / 2),
                         dists.end());
        scale_ = std::max(1e-6, dists[dists.size() / 2]);

        y_mean_ = 0.0;
        for (double v : ys) y_mean_ += v / static_cast<double>(n);
        double var = 0.0;
        for (double v : ys) var += (v - y_mean_) * (v - y_mean_) / static_cast<double>(n);
        y_std_ = std::sqrt(std::max(var, 1e-300));

        std::vector<double> a(n * n);
        std::vector<double> rhs(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) a[i * n + j] = kernel(dist(xs_[i], xs_[j]));
            a[i * n + i] += 1e-8;
            rhs[i] = (ys[i] - y_mean_) / y_std_;
        }
        if (!solve_dense(a, rhs, n)) return false;
        weights_ = std::move(rhs);
        return true;
    }

    double predict(const std::vector<double>& x, const Bounds& bounds) const {
        std::vector<double> z(x.size());
        for (std::size_t j = 0; j < x.size(); ++j) z[j] = normalise(x[j], bounds, j);
        double s = 0.0;
        for (std::size_t i = 0; i < xs_.size(); ++i) s += weights_[i] * kernel(dist(z, xs_[i]));
        return y_mean_ + y_std_ * s;
    }

    double min_distance(const std::vector<double>& x, const Bounds& bounds) const {
        std::vector<double> z(x.size());
        for (std::size_t j = 0; j < x.size(); ++j) z[j] = normalise(x[j], bounds, j);
        double best = kInf;
        for (const auto& p : xs_) best = std::min(best, dist(z, p));
        return best;
    }

    double scale() const { return scale_; }

private:
    static double normalise(double v, const Bounds& bounds, std::size_t j) {
        const double span = bounds.ub[j] - bounds.lb[j];
        return span > 0.0 ? (v - bounds.lb[j]) / span : 0.0;
    }

    static double dist(const std::vector<double>& a, const std::vector<double>& b) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
        return std::sqrt(s);
    }

    double kernel(double r) const {
        const double q = r / scale_;
        return std::exp(-q * q);
    }

    std::vector<std::vector<double>> xs_;
    std::vector<double> weights_;
    double scale_ = 1.0;
    double y_mean_ = 0.0;
    double y_std_ = 1.0;
};

}  // namespace

OptResult minimize_global_local(const ObjectiveFn& f, const Bounds& bounds,
                                const OptimBudget& budget, Rng rng) {
    bounds.validate();
    if (budget.global_samples <= 0 || budget.local_evals <= 0)
        throw std::invalid_argument("OptimBudget: budgets must be positive");

    const int n_seed = std::max(4, budget.global_samples * 7 / 10);
    const int n_adapt = std::max(0, budget.global_samples - n_seed);

    std::vector<std::vector<double>> xs;
    std::vector<double> ys;
    int evals = 0;
    int finite = 0;
    std::size_t best = 0;

    auto record = [&](std::vector<double> x) {
        const double v = safe_eval(f, x);
        ++evals;
        if (std::isfinite(v)) {
            ++finite;
            if (ys.empty() || v < ys[best]) best = ys.size();
        }
        xs.push_back(std::move(x));
        ys.push_back(v);
    };

    for (auto& p : latin_hypercube(bounds, n_seed, rng)) record(std::move(p));

    RbfSurrogate surrogate;
    for (int a = 0; a < n_adapt; ++a) {
        std::vector<std::vector<double>> fx;
        std::vector<double> fy;
        for (std::size_t i = 0; i < xs.size(); ++i)
            if (std::isfinite(ys[i])) {
                fx.push_back(xs[i]);
                fy.push_back(ys[i]);
            }
        const bool fitted = surrogate.fit(fx, fy, bounds);

        std::vector<double> candidate;
        double candidate_score = kInf;
        const int n_cand = 96;
        for (int c = 0; c < n_cand; ++c) {
            std::vector<double> x(static_cast<std::size_t>(bounds.dim()));
            if (finite > 0 && c % 2 == 0) {
                // local perturbation of the incumbent
                for (int j = 0; j < bounds.dim(); ++j) {
                    const double span = bounds.ub[static_cast<std::size_t>(j)] -
                                        bounds.lb[static_cast<std::size_t>(j)];
                    x[static_cast<std::size_t>(j)] =
                        xs[best][static_cast<std::size_t>(j)] + 0.1 * span * rng.normal();
                }
                x = bounds.clip(std::move(x));
            } else {
                for (int j = 0; j < bounds.dim(); ++j)
                    x[static_cast<std::size_t>(j)] = rng.uniform(bounds.lb[static_cast<std::size_t>(j)],
                                                                 bounds.ub[static_cast<std::size_t>(j)]);
            }
            double score;
            if (fitted) {
                const double explore = surrogate.min_distance(x, bounds) / surrogate.scale();
                score = surrogate.predict(x, bounds) - 0.3 * explore;
            } else {
                score = rng.uniform01();
            }
            if (score < candidate_score) {
                candidate_score = score;
                candidate = std::move(x);
            }
        }
        record(std::move(candidate));
    }

    if (finite == 0) throw std::runtime_error("design search failed: all objective evaluations non-finite");

    OptResult local = nelder_mead(f, xs[best], bounds, budget.local_evals);
    local.evaluations += evals;
    if (!(local.value <= ys[best])) {
        local.x = xs[best];
        local.value = ys[best];
    }
    return local;
}

}  // namespace kinforge
