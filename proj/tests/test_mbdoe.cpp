#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "kinforge/mbdoe.hpp"
#include "support.hpp"

using namespace kinforge;
namespace ts = kinforge::testsupport;

TEST_CASE("ensemble member indexing") {
    const PlantConfig cfg;
    ModelEnsemble ens = ts::ground_truth_ensemble(cfg);
    CHECK(ens.member_count() == 1);

    // three candidates per rate: 27 members in mixed-radix order
    for (auto& list : ens.candidates) {
        list.push_back(list[0]);
        list.push_back(list[0]);
    }
    CHECK(ens.member_count() == 27);
    CHECK(ens.member_indices(0) == std::array<int, 3>{0, 0, 0});
    CHECK(ens.member_indices(26) == std::array<int, 3>{2, 2, 2});
    CHECK(ens.member_indices(5) == std::array<int, 3>{0, 1, 2});

    ens.candidates[1].clear();
    CHECK_THROWS_AS(ens.validate(), std::invalid_argument);
}

TEST_CASE("predict_kpi closure identity with the ground-truth expressions") {
    const PlantConfig cfg;
    const ModelEnsemble ens = ts::ground_truth_ensemble(cfg);
    const RateFn member = ens.member_rates(0);

    Rng rng(71);
    for (int i = 0; i < 3; ++i) {
        PfdParams p = cfg.nominal;
        std::vector<double> theta(6);
        for (int j = 0; j < 6; ++j)
            theta[static_cast<std::size_t>(j)] =
                rng.uniform(cfg.bounds.box.lb[static_cast<std::size_t>(j)],
                            cfg.bounds.box.ub[static_cast<std::size_t>(j)]);
        p.set_theta(theta);
        const KpiPrediction pred = predict_kpi(p, cfg, member);
        REQUIRE(pred.ok);
        const double actual = simulate(p, cfg).final_kpi;
        CHECK(std::abs(pred.final_kpi - actual) <= 1e-6 * std::abs(actual));
    }
}

TEST_CASE("predict_kpi with all-zero rates reproduces the inert blend") {
    const PlantConfig cfg;
    const ModelEnsemble zeros = ts::zero_rate_ensemble();
    const KpiPrediction pred = predict_kpi(cfg.nominal, cfg, zeros.member_rates(0));
    REQUIRE(pred.ok);
    CHECK(std::abs(pred.final_kpi) <= 1e-9);  // canonical KPI weighs only the Ls phase
}

TEST_CASE("predict_kpi flags non-finite members infeasible") {
    const PlantConfig cfg;
    ModelEnsemble broken = ts::zero_rate_ensemble();
    // 1/(gdot - gdot) is non-finite everywhere
    broken.candidates[1] = {ts::candidate(
        ts::dv(ts::c(1.0), ts::sub(ts::v(6), ts::v(6))), false)};
    const KpiPrediction pred = predict_kpi(cfg.nominal, cfg, broken.member_rates(0));
    CHECK_FALSE(pred.ok);
}

TEST_CASE("info_objective") {
    const PlantConfig cfg;

    SUBCASE("identical members have zero variance") {
        ModelEnsemble ens = ts::ground_truth_ensemble(cfg);
        ens.candidates[0].push_back(ens.candidates[0][0]);  // duplicate: 2 identical members
        const InfoResult res = info_objective(cfg.nominal, cfg, ens);
        CHECK(res.feasible == 2);
        CHECK(res.j_m == 0.0);
    }

    SUBCASE("two-member spread matches the population-variance arithmetic") {
        // members: all-zero rates (psi = 0) and ground truth (psi = v)
        ModelEnsemble ens = ts::ground_truth_ensemble(cfg);
        ens.candidates[1].insert(ens.candidates[1].begin(), ts::candidate(ts::c(0.0), false));
        REQUIRE(ens.member_count() == 2);
        const InfoResult res = info_objective(cfg.nominal, cfg, ens);
        REQUIRE(res.feasible == 2);
        const double lo = std::min(res.psi_hats[0], res.psi_hats[1]);
        const double hi = std::max(res.psi_hats[0], res.psi_hats[1]);
        const double var = (hi - lo) * (hi - lo) / 4.0;  // var({a,b}) = (b-a)^2/4
        CHECK(res.j_m == doctest::Approx(-var).epsilon(1e-12));
        CHECK(res.j_m < -0.5);  // the two closures genuinely disagree
    }

    SUBCASE("infeasible members are excluded and counted") {
        ModelEnsemble ens = ts::ground_truth_ensemble(cfg);
        ens.candidates[2].push_back(
            ts::candidate(ts::dv(ts::c(1.0), ts::sub(ts::v(6), ts::v(6))), false));
        ens.candidates[0].push_back(ens.candidates[0][0]);
        REQUIRE(ens.member_count() == 4);
        const InfoResult res = info_objective(cfg.nominal, cfg, ens);
        CHECK(res.infeasible == 2);
        CHECK(res.feasible == 2);
    }
}

TEST_CASE("kpi miss epsilon and the process objective") {
    ProcessGoal goal;  // psi_t = 7, kappa = 0.03

    SUBCASE("the published boundary case reduces to batch time alone") {
        const double eps = kpi_miss_epsilon(6.79, goal);
        CHECK(std::abs(eps) <= 1e-15);  // (0.21)^2 - (0.21)^2 up to binary rounding
        CHECK(std::max(eps, 0.0) * goal.epsilon_weight == 0.0);
    }
    SUBCASE("in-spec prediction leaves only tau") {
        CHECK(kpi_miss_epsilon(goal.psi_target, goal) < 0.0);
    }
    SUBCASE("hand arithmetic of a total miss") {
        CHECK(kpi_miss_epsilon(0.0, goal) == doctest::Approx(48.9559).epsilon(1e-12));
    }
    SUBCASE("simulated process objective uses the point model's final KPI") {
        const PlantConfig cfg;
        const ModelEnsemble ens = ts::ground_truth_ensemble(cfg);
        const ProcessResult res = process_objective(cfg.nominal, cfg, ens.point_rates(), goal);
        CHECK(res.tau_min == doctest::Approx(100.0));
        CHECK(res.feasible);
        const double expect =
            res.tau_min + goal.epsilon_weight * std::max(kpi_miss_epsilon(res.psi_hat, goal), 0.0);
        CHECK(res.j_p == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("combined objective arithmetic") {
    const Normalizers norms{1.0, 1.0};
    CHECK(combined_objective(-0.3, 0.8, norms, 1.0) == doctest::Approx(-0.3));
    CHECK(combined_objective(-0.3, 0.8, norms, 0.0) == doctest::Approx(0.8));
    CHECK(combined_objective(-0.4, 0.6, norms, 0.5) == doctest::Approx(0.1).epsilon(1e-12));
    const Normalizers scaled{2.0, 4.0};
    CHECK(combined_objective(-0.4, 0.6, scaled, 0.5) ==
          doctest::Approx(0.5 * -0.2 + 0.5 * 0.15).epsilon(1e-12));
}

TEST_CASE("normalizers") {
    const PlantConfig cfg;
    OptimBudget budget;
    budget.global_samples = 24;
    budget.local_evals = 20;
    budget.seed = 5;

    // a single-member ensemble has identically zero variance: floor applies
    const ModelEnsemble ens = ts::ground_truth_ensemble(cfg);
    const Normalizers norms = compute_normalizers(cfg, ens, ProcessGoal{}, budget);
    CHECK(norms.j_m_max == doctest::Approx(1e-12));
    // tau alone reaches the total upper-bound duration when always in-spec
    double tau_ub = cfg.nominal.tau1_min;
    for (int i = 1; i < 4; ++i) tau_ub += cfg.bounds.box.ub[static_cast<std::size_t>(i)];
    CHECK(norms.j_p_max >= 0.8 * tau_ub);
}

TEST_CASE("design_experiment") {
    Bounds box{{0, 0, 0}, {1, 2, 3}};
    OptimBudget budget;
    budget.global_samples = 120;
    budget.local_evals = 150;

    SUBCASE("convex sanity") {
        const std::vector<double> target{0.4, 1.1, 2.2};
        const ObjectiveFn f = [&](const std::vector<double>& x) {
            double s = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - target[i]) * (x[i] - target[i]);
            return s;
        };
        const DesignResult res = design_experiment(f, box, budget, Rng(3));
        for (std::size_t i = 0; i < 3; ++i) {
            const double width = box.ub[i] - box.lb[i];
            CHECK(std::abs(res.theta[i] - target[i]) <= 1e-3 * width);
        }
    }
    SUBCASE("constant objective returns a feasible point at that value") {
        const ObjectiveFn f = [](const std::vector<double>&) { return 4.25; };
        const DesignResult res = design_experiment(f, box, budget, Rng(4));
        CHECK(res.value == 4.25);
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(res.theta[i] >= box.lb[i]);
            CHECK(res.theta[i] <= box.ub[i]);
        }
    }
    SUBCASE("never leaves the box even when pushed outward") {
        const ObjectiveFn f = [](const std::vector<double>& x) {
            double s = 0.0;
            for (double v : x) s -= v;
            return s;
        };
        const DesignResult res = design_experiment(f, box, budget, Rng(5));
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(res.theta[i] >= box.lb[i] - 1e-12);
            CHECK(res.theta[i] <= box.ub[i] + 1e-12);
        }
    }
    SUBCASE("deterministic per seed") {
        const ObjectiveFn f = [](const std::vector<double>& x) {
            return std::sin(5 * x[0]) + x[1] * x[1] + std::cos(3 * x[2]);
        };
        const DesignResult a = design_experiment(f, box, budget, Rng(9));
        const DesignResult b = design_experiment(f, box, budget, Rng(9));
        CHECK(a.theta == b.theta);
        CHECK(a.value == b.value);
    }
    SUBCASE("all-non-finite objective is a design failure") {
        const ObjectiveFn f = [](const std::vector<double>&) {
            return std::numeric_limits<double>::quiet_NaN();
        };
        CHECK_THROWS_AS((void)design_experiment(f, box, budget, Rng(1)), std::runtime_error);
    }
}

TEST_CASE("update_alpha reproduces the published weighting rows") {
    ProcessGoal goal;  // psi_t = 7, kappa = 0.03
    AlphaState st;

    // engineer (psi_hat, psi_a) pairs hitting the published (dJ_M, dJ_P) rows
    auto run = [&](double dj_m, double dj_p) {
        const double psi_a = goal.psi_target - std::sqrt(dj_p + 0.0441);
        const double psi_hat = psi_a + std::sqrt(dj_m);
        return update_alpha(psi_hat, psi_a, goal, st);
    };

    CHECK(std::abs(run(0.26, 5.4).alpha - 0.045) / 0.045 <= 0.03);
    CHECK(std::abs(run(1.8, 0.078).alpha - 0.95) / 0.95 <= 0.03);
    CHECK(std::abs(run(0.10, 10.0).alpha - 0.010) / 0.010 <= 0.03);
    CHECK(std::abs(run(0.041, 0.51).alpha - 0.074) / 0.074 <= 0.03);

    SUBCASE("alpha stays within [0, 1] and is scale-invariant") {
        Rng rng(2);
        for (int i = 0; i < 200; ++i) {
            const double m = rng.uniform(0.0, 4.0);
            const double p = rng.uniform(0.0, 10.0);
            const AlphaState a = run(m, p);
            CHECK(a.alpha >= 0.0);
            CHECK(a.alpha <= 1.0);
            const double c = rng.uniform(0.1, 10.0);
            const AlphaState b = run(c * m, c * p);
            if (m + p > 1e-12)
                CHECK(std::abs(a.alpha - b.alpha) <= 1e-9 * std::max(1.0, a.alpha));
        }
    }

    SUBCASE("hitting the target exactly maps to pure exploitation") {
        const AlphaState a = update_alpha(goal.psi_target, goal.psi_target, goal, st);
        CHECK(a.alpha == 0.0);
        CHECK(a.last_dj_m == 0.0);
        CHECK(a.last_dj_p == 0.0);
    }
}

TEST_CASE("objective_grid") {
    Bounds box{{0, 0, 0}, {1, 1, 1}};
    const ObjectiveFn f = [](const std::vector<double>& x) { return x[0] + 10 * x[1] + 100 * x[2]; };
    const auto grid = objective_grid(f, box, 0, 2, 5, {0.5, 0.5, 0.5});
    CHECK(grid.size() == 25);
    CHECK(grid.front().x == 0.0);
    CHECK(grid.back().x == 1.0);
    CHECK(grid.front().value == doctest::Approx(0 + 5 + 0));
    CHECK_THROWS_AS((void)objective_grid(f, box, 1, 1, 5, {0.5, 0.5, 0.5}),
                    std::invalid_argument);
    CHECK_THROWS_AS((void)objective_grid(f, box, 0, 1, 1, {0.5, 0.5, 0.5}),
                    std::invalid_argument);
}
