#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "kinforge/campaign.hpp"
#include "support.hpp"

using namespace kinforge;
namespace ts = kinforge::testsupport;

namespace {

/// Small budgets so a full loop turn stays in unit-test territory.
CampaignConfig tiny_config() {
    CampaignConfig cfg;
    cfg.sr.population_count = 4;
    cfg.sr.population_size = 25;
    cfg.sr.max_iterations = 60;
    cfg.sr.convergence_window = 50;
    cfg.validation_points = 8;
    cfg.design_budget.global_samples = 16;
    cfg.design_budget.local_evals = 16;
    cfg.max_iterations = 1;
    return cfg;
}

}  // namespace

TEST_CASE("initial_design") {
    const PlantConfig plant;
    const Bounds& box = plant.bounds.box;

    const auto designs = initial_design(box);
    REQUIRE(designs.size() == 4);
    // exactly the corner grid over (T0, N2)
    CHECK(designs[0][0] == box.lb[0]);
    CHECK(designs[0][4] == box.lb[4]);
    CHECK(designs[1][0] == box.lb[0]);
    CHECK(designs[1][4] == box.ub[4]);
    CHECK(designs[2][0] == box.ub[0]);
    CHECK(designs[2][4] == box.lb[4]);
    CHECK(designs[3][0] == box.ub[0]);
    CHECK(designs[3][4] == box.ub[4]);
    // all other free parameters sit at their midpoints
    for (const auto& theta : designs) {
        CHECK(theta[1] == doctest::Approx(0.5 * (box.lb[1] + box.ub[1])));
        CHECK(theta[2] == doctest::Approx(0.5 * (box.lb[2] + box.ub[2])));
        CHECK(theta[3] == doctest::Approx(0.5 * (box.lb[3] + box.ub[3])));
        CHECK(theta[5] == doctest::Approx(0.5 * (box.lb[5] + box.ub[5])));
    }

    Bounds degenerate = box;
    degenerate.ub[0] = degenerate.lb[0];
    CHECK(initial_design(degenerate).size() == 2);
}

TEST_CASE("validate_mape against closed-form models") {
    const PlantConfig plant;
    CampaignConfig cfg = tiny_config();
    CampaignState state = start_campaign(cfg, plant);

    SUBCASE("ground-truth closures predict almost perfectly") {
        const ModelEnsemble truth = ts::ground_truth_ensemble(plant);
        const double mape = validate_mape(state, truth.point_rates());
        CHECK(mape < 0.1);
        // repeat calls reuse the cached plant-side values and agree exactly
        CHECK(validate_mape(state, truth.point_rates()) == mape);
    }
    SUBCASE("an inert model misses by far more than 10%") {
        const ModelEnsemble zeros = ts::zero_rate_ensemble();
        CHECK(validate_mape(state, zeros.point_rates()) > 10.0);
    }
    SUBCASE("the validation draw is fixed and in bounds") {
        const ModelEnsemble truth = ts::ground_truth_ensemble(plant);
        (void)validate_mape(state, truth.point_rates());
        REQUIRE(static_cast<int>(state.validation_thetas.size()) == cfg.validation_points);
        for (const auto& theta : state.validation_thetas)
            for (std::size_t j = 0; j < theta.size(); ++j) {
                CHECK(theta[j] >= plant.bounds.box.lb[j]);
                CHECK(theta[j] <= plant.bounds.box.ub[j]);
            }
    }
}

TEST_CASE("candidate_matches_truth") {
    const PlantConfig plant;
    const FeatureSpec identity = FeatureSpec::identity(default_feature_names());

    // probe envelope representative of assembled campaign data
    FeatureSpec spec = identity;
    spec.scales = {26.0, 4.2, 0.6, 0.25, 0.85, 90.0, 5750.0};
    const std::array<double, 3> target_scales{25.0, 14.0, 1.2};

    const ModelEnsemble truth = ts::ground_truth_ensemble(plant);
    for (int r = 0; r < 3; ++r) {
        const RateCandidate scaled = ts::candidate(
            ts::rescale_into(truth.candidates[static_cast<std::size_t>(r)][0].expr, spec,
                             target_scales[static_cast<std::size_t>(r)]),
            r != 1);
        CHECK(candidate_matches_truth(scaled, r, spec,
                                      target_scales[static_cast<std::size_t>(r)], plant));
    }

    // a forward-only approximation of mechanism 3 is not the ground truth
    const RateCandidate fwd_only = ts::candidate(
        ts::rescale_into(ts::mul(ts::mul(ts::c(plant.kinetics.k3), ts::v(6)), ts::v(2)), spec,
                         target_scales[2]),
        true);
    CHECK_FALSE(candidate_matches_truth(fwd_only, 2, spec, target_scales[2], plant));

    const RateCandidate zero = ts::candidate(ts::c(0.0), false);
    CHECK_FALSE(candidate_matches_truth(zero, 0, spec, target_scales[0], plant));

    // slightly perturbed constants still count as recovered at 1e-3 relative
    GroundTruthKinetics nudged = plant.kinetics;
    nudged.k2 *= 1.0005;
    const RateCandidate close = ts::candidate(
        ts::rescale_into(ts::truth_rate2(nudged), spec, target_scales[1]), false);
    CHECK(candidate_matches_truth(close, 1, spec, target_scales[1], plant));
}

TEST_CASE("carry-over on a frozen dataset never loses ground") {
    // On the same data, seeding with the previous round's selection keeps the
    // hall of fame at least as good: the recorded best loss is non-increasing.
    const PlantConfig plant;
    const Trajectory traj = simulate(plant.nominal, plant);
    AssembleOptions opts;
    opts.gate_temp_c = plant.kinetics.t_phase;
    opts.metzner_otto_ks = plant.equipment.metzner_otto_ks;
    const AssembledData data = assemble({traj.measurements}, opts);

    FitConfig fit;
    fit.population_count = 4;
    fit.population_size = 25;
    fit.max_iterations = 50;
    fit.template_spec = TemplateSpec::rate_law();
    fit.seed = 3;

    const ParetoFront first = evolve(data.per_rate[1], fit);

    // what carry-over actually transfers: the top scorers of the last round
    std::vector<Expr> seeds;
    double best_seed = std::numeric_limits<double>::infinity();
    for (const ParetoEntry& e : select_top(first, 3)) {
        seeds.push_back(e.expr);
        best_seed = std::min(best_seed, e.loss);
    }
    FitConfig fit2 = fit;
    fit2.seed = 4;
    const ParetoFront second = evolve(data.per_rate[1], fit2, seeds);
    double best_second = std::numeric_limits<double>::infinity();
    for (const ParetoEntry& e : second.entries) best_second = std::min(best_second, e.loss);

    CHECK(best_second <= best_seed * (1.0 + 1e-12));
}

TEST_CASE("run_iteration: discovery mode records and contracts") {
    const PlantConfig plant;
    CampaignConfig cfg = tiny_config();
    CampaignState state = start_campaign(cfg, plant);
    REQUIRE(state.records.size() == 1);
    CHECK(state.records[0].alpha == 0.5);
    CHECK(state.records[0].tau_min == doctest::Approx(100.0));
    CHECK(state.initial_experiments == 4);

    run_iteration(state);
    REQUIRE(state.records.size() == 2);
    const IterationRecord& rec = state.records[1];
    CHECK(rec.iteration == 1);
    // one new experiment was appended
    CHECK(state.experiments.size() == 5);
    CHECK(state.experiment_thetas.size() == 5);
    // discovery mode never touches the process objective or its normalizers
    CHECK(!std::isfinite(rec.j_m_max));
    CHECK(!std::isfinite(rec.j_p_max));
    CHECK(!std::isfinite(rec.dj_p));
    CHECK(rec.alpha_used == 1.0);
    CHECK(std::isfinite(rec.mape_percent));
    for (int r = 0; r < 3; ++r) {
        CHECK(!rec.fronts[static_cast<std::size_t>(r)].empty());
        CHECK(!rec.selected[static_cast<std::size_t>(r)].empty());
        CHECK(rec.dataset_rows[static_cast<std::size_t>(r)] > 0);
    }
    // the designed experiment respects the box
    for (std::size_t j = 0; j < rec.theta.size(); ++j) {
        CHECK(rec.theta[j] >= plant.bounds.box.lb[j]);
        CHECK(rec.theta[j] <= plant.bounds.box.ub[j]);
    }
    // datasets grow by exactly one experiment's samples on the next turn
    run_iteration(state);
    CHECK(state.records[2].dataset_rows[1] ==
          state.records[1].dataset_rows[1] + static_cast<int>(state.experiments[4].size()));
}

TEST_CASE("campaign determinism and persistence round trip") {
    const PlantConfig plant;
    CampaignConfig cfg = tiny_config();
    cfg.max_iterations = 2;
    cfg.master_seed = 77;

    const CampaignState straight = run_campaign(cfg, plant);
    REQUIRE(straight.iterations_run() == 2);

    SUBCASE("identical seeds and config reproduce the records exactly") {
        const CampaignState again = run_campaign(cfg, plant);
        CHECK(metrics_csv(again) == metrics_csv(straight));
        CHECK(fronts_csv(again) == fronts_csv(straight));
    }

    SUBCASE("save + load + continue equals the uninterrupted run") {
        CampaignConfig one = cfg;
        one.max_iterations = 1;
        CampaignState partial = run_campaign(one, plant);
        REQUIRE(partial.iterations_run() == 1);

        const std::string path =
            (std::filesystem::temp_directory_path() / "kinforge_state_rt.json").string();
        save_state(partial, path);
        CampaignState resumed = load_state(path);
        std::filesystem::remove(path);

        resumed.config.max_iterations = 2;
        resumed.stopped = false;
        continue_campaign(resumed);
        CHECK(metrics_csv(resumed) == metrics_csv(straight));
        CHECK(fronts_csv(resumed) == fronts_csv(straight));
    }

    SUBCASE("alpha bookkeeping recomputes exactly from the records") {
        CampaignConfig multi = cfg;
        multi.objective = CampaignObjective::MultiObjective;
        multi.max_iterations = 1;
        const CampaignState state = run_campaign(multi, plant);
        const IterationRecord& rec = state.records.back();
        REQUIRE(std::isfinite(rec.alpha));
        const double expect = (rec.dj_m == 0.0 && rec.dj_p == 0.0)
                                  ? 0.0
                                  : rec.dj_m / (rec.dj_m + rec.dj_p);
        CHECK(rec.alpha == doctest::Approx(expect).epsilon(1e-12));
        CHECK(std::isfinite(rec.j_m_max));
        CHECK(std::isfinite(rec.j_p_max));
        CHECK(rec.normalizers_refreshed);
    }
}

TEST_CASE("max_iterations zero yields only the initial design record") {
    const PlantConfig plant;
    CampaignConfig cfg = tiny_config();
    cfg.max_iterations = 0;
    const CampaignState state = run_campaign(cfg, plant);
    CHECK(state.records.size() == 1);
    CHECK(state.experiments.size() == 4);
    CHECK(state.stop_reason == "initial design only");
}

TEST_CASE("metrics and fronts tables") {
    const PlantConfig plant;
    CampaignConfig cfg = tiny_config();
    const CampaignState state = run_campaign(cfg, plant);

    const std::string metrics = metrics_csv(state);
    CHECK(metrics.rfind("I,MAPE,MSE_r1_1,MSE_r1_2,MSE_r1_3,MSE_r2_1,MSE_r2_2,MSE_r2_3,"
                        "MSE_r3_1,MSE_r3_2,MSE_r3_3,alpha,tau,JM_max,JP_max,dJM,dJP\n",
                        0) == 0);
    // record 0 has placeholder dashes for everything model-related
    const std::string row0 = metrics.substr(metrics.find('\n') + 1);
    CHECK(row0.rfind("0,-,-", 0) == 0);

    const std::string fronts = fronts_csv(state);
    CHECK(fronts.rfind("iteration,rate,rank,complexity,mse,score,top,expression\n", 0) == 0);
    CHECK(fronts.find(",r1,1,") != std::string::npos);
    CHECK(fronts.find(",r3,1,") != std::string::npos);
}
