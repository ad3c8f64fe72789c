#include "kinforge/campaign.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <json.hpp>
#include <stdexcept>

#include "kinforge/csv.hpp"
#include "kinforge/parallel.hpp"

namespace kinforge {

namespace {
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

std::string cell(double v) { return std::isfinite(v) ? format_double(v) : std::string("-"); }
}  // namespace

void CampaignConfig::validate() const {
    sr.validate();
    goal.validate();
    if (max_iterations < 0) throw std::invalid_argument("campaign: max_iterations must be >= 0");
    if (validation_points < 1) throw std::invalid_argument("campaign: validation_points must be >= 1");
    if (!(scratch_budget_factor > 0)) throw std::invalid_argument("campaign: scratch factor > 0");
    if (!(alpha_threshold > 0)) throw std::invalid_argument("campaign: alpha_threshold > 0");
    if (top_k < 1) throw std::invalid_argument("campaign: top_k must be >= 1");
    if (workers < 1) throw std::invalid_argument("campaign: workers must be >= 1");
}

void CampaignConfig::apply_mode(const std::string& mode) {
    if (mode == "1a") {
        sr_mode = SrMode::FromScratch;
        template_enabled = true;
        objective = CampaignObjective::DiscoveryOnly;
    } else if (mode == "1b") {
        sr_mode = SrMode::CarryOver;
        template_enabled = true;
        objective = CampaignObjective::DiscoveryOnly;
    } else if (mode == "1c") {
        sr_mode = SrMode::CarryOver;
        template_enabled = false;
        objective = CampaignObjective::DiscoveryOnly;
    } else if (mode == "2") {
        sr_mode = SrMode::CarryOver;
        template_enabled = true;
        objective = CampaignObjective::MultiObjective;
    } else {
        throw std::invalid_argument("unknown campaign mode '" + mode + "' (use 1a|1b|1c|2)");
    }
}

std::vector<std::vector<double>> initial_design(const Bounds& space) {
    space.validate();
    if (space.dim() != 6) throw std::invalid_argument("initial_design expects the 6-dim design box");
    const std::vector<double> mid = space.midpoint();
    std::vector<std::vector<double>> designs;
    for (double t0 : {space.lb[0], space.ub[0]}) {
        for (double n2 : {space.lb[4], space.ub[4]}) {
            std::vector<double> theta = mid;
            theta[0] = t0;
            theta[4] = n2;
            if (std::find(designs.begin(), designs.end(), theta) != designs.end()) {
                std::cerr << "initial_design: degenerate bounds produced a duplicate corner, dropped\n";
                continue;
            }
            designs.push_back(std::move(theta));
        }
    }
    return designs;
}

CampaignState start_campaign(const CampaignConfig& config, const PlantConfig& plant) {
    config.validate();
    plant.validate();
    CampaignState state;
    state.config = config;
    state.plant = plant;
    state.alpha.alpha = 0.5;
    state.alpha.alpha_threshold = config.alpha_threshold;

    for (const std::vector<double>& theta : initial_design(plant.bounds.box)) {
        PfdParams params = plant.nominal;
        params.set_theta(theta);
        Trajectory traj = simulate(params, plant);
        state.experiment_thetas.push_back(theta);
        state.experiments.push_back(std::move(traj.measurements));
    }

    state.initial_experiments = static_cast<int>(state.experiments.size());

    IterationRecord rec0;
    rec0.iteration = 0;
    rec0.alpha = 0.5;
    rec0.tau_min = plant.nominal.total_time_min();
    state.records.push_back(std::move(rec0));
    return state;
}

namespace {

AssembleOptions assemble_options(const CampaignState& state) {
    AssembleOptions opt;
    opt.noise = state.config.noise;
    opt.gate_mode = state.config.gate_mode;
    opt.gate_temp_c = state.plant.kinetics.t_phase;
    opt.metzner_otto_ks = state.plant.equipment.metzner_otto_ks;
    for (int r = 0; r < 3; ++r)
        if (r < static_cast<int>(state.config.sr.lambda_diag.size()))
            opt.loss_weights[static_cast<std::size_t>(r)] =
                state.config.sr.lambda_diag[static_cast<std::size_t>(r)];
    return opt;
}

std::string candidate_key(const RateCandidate& c) {
    return serialize(c.expr) + (c.gated ? "|gated" : "|open");
}

}  // namespace

AssembledData assemble_for_record(const CampaignState& state, int record_index) {
    if (record_index < 1 || record_index >= static_cast<int>(state.records.size()))
        throw std::invalid_argument("assemble_for_record: no fitted record at that index");
    const std::size_t count = static_cast<std::size_t>(state.initial_experiments + record_index - 1);
    std::vector<std::vector<Measurement>> slice(state.experiments.begin(),
                                                state.experiments.begin() +
                                                    static_cast<long>(count));
    return assemble(slice, assemble_options(state));
}

ModelEnsemble ensemble_from_record(const IterationRecord& record, const AssembledData& data) {
    ModelEnsemble ens;
    ens.features = data.features;
    for (int r = 0; r < 3; ++r) {
        ens.target_scales[static_cast<std::size_t>(r)] =
            data.per_rate[static_cast<std::size_t>(r)].target_scale;
        ens.candidates[static_cast<std::size_t>(r)] = record.selected[static_cast<std::size_t>(r)];
    }
    ens.validate();
    return ens;
}

double validate_mape(CampaignState& state, const RateFn& point_model) {
    const int n = state.config.validation_points;
    if (state.validation_thetas.empty()) {
        Rng rng(state.config.validation_seed);
        const Bounds& box = state.plant.bounds.box;
        while (static_cast<int>(state.validation_thetas.size()) < n) {
            std::vector<double> theta(static_cast<std::size_t>(box.dim()));
            for (int j = 0; j < box.dim(); ++j)
                theta[static_cast<std::size_t>(j)] =
                    rng.uniform(box.lb[static_cast<std::size_t>(j)], box.ub[static_cast<std::size_t>(j)]);
            bool collides = false;
            for (const auto& used : state.experiment_thetas) {
                double d = 0.0;
                for (std::size_t j = 0; j < used.size(); ++j)
                    d = std::max(d, std::abs(used[j] - theta[j]));
                if (d < 1e-9) collides = true;
            }
            if (collides) {
                std::cerr << "validation draw collided with a designed experiment, redrawing\n";
                continue;
            }
            state.validation_thetas.push_back(std::move(theta));
        }
        state.validation_actuals.assign(static_cast<std::size_t>(n), 0.0);
        parallel_for(n, state.config.workers, [&](int i) {
            PfdParams params = state.plant.nominal;
            params.set_theta(state.validation_thetas[static_cast<std::size_t>(i)]);
            state.validation_actuals[static_cast<std::size_t>(i)] =
                simulate(params, state.plant).final_kpi;
        });
    }

    std::vector<double> errors(static_cast<std::size_t>(n), 0.0);
    parallel_for(n, state.config.workers, [&](int i) {
        PfdParams params = state.plant.nominal;
        params.set_theta(state.validation_thetas[static_cast<std::size_t>(i)]);
        const KpiPrediction pred = predict_kpi(params, state.plant, point_model);
        const double actual = state.validation_actuals[static_cast<std::size_t>(i)];
        const double hat = pred.ok ? pred.final_kpi : 0.0;  // broken model scores as total miss
        errors[static_cast<std::size_t>(i)] = std::abs(actual - hat) / std::abs(actual);
    });
    double mape = 0.0;
    for (double e : errors) mape += e;
    return 100.0 * mape / static_cast<double>(n);
}

bool candidate_matches_truth(const RateCandidate& candidate, int rate_index,
                             const FeatureSpec& features, double target_scale,
                             const PlantConfig& plant, double rel_tol) {
    // Probes cover the data envelope widened by 15%, gate-open temperatures
    // only (the gate is applied outside the learned expressions) and strictly
    // positive shear (the published r3 carries gamma_dot in a denominator).
    Rng rng(0xFACADEULL + static_cast<std::uint64_t>(rate_index));
    const int n_probes = 256;
    double worst = 0.0;
    std::vector<double> cand_vals(n_probes), true_vals(n_probes);
    for (int i = 0; i < n_probes; ++i) {
        Phases x{};
        std::array<double, 7> f{};
        for (int j = 0; j < 5; ++j) {
            x[j] = rng.uniform(0.0, 1.15 * features.scales[static_cast<std::size_t>(j)]);
            f[static_cast<std::size_t>(j)] = x[j] / features.scales[static_cast<std::size_t>(j)];
        }
        const double t_lo = rate_index == 1 ? 5.0 : plant.kinetics.t_phase;
        const double temp = rng.uniform(t_lo, 1.1 * features.scales[5]);
        const double gdot = rng.uniform(0.05 * features.scales[6], 1.1 * features.scales[6]);
        f[5] = temp / features.scales[5];
        f[6] = gdot / features.scales[6];

        const RateTriple truth = ground_truth_rates(x, temp, gdot, plant.kinetics);
        const double cand = candidate.expr.evaluate(f) * target_scale;
        if (!std::isfinite(cand)) return false;
        cand_vals[static_cast<std::size_t>(i)] = cand;
        true_vals[static_cast<std::size_t>(i)] = truth[static_cast<std::size_t>(rate_index)];
    }
    double scale = 0.0;
    for (double v : true_vals) scale = std::max(scale, std::abs(v));
    if (scale == 0.0) return false;
    for (int i = 0; i < n_probes; ++i) {
        const double denom = std::abs(true_vals[static_cast<std::size_t>(i)]) + 1e-2 * scale;
        worst = std::max(worst, std::abs(cand_vals[static_cast<std::size_t>(i)] -
                                         true_vals[static_cast<std::size_t>(i)]) /
                                    denom);
    }
    return worst <= rel_tol;
}

void run_iteration(CampaignState& state) {
    const CampaignConfig& cfg = state.config;
    const PlantConfig& plant = state.plant;
    const int iteration = static_cast<int>(state.records.size());
    const Rng master(cfg.master_seed);

    IterationRecord rec;
    rec.iteration = iteration;
    rec.final_exploitation = state.pending_final;

    // (1) pool measurements into per-rate datasets
    const AssembledData data = assemble(state.experiments, assemble_options(state));
    for (int r = 0; r < 3; ++r)
        rec.dataset_rows[static_cast<std::size_t>(r)] =
            data.per_rate[static_cast<std::size_t>(r)].rows();

    // (2) evolve each rate equation, carrying over prior candidates when set
    for (int r = 0; r < 3; ++r) {
        FitConfig fit = cfg.sr;
        fit.template_spec = cfg.template_enabled ? TemplateSpec::rate_law() : TemplateSpec::disabled();
        fit.workers = cfg.workers;
        fit.seed = master.child(0x5E00 + static_cast<std::uint64_t>(iteration) * 8 +
                                static_cast<std::uint64_t>(r))
                       .seed();
        std::vector<Expr> seeds;
        if (cfg.sr_mode == SrMode::CarryOver) {
            for (const RateCandidate& c : state.carry_seeds[static_cast<std::size_t>(r)])
                seeds.push_back(c.expr);
        } else {
            fit.max_iterations = static_cast<int>(fit.max_iterations * cfg.scratch_budget_factor);
        }
        ParetoFront front = evolve(data.per_rate[static_cast<std::size_t>(r)], fit, seeds);
        front.iteration = iteration;

        // (3) top-k selection
        const std::vector<ParetoEntry> top = select_top(front, cfg.top_k);
        std::vector<RateCandidate>& sel = rec.selected[static_cast<std::size_t>(r)];
        for (const ParetoEntry& e : top)
            sel.push_back({e.expr, e.complexity, e.loss, e.score,
                           data.gated[static_cast<std::size_t>(r)]});
        rec.fronts[static_cast<std::size_t>(r)] = std::move(front);
    }

    const ModelEnsemble ensemble = ensemble_from_record(rec, data);
    const RateFn point = ensemble.point_rates();

    // (4) held-out prediction accuracy of the point model
    rec.mape_percent = validate_mape(state, point);

    // structural recovery of all three selected expressions
    rec.recovered = true;
    for (int r = 0; r < 3; ++r)
        rec.recovered =
            rec.recovered && candidate_matches_truth(rec.selected[static_cast<std::size_t>(r)][0], r,
                                                     data.features,
                                                     ensemble.target_scales[static_cast<std::size_t>(r)],
                                                     plant);

    // (5) design the next experiment
    const Rng design_rng = master.child(0xDE00 + static_cast<std::uint64_t>(iteration));
    DesignResult design;
    if (cfg.objective == CampaignObjective::DiscoveryOnly) {
        // pure exploration: alpha pinned at 1, no normalizers
        design = design_experiment(make_discrimination_objective(plant, ensemble, cfg.workers),
                                   plant.bounds.box, cfg.design_budget, design_rng);
        rec.alpha_used = 1.0;
    } else {
        std::array<std::string, 9> keys{};
        for (int r = 0; r < 3; ++r)
            for (std::size_t j = 0; j < rec.selected[static_cast<std::size_t>(r)].size() && j < 3; ++j)
                keys[static_cast<std::size_t>(r) * 3 + j] =
                    candidate_key(rec.selected[static_cast<std::size_t>(r)][j]);
        const bool changed = keys != state.last_candidate_keys ||
                             !std::isfinite(state.alpha.j_m_max) ||
                             !std::isfinite(state.alpha.j_p_max);
        if (changed) {
            OptimBudget norm_budget = cfg.design_budget;
            norm_budget.seed = master.child(0xA000 + static_cast<std::uint64_t>(iteration)).seed();
            const Normalizers norms =
                compute_normalizers(plant, ensemble, cfg.goal, norm_budget, cfg.workers);
            state.alpha.j_m_max = norms.j_m_max;
            state.alpha.j_p_max = norms.j_p_max;
            rec.normalizers_refreshed = true;
        }
        state.last_candidate_keys = keys;
        rec.j_m_max = state.alpha.j_m_max;
        rec.j_p_max = state.alpha.j_p_max;
        rec.alpha_used = state.alpha.alpha;
        const Normalizers norms{state.alpha.j_m_max, state.alpha.j_p_max};
        design = design_experiment(
            make_combined_objective(plant, ensemble, cfg.goal, rec.alpha_used, norms, cfg.workers),
            plant.bounds.box, cfg.design_budget, design_rng);
    }
    rec.theta = design.theta;

    // (6) run the experiment and compare predicted vs actual KPI
    PfdParams params = plant.nominal;
    params.set_theta(rec.theta);
    rec.tau_min = params.total_time_min();
    const KpiPrediction pred = predict_kpi(params, plant, point);
    rec.predicted_kpi = pred.ok ? pred.final_kpi : 0.0;
    if (!pred.ok) std::cerr << "point model infeasible at the designed experiment\n";
    Trajectory traj = simulate(params, plant);
    rec.actual_kpi = traj.final_kpi;
    state.experiment_thetas.push_back(rec.theta);
    state.experiments.push_back(std::move(traj.measurements));

    if (cfg.objective == CampaignObjective::MultiObjective) {
        state.alpha = update_alpha(rec.predicted_kpi, rec.actual_kpi, cfg.goal, state.alpha);
        rec.dj_m = state.alpha.last_dj_m;
        rec.dj_p = state.alpha.last_dj_p;
        rec.alpha = state.alpha.alpha;
    }

    // (7) append and roll the carry-over seeds forward
    state.carry_seeds = rec.selected;
    state.records.push_back(std::move(rec));
}

bool campaign_should_stop(const CampaignState& state) {
    if (state.stopped) return true;
    const CampaignConfig& cfg = state.config;
    const int done = state.iterations_run();
    if (done >= 1) {
        const IterationRecord& last = state.records.back();
        if (cfg.objective == CampaignObjective::DiscoveryOnly && last.recovered) return true;
        if (cfg.objective == CampaignObjective::MultiObjective && last.final_exploitation)
            return true;
    }
    // The final exploitation run may extend one turn past the cap.
    if (cfg.objective == CampaignObjective::MultiObjective && state.pending_final)
        return done >= cfg.max_iterations + 1;
    return done >= cfg.max_iterations;
}

namespace {

void note_stop_reason(CampaignState& state) {
    if (state.iterations_run() < 1) {
        state.stop_reason = "initial design only";
        return;
    }
    const IterationRecord& last = state.records.back();
    if (state.config.objective == CampaignObjective::DiscoveryOnly && last.recovered)
        state.stop_reason = "ground truth recovered";
    else if (last.final_exploitation)
        state.stop_reason = "alpha fell below threshold; final exploitation experiment done";
    else
        state.stop_reason = "iteration cap reached";
}

}  // namespace

void continue_campaign(CampaignState& state, const IterationCallback& on_iteration) {
    while (!campaign_should_stop(state)) {
        run_iteration(state);
        if (state.config.objective == CampaignObjective::MultiObjective && !state.pending_final &&
            state.alpha.alpha < state.config.alpha_threshold)
            state.pending_final = true;
        if (on_iteration) on_iteration(state);
    }
    state.stopped = true;
    note_stop_reason(state);
}

CampaignState run_campaign(const CampaignConfig& config, const PlantConfig& plant,
                           const IterationCallback& on_iteration) {
    CampaignState state = start_campaign(config, plant);
    if (on_iteration) on_iteration(state);
    continue_campaign(state, on_iteration);
    return state;
}

std::string metrics_csv(const CampaignState& state) {
    std::string out =
        "I,MAPE,MSE_r1_1,MSE_r1_2,MSE_r1_3,MSE_r2_1,MSE_r2_2,MSE_r2_3,MSE_r3_1,MSE_r3_2,"
        "MSE_r3_3,alpha,tau,JM_max,JP_max,dJM,dJP\n";
    for (const IterationRecord& rec : state.records) {
        std::vector<std::string> cells{std::to_string(rec.iteration), cell(rec.mape_percent)};
        for (int r = 0; r < 3; ++r)
            for (int j = 0; j < 3; ++j) {
                const auto& sel = rec.selected[static_cast<std::size_t>(r)];
                cells.push_back(j < static_cast<int>(sel.size())
                                    ? format_double(sel[static_cast<std::size_t>(j)].loss)
                                    : std::string("-"));
            }
        cells.push_back(cell(rec.alpha));
        cells.push_back(cell(rec.tau_min));
        cells.push_back(cell(rec.j_m_max));
        cells.push_back(cell(rec.j_p_max));
        cells.push_back(cell(rec.dj_m));
        cells.push_back(cell(rec.dj_p));
        out += csv::join(cells);
    }
    return out;
}

std::string fronts_csv(const CampaignState& state) {
    std::string out = "iteration,rate,rank,complexity,mse,score,top,expression\n";
    for (const IterationRecord& rec : state.records) {
        for (int r = 0; r < 3; ++r) {
            const auto& sel = rec.selected[static_cast<std::size_t>(r)];
            for (std::size_t j = 0; j < sel.size(); ++j) {
                out += csv::join({std::to_string(rec.iteration), "r" + std::to_string(r + 1),
                                  std::to_string(j + 1), std::to_string(sel[j].complexity),
                                  format_double(sel[j].loss), format_double(sel[j].score),
                                  j == 0 ? "1" : "0", serialize(sel[j].expr)});
            }
        }
    }
    return out;
}

// --- persistence -----------------------------------------------------------

namespace {

using nlohmann::json;

double json_double(const json& j) {
    if (j.is_string() || j.is_null()) return kNan;  // "-" placeholder
    return j.get<double>();
}

json dnum(double v) {
    if (std::isfinite(v)) return v;
    return "-";
}

json candidate_to_json(const RateCandidate& c) {
    return json{{"expr", serialize(c.expr)},
                {"complexity", c.complexity},
                {"loss", c.loss},
                {"score", c.score},
                {"gated", c.gated}};
}

RateCandidate candidate_from_json(const json& j) {
    RateCandidate c;
    c.expr = parse_expr(j.at("expr").get<std::string>());
    c.complexity = j.at("complexity").get<int>();
    c.loss = j.at("loss").get<double>();
    c.score = j.at("score").get<double>();
    c.gated = j.at("gated").get<bool>();
    return c;
}

json front_to_json(const ParetoFront& f) {
    json entries = json::array();
    for (const ParetoEntry& e : f.entries)
        entries.push_back(json{{"expr", serialize(e.expr)},
                               {"complexity", e.complexity},
                               {"loss", e.loss},
                               {"score", e.score}});
    return json{{"entries", entries},
                {"rate_index", f.rate_index},
                {"iteration", f.iteration},
                {"baseline_loss", dnum(f.baseline_loss)}};
}

ParetoFront front_from_json(const json& j) {
    ParetoFront f;
    for (const json& e : j.at("entries"))
        f.entries.push_back({parse_expr(e.at("expr").get<std::string>()),
                             e.at("complexity").get<int>(), e.at("loss").get<double>(),
                             e.at("score").get<double>()});
    f.rate_index = j.at("rate_index").get<int>();
    f.iteration = j.at("iteration").get<int>();
    f.baseline_loss = json_double(j.at("baseline_loss"));
    return f;
}

json measurement_to_json(const Measurement& m) {
    return json{{"t", m.t_min},
                {"x_r", m.x_r},
                {"x_s", m.x_s},
                {"T_s", m.t_s_c},
                {"N", m.n_rpm},
                {"Q_s", m.q_s_l_min},
                {"V_s", m.v_s_l}};
}

Measurement measurement_from_json(const json& j) {
    Measurement m;
    m.t_min = j.at("t").get<double>();
    m.x_r = j.at("x_r").get<Phases>();
    m.x_s = j.at("x_s").get<Phases>();
    m.t_s_c = j.at("T_s").get<double>();
    m.n_rpm = j.at("N").get<double>();
    m.q_s_l_min = j.at("Q_s").get<double>();
    m.v_s_l = j.at("V_s").get<double>();
    return m;
}

json plant_to_json(const PlantConfig& p) {
    json j;
    j["kinetics"] = {{"k1", p.kinetics.k1},         {"k2", p.kinetics.k2},
                     {"k3", p.kinetics.k3},         {"K2", p.kinetics.big_k2},
                     {"K3", p.kinetics.big_k3},     {"alpha_act", p.kinetics.alpha_act},
                     {"beta_off", p.kinetics.beta_off}, {"t_phase", p.kinetics.t_phase}};
    j["equipment"] = {{"mixer_holdup_l", p.equipment.mixer_holdup_l},
                      {"metzner_otto_ks", p.equipment.metzner_otto_ks},
                      {"jacket_ua", p.equipment.jacket_ua},
                      {"coolant_supply_c", p.equipment.coolant_supply_c},
                      {"jacket_flow_ref", p.equipment.jacket_flow_ref},
                      {"cp_tank", p.equipment.cp_tank},
                      {"cp_loop", p.equipment.cp_loop},
                      {"cp_feed", p.equipment.cp_feed}};
    j["nominal"] = {{"t0_w_c", p.nominal.t0_w_c},   {"tau1", p.nominal.tau1_min},
                    {"tau2", p.nominal.tau2_min},   {"tau3", p.nominal.tau3_min},
                    {"tau4", p.nominal.tau4_min},   {"n1", p.nominal.n1_rpm},
                    {"n2", p.nominal.n2_rpm},       {"n3", p.nominal.n3_rpm},
                    {"n4", p.nominal.n4_rpm},       {"v0_w_l", p.nominal.v0_w_l},
                    {"v1_a_l", p.nominal.v1_a_l},   {"v3_w_l", p.nominal.v3_w_l},
                    {"t1_a_c", p.nominal.t1_a_c},   {"t3_w_c", p.nominal.t3_w_c},
                    {"qb", p.nominal.bottom_flow_l_min},
                    {"qj", p.nominal.jacket_flow_l_min}};
    j["bounds"] = {{"lb", p.bounds.box.lb}, {"ub", p.bounds.box.ub}};
    j["kpi_weights"] = p.kpi.weights;
    j["feed_water_conc"] = p.feed_water_conc;
    j["feed_active_conc"] = p.feed_active_conc;
    j["rtol"] = p.rtol;
    j["atol"] = p.atol;
    return j;
}

PlantConfig plant_from_json(const json& j) {
    PlantConfig p;
    const json& k = j.at("kinetics");
    p.kinetics.k1 = k.at("k1");
    p.kinetics.k2 = k.at("k2");
    p.kinetics.k3 = k.at("k3");
    p.kinetics.big_k2 = k.at("K2");
    p.kinetics.big_k3 = k.at("K3");
    p.kinetics.alpha_act = k.at("alpha_act");
    p.kinetics.beta_off = k.at("beta_off");
    p.kinetics.t_phase = k.at("t_phase");
    const json& e = j.at("equipment");
    p.equipment.mixer_holdup_l = e.at("mixer_holdup_l");
    p.equipment.metzner_otto_ks = e.at("metzner_otto_ks");
    p.equipment.jacket_ua = e.at("jacket_ua");
    p.equipment.coolant_supply_c = e.at("coolant_supply_c");
    p.equipment.jacket_flow_ref = e.at("jacket_flow_ref");
    p.equipment.cp_tank = e.at("cp_tank");
    p.equipment.cp_loop = e.at("cp_loop");
    p.equipment.cp_feed = e.at("cp_feed");
    const json& n = j.at("nominal");
    p.nominal.t0_w_c = n.at("t0_w_c");
    p.nominal.tau1_min = n.at("tau1");
    p.nominal.tau2_min = n.at("tau2");
    p.nominal.tau3_min = n.at("tau3");
    p.nominal.tau4_min = n.at("tau4");
    p.nominal.n1_rpm = n.at("n1");
    p.nominal.n2_rpm = n.at("n2");
    p.nominal.n3_rpm = n.at("n3");
    p.nominal.n4_rpm = n.at("n4");
    p.nominal.v0_w_l = n.at("v0_w_l");
    p.nominal.v1_a_l = n.at("v1_a_l");
    p.nominal.v3_w_l = n.at("v3_w_l");
    p.nominal.t1_a_c = n.at("t1_a_c");
    p.nominal.t3_w_c = n.at("t3_w_c");
    p.nominal.bottom_flow_l_min = n.at("qb");
    p.nominal.jacket_flow_l_min = n.at("qj");
    p.bounds.box.lb = j.at("bounds").at("lb").get<std::vector<double>>();
    p.bounds.box.ub = j.at("bounds").at("ub").get<std::vector<double>>();
    p.kpi.weights = j.at("kpi_weights").get<Phases>();
    p.feed_water_conc = j.at("feed_water_conc");
    p.feed_active_conc = j.at("feed_active_conc");
    p.rtol = j.at("rtol");
    p.atol = j.at("atol");
    return p;
}

json config_to_json(const CampaignConfig& c) {
    json j;
    j["sr_mode"] = c.sr_mode == SrMode::CarryOver ? "carry_over" : "from_scratch";
    j["template_enabled"] = c.template_enabled;
    j["objective"] = c.objective == CampaignObjective::DiscoveryOnly ? "discovery" : "multiobjective";
    j["max_iterations"] = c.max_iterations;
    j["alpha_threshold"] = c.alpha_threshold;
    j["scratch_budget_factor"] = c.scratch_budget_factor;
    j["validation_points"] = c.validation_points;
    j["master_seed"] = c.master_seed;
    j["validation_seed"] = c.validation_seed;
    j["goal"] = {{"psi_target", c.goal.psi_target},
                 {"kappa", c.goal.kappa},
                 {"include_batch_time", c.goal.include_batch_time},
                 {"epsilon_weight", c.goal.epsilon_weight}};
    j["design_budget"] = {{"global_samples", c.design_budget.global_samples},
                          {"local_evals", c.design_budget.local_evals},
                          {"seed", c.design_budget.seed}};
    j["gate_mode"] = c.gate_mode == GateMode::GateAware ? "gate-aware" : "raw";
    j["noise"] = {{"rel_level", c.noise.rel_level}, {"seed", c.noise.seed}};
    j["top_k"] = c.top_k;
    j["workers"] = c.workers;
    json sr;
    sr["n_features"] = c.sr.n_features;
    sr["max_complexity"] = c.sr.max_complexity;
    sr["population_count"] = c.sr.population_count;
    sr["population_size"] = c.sr.population_size;
    sr["max_iterations"] = c.sr.max_iterations;
    sr["convergence_window"] = c.sr.convergence_window;
    sr["convergence_rel_tol"] = c.sr.convergence_rel_tol;
    sr["tournament_size"] = c.sr.tournament_size;
    sr["selection_p"] = c.sr.selection_p;
    sr["parsimony_base_frac"] = c.sr.parsimony_base_frac;
    sr["parsimony_adapt_rate"] = c.sr.parsimony_adapt_rate;
    sr["lambda_diag"] = c.sr.lambda_diag;
    sr["wall_clock_seconds"] =
        std::isfinite(c.sr.wall_clock_seconds) ? json(c.sr.wall_clock_seconds) : json("inf");
    sr["simplify_every"] = c.sr.simplify_every;
    sr["optimize_every"] = c.sr.optimize_every;
    sr["migrate_every"] = c.sr.migrate_every;
    sr["optimize_iterations"] = c.sr.optimize_iterations;
    sr["seed_fraction"] = c.sr.seed_fraction;
    sr["mutation_retry_cap"] = c.sr.mutation_retry_cap;
    sr["mutation"] = {{"perturb_constant", c.sr.mutation.perturb_constant},
                      {"replace_operator", c.sr.mutation.replace_operator},
                      {"replace_subtree", c.sr.mutation.replace_subtree},
                      {"insert_node", c.sr.mutation.insert_node},
                      {"delete_node", c.sr.mutation.delete_node},
                      {"crossover", c.sr.mutation.crossover},
                      {"none", c.sr.mutation.none}};
    j["sr"] = sr;
    return j;
}

CampaignConfig config_from_json(const json& j) {
    CampaignConfig c;
    c.sr_mode = j.at("sr_mode") == "carry_over" ? SrMode::CarryOver : SrMode::FromScratch;
    c.template_enabled = j.at("template_enabled");
    c.objective = j.at("objective") == "discovery" ? CampaignObjective::DiscoveryOnly
                                                   : CampaignObjective::MultiObjective;
    c.max_iterations = j.at("max_iterations");
    c.alpha_threshold = j.at("alpha_threshold");
    c.scratch_budget_factor = j.at("scratch_budget_factor");
    c.validation_points = j.at("validation_points");
    c.master_seed = j.at("master_seed");
    c.validation_seed = j.at("validation_seed");
    c.goal.psi_target = j.at("goal").at("psi_target");
    c.goal.kappa = j.at("goal").at("kappa");
    c.goal.include_batch_time = j.at("goal").at("include_batch_time");
    c.goal.epsilon_weight = j.at("goal").at("epsilon_weight");
    c.design_budget.global_samples = j.at("design_budget").at("global_samples");
    c.design_budget.local_evals = j.at("design_budget").at("local_evals");
    c.design_budget.seed = j.at("design_budget").at("seed");
    c.gate_mode = j.at("gate_mode") == "gate-aware" ? GateMode::GateAware : GateMode::Raw;
    c.noise.rel_level = j.at("noise").at("rel_level");
    c.noise.seed = j.at("noise").at("seed");
    c.top_k = j.at("top_k");
    c.workers = j.at("workers");
    const json& sr = j.at("sr");
    c.sr.n_features = sr.at("n_features");
    c.sr.max_complexity = sr.at("max_complexity");
    c.sr.population_count = sr.at("population_count");
    c.sr.population_size = sr.at("population_size");
    c.sr.max_iterations = sr.at("max_iterations");
    c.sr.convergence_window = sr.at("convergence_window");
    c.sr.convergence_rel_tol = sr.at("convergence_rel_tol");
    c.sr.tournament_size = sr.at("tournament_size");
    c.sr.selection_p = sr.at("selection_p");
    c.sr.parsimony_base_frac = sr.at("parsimony_base_frac");
    c.sr.parsimony_adapt_rate = sr.at("parsimony_adapt_rate");
    c.sr.lambda_diag = sr.at("lambda_diag").get<std::vector<double>>();
    c.sr.wall_clock_seconds = sr.at("wall_clock_seconds").is_string()
                                  ? std::numeric_limits<double>::infinity()
                                  : sr.at("wall_clock_seconds").get<double>();
    c.sr.simplify_every = sr.at("simplify_every");
    c.sr.optimize_every = sr.at("optimize_every");
    c.sr.migrate_every = sr.at("migrate_every");
    c.sr.optimize_iterations = sr.at("optimize_iterations");
    c.sr.seed_fraction = sr.at("seed_fraction");
    c.sr.mutation_retry_cap = sr.at("mutation_retry_cap");
    const json& mu = sr.at("mutation");
    c.sr.mutation.perturb_constant = mu.at("perturb_constant");
    c.sr.mutation.replace_operator = mu.at("replace_operator");
    c.sr.mutation.replace_subtree = mu.at("replace_subtree");
    c.sr.mutation.insert_node = mu.at("insert_node");
    c.sr.mutation.delete_node = mu.at("delete_node");
    c.sr.mutation.crossover = mu.at("crossover");
    c.sr.mutation.none = mu.at("none");
    return c;
}

json record_to_json(const IterationRecord& r) {
    json j;
    j["iteration"] = r.iteration;
    j["dataset_rows"] = r.dataset_rows;
    json fronts = json::array();
    for (const ParetoFront& f : r.fronts) fronts.push_back(front_to_json(f));
    j["fronts"] = fronts;
    json sel = json::array();
    for (const auto& list : r.selected) {
        json l = json::array();
        for (const RateCandidate& c : list) l.push_back(candidate_to_json(c));
        sel.push_back(l);
    }
    j["selected"] = sel;
    j["theta"] = r.theta;
    j["predicted_kpi"] = dnum(r.predicted_kpi);
    j["actual_kpi"] = dnum(r.actual_kpi);
    j["dj_m"] = dnum(r.dj_m);
    j["dj_p"] = dnum(r.dj_p);
    j["alpha"] = dnum(r.alpha);
    j["alpha_used"] = dnum(r.alpha_used);
    j["j_m_max"] = dnum(r.j_m_max);
    j["j_p_max"] = dnum(r.j_p_max);
    j["normalizers_refreshed"] = r.normalizers_refreshed;
    j["tau_min"] = dnum(r.tau_min);
    j["mape_percent"] = dnum(r.mape_percent);
    j["recovered"] = r.recovered;
    j["final_exploitation"] = r.final_exploitation;
    return j;
}

IterationRecord record_from_json(const json& j) {
    IterationRecord r;
    r.iteration = j.at("iteration");
    r.dataset_rows = j.at("dataset_rows");
    int fi = 0;
    for (const json& f : j.at("fronts")) r.fronts[static_cast<std::size_t>(fi++)] = front_from_json(f);
    int si = 0;
    for (const json& list : j.at("selected")) {
        for (const json& c : list)
            r.selected[static_cast<std::size_t>(si)].push_back(candidate_from_json(c));
        ++si;
    }
    r.theta = j.at("theta").get<std::vector<double>>();
    r.predicted_kpi = json_double(j.at("predicted_kpi"));
    r.actual_kpi = json_double(j.at("actual_kpi"));
    r.dj_m = json_double(j.at("dj_m"));
    r.dj_p = json_double(j.at("dj_p"));
    r.alpha = json_double(j.at("alpha"));
    r.alpha_used = json_double(j.at("alpha_used"));
    r.j_m_max = json_double(j.at("j_m_max"));
    r.j_p_max = json_double(j.at("j_p_max"));
    r.normalizers_refreshed = j.at("normalizers_refreshed");
    r.tau_min = json_double(j.at("tau_min"));
    r.mape_percent = json_double(j.at("mape_percent"));
    r.recovered = j.at("recovered");
    r.final_exploitation = j.at("final_exploitation");
    return r;
}

}  // namespace

void save_state(const CampaignState& state, const std::string& path) {
    json j;
    j["config"] = config_to_json(state.config);
    j["plant"] = plant_to_json(state.plant);
    j["experiment_thetas"] = state.experiment_thetas;
    json exps = json::array();
    for (const auto& series : state.experiments) {
        json s = json::array();
        for (const Measurement& m : series) s.push_back(measurement_to_json(m));
        exps.push_back(s);
    }
    j["experiments"] = exps;
    json recs = json::array();
    for (const IterationRecord& r : state.records) recs.push_back(record_to_json(r));
    j["records"] = recs;
    j["alpha"] = {{"alpha", state.alpha.alpha},
                  {"last_dj_m", dnum(state.alpha.last_dj_m)},
                  {"last_dj_p", dnum(state.alpha.last_dj_p)},
                  {"j_m_max", dnum(state.alpha.j_m_max)},
                  {"j_p_max", dnum(state.alpha.j_p_max)},
                  {"alpha_threshold", state.alpha.alpha_threshold}};
    json seeds = json::array();
    for (const auto& list : state.carry_seeds) {
        json l = json::array();
        for (const RateCandidate& c : list) l.push_back(candidate_to_json(c));
        seeds.push_back(l);
    }
    j["carry_seeds"] = seeds;
    j["last_candidate_keys"] = state.last_candidate_keys;
    j["validation_thetas"] = state.validation_thetas;
    j["validation_actuals"] = state.validation_actuals;
    j["initial_experiments"] = state.initial_experiments;
    j["pending_final"] = state.pending_final;
    j["stopped"] = state.stopped;
    j["stop_reason"] = state.stop_reason;
    csv::write_file(path, j.dump(1) + "\n");
}

CampaignState load_state(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open state file " + path);
    json j;
    in >> j;
    CampaignState state;
    state.config = config_from_json(j.at("config"));
    state.plant = plant_from_json(j.at("plant"));
    state.experiment_thetas = j.at("experiment_thetas").get<std::vector<std::vector<double>>>();
    for (const json& series : j.at("experiments")) {
        std::vector<Measurement> ms;
        for (const json& m : series) ms.push_back(measurement_from_json(m));
        state.experiments.push_back(std::move(ms));
    }
    for (const json& r : j.at("records")) state.records.push_back(record_from_json(r));
    state.alpha.alpha = j.at("alpha").at("alpha");
    state.alpha.last_dj_m = json_double(j.at("alpha").at("last_dj_m"));
    state.alpha.last_dj_p = json_double(j.at("alpha").at("last_dj_p"));
    state.alpha.j_m_max = json_double(j.at("alpha").at("j_m_max"));
    state.alpha.j_p_max = json_double(j.at("alpha").at("j_p_max"));
    state.alpha.alpha_threshold = j.at("alpha").at("alpha_threshold");
    int si = 0;
    for (const json& list : j.at("carry_seeds")) {
        for (const json& c : list)
            state.carry_seeds[static_cast<std::size_t>(si)].push_back(candidate_from_json(c));
        ++si;
    }
    state.last_candidate_keys = j.at("last_candidate_keys");
    state.validation_thetas = j.at("validation_thetas").get<std::vector<std::vector<double>>>();
    state.validation_actuals = j.at("validation_actuals").get<std::vector<double>>();
    state.initial_experiments = j.at("initial_experiments");
    state.pending_final = j.at("pending_final");
    state.stopped = j.at("stopped");
    state.stop_reason = j.at("stop_reason");
    return state;
}

}  // namespace kinforge
