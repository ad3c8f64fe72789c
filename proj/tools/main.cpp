#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <json.hpp>

#include "kinforge/campaign.hpp"
#include "kinforge/config.hpp"
#include "kinforge/csv.hpp"
#include "kinforge/version.hpp"

namespace fs = std::filesystem;
using namespace kinforge;

namespace {

struct GlobalOpts {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int workers = 1;
    bool overwrite = false;
};

AppConfig resolve_config(const GlobalOpts& g) {
    AppConfig cfg = g.config_path.empty() ? AppConfig{} : load_config_file(g.config_path);
    if (g.seed_set) cfg.campaign.master_seed = g.seed;
    cfg.campaign.workers = g.workers;
    cfg.campaign.sr.workers = g.workers;
    cfg.validate();
    return cfg;
}

void prepare_out_dir(const GlobalOpts& g) {
    if (g.out_dir.empty()) throw ConfigError("--out is required");
    const fs::path dir(g.out_dir);
    if (fs::exists(dir)) {
        if (!fs::is_directory(dir)) throw ConfigError(g.out_dir + " exists and is not a directory");
        if (!fs::is_empty(dir) && !g.overwrite)
            throw ConfigError(g.out_dir + " is not empty (pass --overwrite to reuse it)");
    } else {
        fs::create_directories(dir);
    }
}

std::string out_path(const GlobalOpts& g, const std::string& name) {
    return (fs::path(g.out_dir) / name).string();
}

void write_kpi_profile(const Trajectory& traj, const std::string& path) {
    std::string out = "t,psi\n";
    for (const auto& [t, psi] : traj.kpi_profile)
        out += csv::join({format_double(t), format_double(psi)});
    csv::write_file(path, out);
}

int cmd_simulate(const GlobalOpts& g, const std::vector<double>& theta, bool corners) {
    const AppConfig cfg = resolve_config(g);
    prepare_out_dir(g);
    if (corners) {
        const auto designs = initial_design(cfg.plant.bounds.box);
        for (std::size_t i = 0; i < designs.size(); ++i) {
            PfdParams params = cfg.plant.nominal;
            params.set_theta(designs[i]);
            const Trajectory traj = simulate(params, cfg.plant, cfg.campaign.master_seed);
            const std::string tag = std::to_string(i + 1);
            save_measurements_csv(traj.measurements, traj.kpi_profile,
                                  out_path(g, "measurements_" + tag + ".csv"));
            write_kpi_profile(traj, out_path(g, "kpi_profile_" + tag + ".csv"));
        }
        std::cout << "wrote " << designs.size() << " corner experiments to " << g.out_dir << "\n";
        return 0;
    }
    PfdParams params = cfg.plant.nominal;
    if (!theta.empty()) params.set_theta(theta);
    const Trajectory traj = simulate(params, cfg.plant, cfg.campaign.master_seed);
    save_measurements_csv(traj.measurements, traj.kpi_profile, out_path(g, "measurements.csv"));
    write_kpi_profile(traj, out_path(g, "kpi_profile.csv"));
    std::cout << "final KPI " << format_double(traj.final_kpi) << " after "
              << format_double(traj.total_time_min) << " min\n";
    return 0;
}

std::string front_table_text(const ParetoFront& front) {
    std::string out;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-10s %-12s %-10s %s\n", "Complexity", "MSE", "Score",
                  "Equation");
    out += buf;
    for (const ParetoEntry& e : front.entries) {
        std::snprintf(buf, sizeof buf, "%-10d %-12.3g %-10.4g %s\n", e.complexity, e.loss, e.score,
                      serialize(e.expr).c_str());
        out += buf;
    }
    return out;
}

void write_front_files(const GlobalOpts& g, const std::array<ParetoFront, 3>& fronts) {
    std::string table;
    for (int r = 0; r < 3; ++r) {
        const ParetoFront& front = fronts[static_cast<std::size_t>(r)];
        std::string csv_text = "complexity,loss,score,expression\n";
        for (const ParetoEntry& e : front.entries)
            csv_text += csv::join({std::to_string(e.complexity), format_double(e.loss),
                                   format_double(e.score), serialize(e.expr)});
        csv::write_file(out_path(g, "front_r" + std::to_string(r + 1) + ".csv"), csv_text);
        table += "r" + std::to_string(r + 1) + ":\n" + front_table_text(front) + "\n";
    }
    csv::write_file(out_path(g, "fronts.txt"), table);
}

int cmd_discover(const GlobalOpts& g, const std::string& state_path,
                 const std::vector<std::string>& measurement_csvs) {
    AppConfig cfg = resolve_config(g);
    prepare_out_dir(g);

    std::vector<std::vector<Measurement>> experiments;
    PlantConfig plant = cfg.plant;
    CampaignConfig camp = cfg.campaign;
    if (!state_path.empty()) {
        const CampaignState state = load_state(state_path);
        experiments = state.experiments;
        plant = state.plant;
        camp = state.config;
        camp.workers = g.workers;
    } else if (!measurement_csvs.empty()) {
        experiments = load_measurement_csvs(measurement_csvs);
        for (auto& series : experiments)
            for (Measurement& m : series) m.v_s_l = plant.equipment.mixer_holdup_l;
    } else {
        throw ConfigError("discover needs --state or --measurements");
    }

    AssembleOptions opts;
    opts.noise = camp.noise;
    opts.gate_mode = camp.gate_mode;
    opts.gate_temp_c = plant.kinetics.t_phase;
    opts.metzner_otto_ks = plant.equipment.metzner_otto_ks;
    const AssembledData data = assemble(experiments, opts);
    save_samples_csv(data, out_path(g, "samples.csv"), out_path(g, "samples_scales.json"));

    std::array<ParetoFront, 3> fronts;
    const Rng master(camp.master_seed);
    for (int r = 0; r < 3; ++r) {
        FitConfig fit = camp.sr;
        fit.template_spec =
            camp.template_enabled ? TemplateSpec::rate_law() : TemplateSpec::disabled();
        fit.workers = g.workers;
        fit.seed = master.child(0xD15C + static_cast<std::uint64_t>(r)).seed();
        fronts[static_cast<std::size_t>(r)] =
            evolve(data.per_rate[static_cast<std::size_t>(r)], fit);
        std::cout << "r" << r + 1 << ": front of "
                  << fronts[static_cast<std::size_t>(r)].entries.size() << " entries, best loss "
                  << format_double(fronts[static_cast<std::size_t>(r)].entries.back().loss) << "\n";
    }
    write_front_files(g, fronts);
    return 0;
}

int cmd_design(const GlobalOpts& g, const std::string& state_path, double alpha_override,
               bool alpha_set, const std::string& grid_dims, int grid_res) {
    prepare_out_dir(g);
    CampaignState state = load_state(state_path);
    state.config.workers = g.workers;
    if (state.iterations_run() < 1) throw ConfigError("state has no fitted models yet");
    const int last = state.iterations_run();
    const AssembledData data = assemble_for_record(state, last);
    const ModelEnsemble ensemble =
        ensemble_from_record(state.records[static_cast<std::size_t>(last)], data);

    const double alpha = alpha_set ? alpha_override : state.alpha.alpha;
    Normalizers norms{state.alpha.j_m_max, state.alpha.j_p_max};
    if (!std::isfinite(norms.j_m_max) || !std::isfinite(norms.j_p_max)) {
        OptimBudget budget = state.config.design_budget;
        budget.seed = Rng(state.config.master_seed).child(0xA0FF).seed();
        norms = compute_normalizers(state.plant, ensemble, state.config.goal, budget,
                                    state.config.workers);
    }

    const ObjectiveFn objective = make_combined_objective(state.plant, ensemble, state.config.goal,
                                                          alpha, norms, state.config.workers);
    const Rng design_rng = Rng(state.config.master_seed).child(0xDE5F);
    const DesignResult result =
        design_experiment(objective, state.plant.bounds.box, state.config.design_budget, design_rng);

    PfdParams params = state.plant.nominal;
    params.set_theta(result.theta);
    const InfoResult info = info_objective(params, state.plant, ensemble, state.config.workers);
    const ProcessResult proc =
        process_objective(params, state.plant, ensemble.point_rates(), state.config.goal);

    nlohmann::json report;
    for (std::size_t i = 0; i < result.theta.size(); ++i)
        report["theta"][PfdParams::theta_names()[i]] = result.theta[i];
    report["J"] = result.value;
    report["J_M"] = info.j_m;
    report["J_P"] = proc.j_p;
    report["tau_min"] = proc.tau_min;
    report["epsilon"] = proc.epsilon;
    report["normalizers"] = {{"J_M_max", norms.j_m_max}, {"J_P_max", norms.j_p_max}};
    report["alpha"] = alpha;
    report["member_psi_hats"] = info.psi_hats;
    report["infeasible_members"] = info.infeasible;
    csv::write_file(out_path(g, "design_report.json"), report.dump(2) + "\n");

    if (!grid_dims.empty()) {
        const auto comma = grid_dims.find(',');
        if (comma == std::string::npos)
            throw ConfigError("--grid-dims expects two names, e.g. tau2,tau3");
        const std::string a = grid_dims.substr(0, comma);
        const std::string b = grid_dims.substr(comma + 1);
        const auto& names = PfdParams::theta_names();
        int dim_a = -1, dim_b = -1;
        for (int i = 0; i < static_cast<int>(names.size()); ++i) {
            if (names[static_cast<std::size_t>(i)] == a) dim_a = i;
            if (names[static_cast<std::size_t>(i)] == b) dim_b = i;
        }
        if (dim_a < 0 || dim_b < 0) throw ConfigError("--grid-dims names must be theta components");
        std::string grid_csv = a + "," + b + ",J\n";
        for (const GridPoint& p :
             objective_grid(objective, state.plant.bounds.box, dim_a, dim_b, grid_res, result.theta))
            grid_csv += csv::join({format_double(p.x), format_double(p.y), format_double(p.value)});
        csv::write_file(out_path(g, "j_grid_" + a + "_" + b + ".csv"), grid_csv);
    }
    std::cout << "designed experiment written to " << out_path(g, "design_report.json") << "\n";
    return 0;
}

int cmd_campaign(const GlobalOpts& g, const std::string& mode, bool resume, int max_iter_override) {
    AppConfig cfg = resolve_config(g);
    const std::string state_path = out_path(g, "state.json");

    const IterationCallback persist = [&](const CampaignState& s) {
        save_state(s, state_path);
        csv::write_file(out_path(g, "metrics.csv"), metrics_csv(s));
        csv::write_file(out_path(g, "fronts.csv"), fronts_csv(s));
    };

    if (resume) {
        if (!fs::exists(state_path)) throw ConfigError("--resume: no state at " + state_path);
        CampaignState state = load_state(state_path);
        if (max_iter_override >= 0) {
            state.config.max_iterations = max_iter_override;
            state.stopped = false;
        }
        continue_campaign(state, persist);
        persist(state);
        std::cout << "campaign finished: " << state.stop_reason << "\n";
        return 0;
    }

    prepare_out_dir(g);
    if (!mode.empty()) cfg.campaign.apply_mode(mode);
    if (max_iter_override >= 0) cfg.campaign.max_iterations = max_iter_override;
    CampaignState state = run_campaign(cfg.campaign, cfg.plant, persist);
    persist(state);
    std::cout << "campaign finished: " << state.stop_reason << "\n";
    if (!state.records.empty() && state.iterations_run() > 0)
        std::cout << "final MAPE " << format_double(state.records.back().mape_percent) << "%\n";
    return 0;
}

int cmd_validate(const GlobalOpts& g, const std::string& state_path) {
    prepare_out_dir(g);
    CampaignState state = load_state(state_path);
    state.config.workers = g.workers;
    if (state.iterations_run() < 1) throw ConfigError("state has no fitted models yet");
    const int last = state.iterations_run();
    const AssembledData data = assemble_for_record(state, last);
    const ModelEnsemble ensemble =
        ensemble_from_record(state.records[static_cast<std::size_t>(last)], data);
    const RateFn point = ensemble.point_rates();

    const double mape = validate_mape(state, point);
    std::string out;
    for (const std::string& name : PfdParams::theta_names()) out += name + ",";
    out += "psi_actual,psi_predicted\n";
    for (std::size_t i = 0; i < state.validation_thetas.size(); ++i) {
        std::vector<std::string> cells;
        for (double v : state.validation_thetas[i]) cells.push_back(format_double(v));
        PfdParams params = state.plant.nominal;
        params.set_theta(state.validation_thetas[i]);
        const KpiPrediction pred = predict_kpi(params, state.plant, point);
        cells.push_back(format_double(state.validation_actuals[i]));
        cells.push_back(format_double(pred.ok ? pred.final_kpi : 0.0));
        out += csv::join(cells);
    }
    csv::write_file(out_path(g, "validation.csv"), out);
    std::cout << "MAPE " << format_double(mape) << "%\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"kinforge: kinetic rate-law discovery with model-based experiment design"};
    app.set_version_flag("--version", kVersion);

    GlobalOpts g;
    bool print_default_config = false;
    app.add_flag("--print-default-config", print_default_config,
                 "print the canonical configuration file and exit");
    app.add_option("--config", g.config_path, "configuration file (key = value)");
    app.add_option("--out", g.out_dir, "output directory");
    app.add_option("--seed", g.seed, "master seed")->each([&](const std::string&) {
        g.seed_set = true;
    });
    app.add_option("--workers", g.workers, "worker threads")->check(CLI::PositiveNumber);
    app.add_flag("--overwrite", g.overwrite, "allow writing into a non-empty output directory");

    auto* sim = app.add_subcommand("simulate", "run the in-silico plant and dump trajectories");
    std::vector<double> theta;
    bool corners = false;
    sim->add_option("--theta", theta, "T0,tau2,tau3,tau4,N2,N4 (defaults to the nominal recipe)")
        ->delimiter(',');
    sim->add_flag("--corners", corners, "run the four-corner initial design instead");

    auto* disc = app.add_subcommand("discover", "fit rate-law candidates to measurements");
    std::string state_path;
    std::vector<std::string> measurement_csvs;
    disc->add_option("--state", state_path, "campaign state file");
    disc->add_option("--measurements", measurement_csvs, "measurement CSV per experiment")
        ->delimiter(',');

    auto* des = app.add_subcommand("design", "design the next experiment from a campaign state");
    std::string design_state;
    double alpha_override = 0.5;
    bool alpha_set = false;
    std::string grid_dims;
    int grid_res = 21;
    des->add_option("--state", design_state, "campaign state file")->required();
    des->add_option("--alpha", alpha_override, "override the exploration weight")
        ->each([&](const std::string&) { alpha_set = true; });
    des->add_option("--grid-dims", grid_dims, "emit a J slice over two theta components, e.g. tau2,tau3");
    des->add_option("--grid-res", grid_res, "grid resolution per axis")->check(CLI::Range(2, 501));

    auto* camp = app.add_subcommand("campaign", "run the closed discovery/design loop");
    std::string mode;
    bool resume = false;
    int max_iter_override = -1;
    camp->add_option("--mode", mode, "case preset: 1a|1b|1c|2");
    camp->add_flag("--resume", resume, "continue from state.json in the output directory");
    camp->add_option("--iterations", max_iter_override, "override the iteration cap");

    auto* val = app.add_subcommand("validate", "held-out MAPE of the selected models");
    std::string validate_state;
    val->add_option("--state", validate_state, "campaign state file")->required();

    app.require_subcommand(0, 1);

    try {
        app.parse(argc, argv);
        if (print_default_config) {
            std::cout << default_config_text();
            return 0;
        }
        if (sim->parsed()) return cmd_simulate(g, theta, corners);
        if (disc->parsed()) return cmd_discover(g, state_path, measurement_csvs);
        if (des->parsed()) return cmd_design(g, design_state, alpha_override, alpha_set, grid_dims, grid_res);
        if (camp->parsed()) return cmd_campaign(g, mode, resume, max_iter_override);
        if (val->parsed()) return cmd_validate(g, validate_state);
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
