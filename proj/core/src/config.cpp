#include "kinforge/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "kinforge/expr.hpp"  // format_double

namespace kinforge {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t");
    std::size_t b = s.find_last_not_of(" \t");
    if (a == std::string::npos) return "";
    return s.substr(a, b - a + 1);
}

struct Binding {
    std::function<std::string()> get;
    std::function<void(const std::string&)> set;
    std::string doc;
};

double parse_number(const std::string& key, const std::string& value) {
    if (value == "inf") return std::numeric_limits<double>::infinity();
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc{} || ptr != value.data() + value.size())
        throw ConfigError("config key '" + key + "': malformed number '" + value + "'");
    return v;
}

/// Declarative key table over an AppConfig. One place defines the schema,
/// the parser, and the default-file printer.
class Schema {
public:
    explicit Schema(AppConfig& cfg) : cfg_(cfg) { build(); }

    void apply(const std::string& key, const std::string& value) {
        auto it = table_.find(key);
        if (it == table_.end()) throw ConfigError("unknown config key '" + key + "'");
        it->second.set(value);
    }

    std::string print() const {
        std::ostringstream out;
        out << "# kinforge configuration (key = value, '#' starts a comment)\n";
        std::string section;
        for (const auto& [key, binding] : table_) {
            const std::string sec = key.substr(0, key.find('.'));
            if (sec != section) {
                out << "\n# --- " << sec << " ---\n";
                section = sec;
            }
            if (!binding.doc.empty()) out << "# " << binding.doc << "\n";
            out << key << " = " << binding.get() << "\n";
        }
        return out.str();
    }

private:
    void num(const std::string& key, double& field, const std::string& doc) {
        table_[key] = {[&field] { return format_double(field); },
                       [&field, key](const std::string& v) { field = parse_number(key, v); }, doc};
    }
    void integer(const std::string& key, int& field, const std::string& doc) {
        table_[key] = {[&field] { return std::to_string(field); },
                       [&field, key](const std::string& v) {
                           field = static_cast<int>(parse_number(key, v));
                       },
                       doc};
    }
    void seed(const std::string& key, std::uint64_t& field, const std::string& doc) {
        table_[key] = {[&field] { return std::to_string(field); },
                       [&field, key](const std::string& v) {
                           field = static_cast<std::uint64_t>(parse_number(key, v));
                       },
                       doc};
    }
    void boolean(const std::string& key, bool& field, const std::string& doc) {
        table_[key] = {[&field] { return field ? std::string("true") : std::string("false"); },
                       [&field, key](const std::string& v) {
                           if (v == "true" || v == "1")
                               field = true;
                           else if (v == "false" || v == "0")
                               field = false;
                           else
                               throw ConfigError("config key '" + key + "': expected true/false");
                       },
                       doc};
    }

    void build() {
        PlantConfig& p = cfg_.plant;
        num("plant.k1", p.kinetics.k1, "rate constant of mechanism 1 (2A + 5W -> L)");
        num("plant.k2", p.kinetics.k2, "rate constant of mechanism 2 (L + 10W <-> Ls)");
        num("plant.k3", p.kinetics.k3, "rate constant of mechanism 3 (3L <-> V)");
        num("plant.K2", p.kinetics.big_k2, "equilibrium constant of mechanism 2");
        num("plant.K3", p.kinetics.big_k3, "equilibrium constant of mechanism 3");
        num("plant.alpha_act_c", p.kinetics.alpha_act, "activation temperature offset (degC)");
        num("plant.beta_off_c", p.kinetics.beta_off, "mechanism-3 temperature offset (degC)");
        num("plant.t_phase_c", p.kinetics.t_phase, "phase transition temperature T_K (degC)");
        num("plant.feed_water_conc", p.feed_water_conc, "water concentration of water streams");
        num("plant.feed_active_conc", p.feed_active_conc, "active concentration of the A stream");
        num("plant.rtol", p.rtol, "integrator relative tolerance");
        num("plant.atol", p.atol, "integrator absolute tolerance");
        num("plant.sample_cadence_min", p.sample_cadence_min, "measurement cadence (minutes)");

        EquipmentConfig& e = p.equipment;
        num("equipment.mixer_holdup_l", e.mixer_holdup_l, "in-line mixer holdup V_s (L)");
        num("equipment.metzner_otto_ks", e.metzner_otto_ks, "shear rate = K_S * N");
        num("equipment.jacket_ua", e.jacket_ua, "jacket UA at reference flow (kW/degC)");
        num("equipment.coolant_supply_c", e.coolant_supply_c, "jacket coolant supply (degC)");
        num("equipment.jacket_flow_ref", e.jacket_flow_ref, "jacket flow for full effectiveness");
        num("equipment.cp_tank", e.cp_tank, "tank heat capacity (kJ/(L*degC))");
        num("equipment.cp_loop", e.cp_loop, "loop heat capacity (kJ/(L*degC))");
        num("equipment.cp_feed", e.cp_feed, "feed heat capacity (kJ/(L*degC))");

        PfdParams& n = p.nominal;
        num("recipe.t0_w_c", n.t0_w_c, "nominal initial water temperature (free parameter)");
        num("recipe.tau1_min", n.tau1_min, "step 1 duration (fixed)");
        num("recipe.tau2_min", n.tau2_min, "nominal step 2 duration (free parameter)");
        num("recipe.tau3_min", n.tau3_min, "nominal step 3 duration (free parameter)");
        num("recipe.tau4_min", n.tau4_min, "nominal step 4 duration (free parameter)");
        num("recipe.n1_rpm", n.n1_rpm, "mixer speed during injection (fixed)");
        num("recipe.n2_rpm", n.n2_rpm, "nominal step 2 mixer speed (free parameter)");
        num("recipe.n3_rpm", n.n3_rpm, "mixer speed during quench (fixed)");
        num("recipe.n4_rpm", n.n4_rpm, "nominal step 4 mixer speed (free parameter)");
        num("recipe.v0_w_l", n.v0_w_l, "initial water charge (L)");
        num("recipe.v1_a_l", n.v1_a_l, "active ingredient volume, step 1 (L)");
        num("recipe.v3_w_l", n.v3_w_l, "quench water volume, step 3 (L)");
        num("recipe.t1_a_c", n.t1_a_c, "active ingredient temperature (degC)");
        num("recipe.t3_w_c", n.t3_w_c, "quench water temperature (degC)");
        for (int i = 0; i < 4; ++i) {
            num("recipe.qb" + std::to_string(i + 1), n.bottom_flow_l_min[static_cast<std::size_t>(i)],
                i == 0 ? "bottom/loop flowrate per step (L/min)" : "");
            num("recipe.qj" + std::to_string(i + 1), n.jacket_flow_l_min[static_cast<std::size_t>(i)],
                i == 0 ? "jacket flowrate per step (L/min)" : "");
        }

        Bounds& b = p.bounds.box;
        static const char* names[6] = {"t0", "tau2", "tau3", "tau4", "n2", "n4"};
        for (int i = 0; i < 6; ++i) {
            num(std::string("bounds.") + names[i] + "_lb", b.lb[static_cast<std::size_t>(i)], "");
            num(std::string("bounds.") + names[i] + "_ub", b.ub[static_cast<std::size_t>(i)], "");
        }

        static const char* phases[5] = {"w", "a", "l", "v", "ls"};
        for (int i = 0; i < 5; ++i)
            num(std::string("kpi.w_") + phases[i], p.kpi.weights[static_cast<std::size_t>(i)],
                i == 0 ? "linear KPI readout weights over (W, A, L, V, Ls)" : "");

        CampaignConfig& c = cfg_.campaign;
        table_["campaign.sr_mode"] = {
            [&c] { return c.sr_mode == SrMode::CarryOver ? "carry_over" : "from_scratch"; },
            [&c](const std::string& v) {
                if (v == "carry_over")
                    c.sr_mode = SrMode::CarryOver;
                else if (v == "from_scratch")
                    c.sr_mode = SrMode::FromScratch;
                else
                    throw ConfigError("campaign.sr_mode: carry_over|from_scratch");
            },
            "carry over prior candidates or rebuild from scratch"};
        boolean("campaign.template_enabled", c.template_enabled,
                "constrain the search to k*(f - b/K)");
        table_["campaign.objective"] = {
            [&c] {
                return c.objective == CampaignObjective::DiscoveryOnly ? "discovery"
                                                                       : "multiobjective";
            },
            [&c](const std::string& v) {
                if (v == "discovery")
                    c.objective = CampaignObjective::DiscoveryOnly;
                else if (v == "multiobjective")
                    c.objective = CampaignObjective::MultiObjective;
                else
                    throw ConfigError("campaign.objective: discovery|multiobjective");
            },
            "knowledge discovery only, or balanced with process optimisation"};
        integer("campaign.max_iterations", c.max_iterations, "design-loop iteration cap");
        num("campaign.alpha_threshold", c.alpha_threshold, "stop once alpha falls below this");
        num("campaign.scratch_budget_factor", c.scratch_budget_factor,
            "search-budget multiplier for from-scratch mode");
        integer("campaign.validation_points", c.validation_points, "held-out recipes for MAPE");
        seed("campaign.master_seed", c.master_seed, "campaign master seed");
        seed("campaign.validation_seed", c.validation_seed, "independent validation-draw seed");
        integer("campaign.top_k", c.top_k, "candidates kept per rate equation");
        integer("campaign.workers", c.workers, "worker threads");
        table_["campaign.gate_mode"] = {
            [&c] { return c.gate_mode == GateMode::GateAware ? "gate-aware" : "raw"; },
            [&c](const std::string& v) {
                if (v == "gate-aware")
                    c.gate_mode = GateMode::GateAware;
                else if (v == "raw")
                    c.gate_mode = GateMode::Raw;
                else
                    throw ConfigError("campaign.gate_mode: gate-aware|raw");
            },
            "apply the known T_K switch outside the learned expressions"};
        num("campaign.noise_level", c.noise.rel_level, "relative measurement noise (0 = clean)");
        seed("campaign.noise_seed", c.noise.seed, "measurement noise seed");

        num("goal.psi_target", c.goal.psi_target, "target final KPI");
        num("goal.kappa", c.goal.kappa, "relative KPI tolerance");
        boolean("goal.include_batch_time", c.goal.include_batch_time,
                "add total batch time to the process objective");
        num("goal.epsilon_weight", c.goal.epsilon_weight,
            "minutes per squared-KPI penalty unit in the process objective");

        integer("design.global_samples", c.design_budget.global_samples,
                "Latin-hypercube + adaptive samples");
        integer("design.local_evals", c.design_budget.local_evals, "simplex refinement budget");
        seed("design.seed", c.design_budget.seed, "design optimizer seed");

        FitConfig& s = c.sr;
        integer("sr.max_complexity", s.max_complexity, "node-count cap per expression");
        integer("sr.population_count", s.population_count, "independent populations");
        integer("sr.population_size", s.population_size, "individuals per population");
        integer("sr.max_iterations", s.max_iterations, "tournament batches (carry-over budget)");
        integer("sr.convergence_window", s.convergence_window, "early-stop window (batches)");
        num("sr.convergence_rel_tol", s.convergence_rel_tol, "early-stop relative improvement");
        integer("sr.tournament_size", s.tournament_size, "tournament subset size");
        num("sr.selection_p", s.selection_p, "geometric selection sharpness, (0.5, 1]");
        num("sr.parsimony_base_frac", s.parsimony_base_frac,
            "base parsimony as a fraction of target variance");
        num("sr.parsimony_adapt_rate", s.parsimony_adapt_rate, "complexity-frequency EMA rate");
        num("sr.wall_clock_seconds", s.wall_clock_seconds,
            "wall-clock cap per evolve ('inf' keeps runs deterministic)");
        integer("sr.simplify_every", s.simplify_every, "simplification cadence (batches)");
        integer("sr.optimize_every", s.optimize_every, "constant-refinement cadence (batches)");
        integer("sr.migrate_every", s.migrate_every, "hall-of-fame migration cadence (batches)");
        integer("sr.optimize_iterations", s.optimize_iterations, "damped least-squares iterations");
        num("sr.seed_fraction", s.seed_fraction, "carry-over share of each population");
        integer("sr.mutation_retry_cap", s.mutation_retry_cap,
                "template rejection retries before keeping the parent");
        for (int i = 0; i < 3; ++i)
            num("sr.lambda_" + std::to_string(i + 1), s.lambda_diag[static_cast<std::size_t>(i)],
                i == 0 ? "diagonal loss weights per rate equation" : "");
        num("sr.mw_perturb_constant", s.mutation.perturb_constant, "mutation-kind weights");
        num("sr.mw_replace_operator", s.mutation.replace_operator, "");
        num("sr.mw_replace_subtree", s.mutation.replace_subtree, "");
        num("sr.mw_insert_node", s.mutation.insert_node, "");
        num("sr.mw_delete_node", s.mutation.delete_node, "");
        num("sr.mw_crossover", s.mutation.crossover, "");
        num("sr.mw_none", s.mutation.none, "");
    }

    AppConfig& cfg_;
    std::map<std::string, Binding> table_;
};

}  // namespace

AppConfig parse_config_text(const std::string& text) {
    AppConfig cfg;
    Schema schema(cfg);
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            schema.apply(key, value);
        } catch (const ConfigError& e) {
            throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    cfg.validate();
    return cfg;
}

AppConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

std::string default_config_text() {
    AppConfig cfg;
    Schema schema(cfg);
    return schema.print();
}

}  // namespace kinforge
