#include "kinforge/plant.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "kinforge/ode.hpp"

namespace kinforge {

void GroundTruthKinetics::validate() const {
    if (!(k1 > 0 && k2 > 0 && k3 > 0 && big_k2 > 0 && big_k3 > 0))
        throw std::invalid_argument("kinetics: rate and equilibrium constants must be positive");
    if (!(alpha_act > t_phase && t_phase > beta_off))
        throw std::invalid_argument("kinetics: require alpha_act > t_phase > beta_off");
}

void EquipmentConfig::validate() const {
    if (!(mixer_holdup_l > 0 && metzner_otto_ks > 0 && jacket_ua > 0 && jacket_flow_ref > 0 &&
          cp_tank > 0 && cp_loop > 0 && cp_feed > 0))
        throw std::invalid_argument("equipment: all parameters must be positive");
}

std::vector<double> PfdParams::theta() const {
    return {t0_w_c, tau2_min, tau3_min, tau4_min, n2_rpm, n4_rpm};
}

void PfdParams::set_theta(const std::vector<double>& theta) {
    if (theta.size() != 6) throw std::invalid_argument("theta must have 6 components");
    t0_w_c = theta[0];
    tau2_min = theta[1];
    tau3_min = theta[2];
    tau4_min = theta[3];
    n2_rpm = theta[4];
    n4_rpm = theta[5];
}

const std::vector<std::string>& PfdParams::theta_names() {
    static const std::vector<std::string> names{"T0", "tau2", "tau3", "tau4", "N2", "N4"};
    return names;
}

bool DesignBounds::contains(const PfdParams& p, std::string* violation) const {
    const std::vector<double> theta = p.theta();
    for (std::size_t i = 0; i < theta.size(); ++i) {
        if (theta[i] < box.lb[i] - 1e-9 || theta[i] > box.ub[i] + 1e-9) {
            if (violation)
                *violation = PfdParams::theta_names()[i] + "=" + std::to_string(theta[i]) +
                             " outside [" + std::to_string(box.lb[i]) + ", " +
                             std::to_string(box.ub[i]) + "]";
            return false;
        }
    }
    return true;
}

double kpi(const Phases& x, const KpiSpec& spec) {
    double s = 0.0;
    for (int i = 0; i < 5; ++i) s += spec.weights[i] * x[i];
    return s;
}

void PlantConfig::validate() const {
    kinetics.validate();
    equipment.validate();
    bounds.box.validate();
    if (bounds.box.dim() != 6) throw std::invalid_argument("bounds must cover the 6 free parameters");
    if (!(feed_water_conc > 0 && feed_active_conc > 0))
        throw std::invalid_argument("feed concentrations must be positive");
    if (!(rtol > 0 && atol > 0)) throw std::invalid_argument("tolerances must be positive");
    if (!(sample_cadence_min > 0)) throw std::invalid_argument("sample cadence must be positive");
    if (!(nominal.tau1_min >= 1 && nominal.tau2_min >= 1 && nominal.tau3_min >= 1 &&
          nominal.tau4_min >= 1))
        throw std::invalid_argument("step durations must be at least one minute");
    if (!(nominal.v0_w_l > 0 && equipment.mixer_holdup_l < nominal.v0_w_l))
        throw std::invalid_argument("mixer holdup must be small relative to the tank");
}

namespace {

RateTriple rates_gated(const Phases& x, double temp_c, double gamma_dot,
                       const GroundTruthKinetics& kin, bool gate_open) {
    const double xw = x[kPhaseW], xa = x[kPhaseA], xl = x[kPhaseL];
    const double xv = x[kPhaseV], xls = x[kPhaseLs];
    const double gate = gate_open ? 1.0 : 0.0;

    const double r1 = kin.k1 * gamma_dot * (kin.alpha_act - temp_c) * xa * xw * gate;
    const double r2 = kin.k2 * gamma_dot * temp_c * (xl * xw - xls * temp_c / kin.big_k2);
    double r3 = 0.0;
    if (gamma_dot != 0.0 && gate_open) {
        const double denom = kin.big_k3 * gamma_dot * (temp_c - kin.beta_off);
        if (denom == 0.0)
            throw std::domain_error("mechanism 3 backward denominator vanished with the gate open");
        r3 = kin.k3 * gamma_dot * (xl - xv / denom);
    }
    return {r1, r2, r3};
}

}  // namespace

RateTriple ground_truth_rates(const Phases& x, double temp_c, double gamma_dot,
                              const GroundTruthKinetics& kin) {
    return rates_gated(x, temp_c, gamma_dot, kin, temp_c >= kin.t_phase);
}

std::array<double, 5> stoich_rates(const RateTriple& r) {
    const double r1 = r[0], r2 = r[1], r3 = r[2];
    return {-2 * r1, -5 * r1 - 10 * r2, r1 - r2 - 3 * r3, r2, r3};
}

Phases stoich_rates_state_order(const RateTriple& r) {
    return state_from_balance(stoich_rates(r));
}

std::array<double, 5> balance_from_state(const Phases& x) {
    return {x[kPhaseA], x[kPhaseW], x[kPhaseL], x[kPhaseLs], x[kPhaseV]};
}

Phases state_from_balance(const std::array<double, 5>& x) {
    Phases out{};
    out[kPhaseA] = x[0];
    out[kPhaseW] = x[1];
    out[kPhaseL] = x[2];
    out[kPhaseLs] = x[3];
    out[kPhaseV] = x[4];
    return out;
}

namespace {

PlantDeriv derivatives_with(const PlantState& s, const StepControls& c, const EquipmentConfig& eq,
                            const RateFn& rates, bool gate_open) {
    if (!(s.v_m > 0.0)) throw std::runtime_error("tank volume must stay positive");
    PlantDeriv d;
    const double q_t = c.feed_flow_l_min;
    const double q_b = c.bottom_flow_l_min;
    const double q_s = q_b;  // loop draw returns through the in-line mixer
    const double gamma_dot = eq.metzner_otto_ks * c.n_rpm;
    const double cp_m = eq.cp_tank, cp_s = eq.cp_loop, cp_t = eq.cp_feed;

    d.dv_m = q_t;  // Q^i slot is identically zero in this recipe

    const double ua_eff = eq.jacket_ua * (c.jacket_flow_l_min / eq.jacket_flow_ref);
    d.dt_m = (cp_t * q_t * c.feed_temp_c + cp_s * q_s * s.t_s - cp_m * q_b * s.t_m +
              ua_eff * (eq.coolant_supply_c - s.t_m)) /
                 (cp_m * s.v_m) -
             (s.t_m / s.v_m) * d.dv_m;
    d.dt_s = q_s / (cp_s * eq.mixer_holdup_l) * (cp_m * s.t_m - cp_s * s.t_s);

    const RateTriple r = rates(s.x_s, s.t_s, gamma_dot, gate_open);
    const Phases dx_reaction = stoich_rates_state_order(r);
    for (int i = 0; i < 5; ++i) {
        d.dx_m[i] = (q_t / s.v_m) * c.feed_conc[i] + (q_s / s.v_m) * s.x_s[i] -
                    (q_b / s.v_m) * s.x_m[i] - (q_t / s.v_m) * s.x_m[i];
        d.dx_s[i] = q_s / eq.mixer_holdup_l * (s.x_m[i] - s.x_s[i]) + dx_reaction[i];
    }
    return d;
}

}  // namespace

PlantDeriv derivatives(const PlantState& state, const StepControls& controls,
                       const EquipmentConfig& cfg, const GroundTruthKinetics& kin,
                       bool gate_open) {
    return derivatives_with(state, controls, cfg,
                            [&kin](const Phases& x, double t, double g, bool open) {
                                return rates_gated(x, t, g, kin, open);
                            },
                            gate_open);
}

namespace {

void pack(const PlantState& s, std::vector<double>& y) {
    y.resize(13);
    y[0] = s.v_m;
    y[1] = s.t_m;
    y[2] = s.t_s;
    for (int i = 0; i < 5; ++i) {
        y[3 + i] = s.x_m[i];
        y[8 + i] = s.x_s[i];
    }
}

PlantState unpack(const double* y) {
    PlantState s;
    s.v_m = y[0];
    s.t_m = y[1];
    s.t_s = y[2];
    for (int i = 0; i < 5; ++i) {
        s.x_m[i] = y[3 + i];
        s.x_s[i] = y[8 + i];
    }
    return s;
}

}  // namespace

SimOutcome simulate_with_rates(const PfdParams& params, const PlantConfig& cfg,
                               const RateFn& rates) {
    SimOutcome out;
    const EquipmentConfig& eq = cfg.equipment;

    const std::array<double, 4> durations{params.tau1_min, params.tau2_min, params.tau3_min,
                                          params.tau4_min};
    std::array<StepControls, 4> steps{};
    steps[0] = {params.v1_a_l / params.tau1_min,
                Phases{0, cfg.feed_active_conc, 0, 0, 0},
                params.t1_a_c,
                params.bottom_flow_l_min[0],
                params.n1_rpm,
                params.jacket_flow_l_min[0]};
    steps[1] = {0.0, Phases{}, 0.0, params.bottom_flow_l_min[1], params.n2_rpm,
                params.jacket_flow_l_min[1]};
    steps[2] = {params.v3_w_l / params.tau3_min,
                Phases{cfg.feed_water_conc, 0, 0, 0, 0},
                params.t3_w_c,
                params.bottom_flow_l_min[2],
                params.n3_rpm,
                params.jacket_flow_l_min[2]};
    steps[3] = {0.0, Phases{}, 0.0, params.bottom_flow_l_min[3], params.n4_rpm,
                params.jacket_flow_l_min[3]};

    PlantState init;
    init.v_m = params.v0_w_l;
    init.t_m = params.t0_w_c;
    init.t_s = params.t0_w_c;
    init.x_m[kPhaseW] = cfg.feed_water_conc;
    init.x_s = init.x_m;

    std::vector<double> y;
    pack(init, y);

    Trajectory& traj = out.trajectory;
    traj.total_time_min = params.total_time_min();
    traj.kpi_profile.emplace_back(0.0, kpi(init.x_m, cfg.kpi));
    traj.states.emplace_back(0.0, init);

    OdeOptions opt;
    opt.rtol = cfg.rtol;
    opt.atol = cfg.atol;
    opt.h_max = 1.0;

    double t = 0.0;
    bool gate_open = init.t_s >= cfg.kinetics.t_phase;
    bool failed = false;

    for (int step = 0; step < 4 && !failed; ++step) {
        const double t_end = t + durations[static_cast<std::size_t>(step)];
        const StepControls& ctrl = steps[static_cast<std::size_t>(step)];

        auto rhs = [&](double /*tt*/, const double* yy, double* dydt) {
            const PlantDeriv d = derivatives_with(unpack(yy), ctrl, eq, rates, gate_open);
            dydt[0] = d.dv_m;
            dydt[1] = d.dt_m;
            dydt[2] = d.dt_s;
            for (int i = 0; i < 5; ++i) {
                dydt[3 + i] = d.dx_m[i];
                dydt[8 + i] = d.dx_s[i];
            }
        };
        auto event = [&](double /*tt*/, const std::vector<double>& yy) {
            return yy[2] - cfg.kinetics.t_phase;
        };
        auto on_sample = [&](double ts, const std::vector<double>& yy) {
            const PlantState s = unpack(yy.data());
            Measurement m;
            m.t_min = ts;
            m.x_r = s.x_m;
            m.x_s = s.x_s;
            m.t_s_c = s.t_s;
            m.n_rpm = ctrl.n_rpm;
            m.q_s_l_min = ctrl.bottom_flow_l_min;
            m.v_s_l = eq.mixer_holdup_l;
            traj.measurements.push_back(m);
            traj.kpi_profile.emplace_back(ts, kpi(s.x_m, cfg.kpi));
            traj.states.emplace_back(ts, s);
        };

        // Cadence samples in (t, t_end]; boundary samples carry the controls
        // of the step that just ended.
        const double cadence = cfg.sample_cadence_min;
        std::vector<double> stops;
        for (double m = (std::floor(t / cadence + 1e-9) + 1.0) * cadence; m <= t_end + 1e-9;
             m += cadence)
            if (m > t + 1e-9) stops.push_back(std::min(m, t_end));

        double seg_t = t;
        while (seg_t < t_end - 1e-9) {
            std::vector<double> seg_stops;
            for (double sstop : stops)
                if (sstop > seg_t + 1e-12) seg_stops.push_back(sstop);
            IntegrateResult res;
            try {
                res = integrate_dopri5(rhs, seg_t, t_end, y, opt, seg_stops, on_sample, event,
                                       gate_open);
            } catch (const std::exception& e) {
                out.error = e.what();
                out.fail_time = seg_t;
                failed = true;
                break;
            }
            if (res.reason == StopReason::Failed) {
                out.error = res.error;
                out.fail_time = res.t;
                failed = true;
                break;
            }
            // State sanity between spans: clamp integrator-noise negatives.
            bool finite = true;
            for (double& v : y) {
                if (!std::isfinite(v)) finite = false;
            }
            for (int i = 3; i < 13; ++i)
                if (y[static_cast<std::size_t>(i)] < 0.0 && y[static_cast<std::size_t>(i)] > -1e-9)
                    y[static_cast<std::size_t>(i)] = 0.0;
            if (!finite) {
                out.error = "non-finite state during integration";
                out.fail_time = res.t;
                failed = true;
                break;
            }
            if (res.reason == StopReason::Event) {
                gate_open = !gate_open;
                traj.gate_crossings.push_back(res.t);
            }
            seg_t = res.t;
        }
        t = t_end;
    }

    if (failed) return out;

    const PlantState final_state = unpack(y.data());
    traj.final_kpi = kpi(final_state.x_m, cfg.kpi);
    if (!std::isfinite(traj.final_kpi)) {
        out.error = "non-finite final KPI";
        out.fail_time = t;
        return out;
    }
    out.ok = true;
    return out;
}

Trajectory simulate(const PfdParams& params, const PlantConfig& cfg, std::uint64_t /*seed*/) {
    std::string violation;
    if (!cfg.bounds.contains(params, &violation))
        throw std::invalid_argument("design out of bounds: " + violation);
    const GroundTruthKinetics& kin = cfg.kinetics;
    SimOutcome out = simulate_with_rates(
        params, cfg,
        [&kin](const Phases& x, double temp, double gdot, bool open) {
            return rates_gated(x, temp, gdot, kin, open);
        });
    if (!out.ok)
        throw std::runtime_error("simulation failed at t=" + std::to_string(out.fail_time) + ": " +
                                 out.error);
    return std::move(out.trajectory);
}

}  // namespace kinforge
