#ifndef KINFORGE_PLANT_HPP
#define KINFORGE_PLANT_HPP

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "kinforge/optimize.hpp"

namespace kinforge {

/// Phase concentration vectors are ordered (W, A, L, V, Ls) to match the
/// measured feature layout. The stoichiometric helpers below additionally
/// work in the balance ordering (A, W, L, Ls, V) used by the inversion.
inline constexpr int kPhaseW = 0;
inline constexpr int kPhaseA = 1;
inline constexpr int kPhaseL = 2;
inline constexpr int kPhaseV = 3;
inline constexpr int kPhaseLs = 4;

using Phases = std::array<double, 5>;
using RateTriple = std::array<double, 3>;

/// Synthetic intrinsic kinetics. Rates are per minute in mixer units; all
/// three mechanisms carry the shear rate as a factor, and mechanisms 1 and 3
/// switch off below the phase-transition temperature.
struct GroundTruthKinetics {
    double k1 = 1.8e-6;
    double k2 = 4.4e-5;
    double k3 = 1.0e-3;
    double big_k2 = 20.0;       // equilibrium constant of mechanism 2
    double big_k3 = 4.0e-6;     // equilibrium constant of mechanism 3
    double alpha_act = 150.0;   // activation temperature offset (deg C)
    double beta_off = 20.0;     // temperature offset in mechanism 3 (deg C)
    double t_phase = 45.0;      // phase-transition temperature T_K (deg C)

    void validate() const;
};

struct EquipmentConfig {
    double mixer_holdup_l = 0.5;       // V^s
    double metzner_otto_ks = 11.5;     // gamma_dot = K_S * N
    double jacket_ua = 560.0;          // kW/degC at reference jacket flow
    double coolant_supply_c = 35.0;
    double jacket_flow_ref = 50.0;     // L/min giving full jacket effectiveness
    double cp_tank = 4.0;              // kJ/(L*degC)
    double cp_loop = 4.0;
    double cp_feed = 4.0;

    void validate() const;
};

/// The experiment design vector: free processing parameters with bounds.
/// Order in vector form is (T0_W, tau2, tau3, tau4, N2, N4).
struct PfdParams {
    // free parameters theta
    double t0_w_c = 75.0;
    double tau2_min = 35.0;
    double tau3_min = 20.0;
    double tau4_min = 25.0;
    double n2_rpm = 275.0;
    double n4_rpm = 275.0;

    // fixed nominal parameters
    double tau1_min = 20.0;
    double v0_w_l = 65.0;
    double v1_a_l = 25.0;
    double v3_w_l = 10.0;
    double t1_a_c = 25.0;
    double t3_w_c = 8.0;
    double n1_rpm = 0.0;
    double n3_rpm = 0.0;
    std::array<double, 4> bottom_flow_l_min{20.0, 20.0, 20.0, 20.0};
    std::array<double, 4> jacket_flow_l_min{0.0, 0.0, 50.0, 0.0};

    double total_time_min() const { return tau1_min + tau2_min + tau3_min + tau4_min; }

    std::vector<double> theta() const;
    void set_theta(const std::vector<double>& theta);

    static const std::vector<std::string>& theta_names();
};

struct DesignBounds {
    Bounds box{{60.0, 5.0, 5.0, 5.0, 50.0, 50.0}, {90.0, 65.0, 35.0, 45.0, 500.0, 500.0}};

    bool contains(const PfdParams& p, std::string* violation = nullptr) const;
};

struct KpiSpec {
    Phases weights{0.0, 0.0, 0.0, 0.0, 10.0};
};

/// Linear readout psi = w . X.
double kpi(const Phases& x, const KpiSpec& spec);

struct PlantState {
    double v_m = 0.0;   // tank volume (L)
    double t_m = 0.0;   // tank temperature (deg C)
    double t_s = 0.0;   // in-line mixer temperature (deg C)
    Phases x_m{};       // tank concentrations
    Phases x_s{};       // mixer concentrations
};

/// Controls in force during one processing step.
struct StepControls {
    double feed_flow_l_min = 0.0;   // Q^t
    Phases feed_conc{};             // X^t
    double feed_temp_c = 0.0;       // T^t
    double bottom_flow_l_min = 0.0; // Q^b (= loop flow Q^s)
    double n_rpm = 0.0;
    double jacket_flow_l_min = 0.0;
};

/// One per-minute plant measurement across the in-line mixer.
struct Measurement {
    double t_min = 0.0;
    Phases x_r{};       // mixer inlet (= tank outlet)
    Phases x_s{};       // mixer outlet
    double t_s_c = 0.0;
    double n_rpm = 0.0;
    double q_s_l_min = 0.0;
    double v_s_l = 0.0;
};

struct Trajectory {
    std::vector<Measurement> measurements;                  // t = 1, 2, ... minutes
    std::vector<std::pair<double, double>> kpi_profile;     // (t, psi), from t = 0
    std::vector<std::pair<double, PlantState>> states;      // sampled full states
    std::vector<double> gate_crossings;
    double final_kpi = 0.0;
    double total_time_min = 0.0;
};

/// Whole-plant configuration: the canonical defaults are the artifact's
/// ground-truth world and are what every acceptance property runs against.
struct PlantConfig {
    GroundTruthKinetics kinetics;
    EquipmentConfig equipment;
    PfdParams nominal;
    DesignBounds bounds;
    KpiSpec kpi;
    double feed_water_conc = 26.0;
    double feed_active_conc = 15.0;
    double rtol = 1e-8;
    double atol = 1e-10;
    double sample_cadence_min = 1.0;

    void validate() const;
};

/// Published rate laws with the Heaviside gate applied internally
/// (H(0) = 1; gamma_dot = 0 yields zero for all three mechanisms).
/// Throws std::domain_error if the backward denominator of mechanism 3
/// vanishes while its gate is open.
RateTriple ground_truth_rates(const Phases& x, double temp_c, double gamma_dot,
                              const GroundTruthKinetics& kin);

/// Stoichiometric assembly S*r in the balance ordering (A, W, L, Ls, V).
std::array<double, 5> stoich_rates(const RateTriple& r);
/// Same assembly in the state ordering (W, A, L, V, Ls).
Phases stoich_rates_state_order(const RateTriple& r);

std::array<double, 5> balance_from_state(const Phases& x);
Phases state_from_balance(const std::array<double, 5>& x);

struct PlantDeriv {
    double dv_m = 0.0;
    double dt_m = 0.0;
    double dt_s = 0.0;
    Phases dx_m{};
    Phases dx_s{};
};

/// Full right-hand side of the recycle-loop balances. The gate flag stands
/// in for H(T^s - T_K) so the integrator can freeze it between crossings.
PlantDeriv derivatives(const PlantState& state, const StepControls& controls,
                       const EquipmentConfig& cfg, const GroundTruthKinetics& kin,
                       bool gate_open);

/// Model closure used when substituting learned rate expressions for the
/// ground truth: (mixer concentrations, T^s, gamma_dot, gate flag) -> rates.
using RateFn = std::function<RateTriple(const Phases&, double, double, bool)>;

struct SimOutcome {
    bool ok = false;
    Trajectory trajectory;
    std::string error;
    double fail_time = 0.0;
};

/// Integrates the four-step recipe with an arbitrary rate closure.
SimOutcome simulate_with_rates(const PfdParams& params, const PlantConfig& cfg,
                               const RateFn& rates);

/// Ground-truth simulation; throws std::runtime_error on integrator failure
/// and std::invalid_argument if params violate the bounds.
Trajectory simulate(const PfdParams& params, const PlantConfig& cfg, std::uint64_t seed = 0);

}  // namespace kinforge

#endif
