#ifndef KINFORGE_CAMPAIGN_HPP
#define KINFORGE_CAMPAIGN_HPP

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "kinforge/mbdoe.hpp"
#include "kinforge/plant.hpp"
#include "kinforge/rate_extract.hpp"
#include "kinforge/sr.hpp"

namespace kinforge {

enum class SrMode { CarryOver, FromScratch };
enum class CampaignObjective { DiscoveryOnly, MultiObjective };

/// Desk-sized search budget used inside campaigns; the FitConfig defaults
/// themselves mirror the full-size study configuration.
inline FitConfig campaign_sr_defaults() {
    FitConfig f;
    f.population_count = 15;
    f.population_size = 33;
    f.max_iterations = 2000;
    f.convergence_window = 300;
    return f;
}

struct CampaignConfig {
    SrMode sr_mode = SrMode::CarryOver;
    bool template_enabled = true;
    CampaignObjective objective = CampaignObjective::DiscoveryOnly;
    int max_iterations = 10;
    double alpha_threshold = 1e-3;
    FitConfig sr = campaign_sr_defaults();  // carry-over budget; from-scratch scales it up
    double scratch_budget_factor = 10.0;
    int validation_points = 50;
    std::uint64_t master_seed = 0;
    std::uint64_t validation_seed = 9001;  // independent of the campaign seed
    ProcessGoal goal;
    OptimBudget design_budget;
    GateMode gate_mode = GateMode::GateAware;
    NoiseSpec noise;
    int top_k = 3;
    int workers = 1;

    void validate() const;
    /// Case presets: "1a" from-scratch, "1b" carry-over, "1c" template off,
    /// "2" multiobjective.
    void apply_mode(const std::string& mode);
};

struct IterationRecord {
    int iteration = 0;
    std::array<int, 3> dataset_rows{};
    std::array<ParetoFront, 3> fronts;
    std::array<std::vector<RateCandidate>, 3> selected;  // rank 0 = point model
    std::vector<double> theta;                           // designed experiment
    double predicted_kpi = std::numeric_limits<double>::quiet_NaN();
    double actual_kpi = std::numeric_limits<double>::quiet_NaN();
    double dj_m = std::numeric_limits<double>::quiet_NaN();
    double dj_p = std::numeric_limits<double>::quiet_NaN();
    double alpha = std::numeric_limits<double>::quiet_NaN();      // value after the update
    double alpha_used = std::numeric_limits<double>::quiet_NaN(); // value the design ran with
    double j_m_max = std::numeric_limits<double>::quiet_NaN();
    double j_p_max = std::numeric_limits<double>::quiet_NaN();
    bool normalizers_refreshed = false;
    double tau_min = std::numeric_limits<double>::quiet_NaN();
    double mape_percent = std::numeric_limits<double>::quiet_NaN();
    bool recovered = false;
    bool final_exploitation = false;
};

struct CampaignState {
    CampaignConfig config;
    PlantConfig plant;
    std::vector<std::vector<double>> experiment_thetas;
    std::vector<std::vector<Measurement>> experiments;
    std::vector<IterationRecord> records;  // records[0] describes the initial design
    AlphaState alpha;
    std::array<std::vector<RateCandidate>, 3> carry_seeds;
    std::array<std::string, 3 * 3> last_candidate_keys{};  // normalizer refresh tracking
    std::vector<std::vector<double>> validation_thetas;
    std::vector<double> validation_actuals;
    int initial_experiments = 0;
    bool pending_final = false;
    bool stopped = false;
    std::string stop_reason;

    int iterations_run() const { return static_cast<int>(records.size()) - 1; }
};

/// 2x2 corner design over (T0_W, N2) at their bounds, all other free
/// parameters at midpoints; exact duplicates from degenerate bounds are
/// dropped with a warning on stderr.
std::vector<std::vector<double>> initial_design(const Bounds& space);

/// Runs the initial experiments and writes record 0.
CampaignState start_campaign(const CampaignConfig& config, const PlantConfig& plant);

/// One loop turn: assemble, evolve per rate, select, validate, design, run
/// the in-silico experiment, update the exploration weight, append a record.
void run_iteration(CampaignState& state);

bool campaign_should_stop(const CampaignState& state);

using IterationCallback = std::function<void(const CampaignState&)>;

/// Full campaign from scratch (or continued from a loaded state when
/// `resume` is supplied). The callback fires after every iteration.
CampaignState run_campaign(const CampaignConfig& config, const PlantConfig& plant,
                           const IterationCallback& on_iteration = nullptr);
void continue_campaign(CampaignState& state, const IterationCallback& on_iteration = nullptr);

/// Validation MAPE (%) of a point model over the fixed seeded validation set.
/// The plant-side values are simulated once and cached in the state.
double validate_mape(CampaignState& state, const RateFn& point_model);

/// Numeric-equivalence probe of a selected candidate against the published
/// ground-truth rate law over a widened envelope.
bool candidate_matches_truth(const RateCandidate& candidate, int rate_index,
                             const FeatureSpec& features, double target_scale,
                             const PlantConfig& plant, double rel_tol = 5e-3);

ModelEnsemble ensemble_from_record(const IterationRecord& record, const AssembledData& data);

/// Re-pools exactly the experiments that were available when the given
/// record's models were fitted (so closures see their original scaling).
AssembledData assemble_for_record(const CampaignState& state, int record_index);

// --- persistence and reporting -------------------------------------------

void save_state(const CampaignState& state, const std::string& path);
CampaignState load_state(const std::string& path);

/// Per-iteration metrics table. Columns:
/// I,MAPE,MSE_r1_1..MSE_r3_3,alpha,tau,JM_max,JP_max,dJM,dJP
std::string metrics_csv(const CampaignState& state);
/// Per-iteration scored fronts (plot data for the MSE/score bar charts).
std::string fronts_csv(const CampaignState& state);

}  // namespace kinforge

#endif
