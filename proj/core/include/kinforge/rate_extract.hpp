#ifndef KINFORGE_RATE_EXTRACT_HPP
#define KINFORGE_RATE_EXTRACT_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "kinforge/dataset.hpp"
#include "kinforge/plant.hpp"

namespace kinforge {

/// Finite-difference rearrangement rate across the in-line mixer:
/// (X^s - X^r) * Q^s / V^s, in state order (W, A, L, V, Ls).
Phases finite_rate(const Measurement& m);

struct Inversion {
    RateTriple rates{};
    double residual_norm = 0.0;
};

/// Least-squares solution of S r = dxdt for the fixed 5x3 stoichiometry.
/// Input is in balance order (A, W, L, Ls, V).
Inversion invert_stoichiometry(const std::array<double, 5>& dxdt);

/// One extracted training sample in raw (unscaled) units. Features are the
/// mixer-outlet state (X_W, X_A, X_L, X_V, X_Ls, T, gamma_dot).
struct RegressionSample {
    std::array<double, 7> features{};
    RateTriple targets{};
    double residual_norm = 0.0;
};

struct NoiseSpec {
    double rel_level = 0.0;  // relative Gaussian noise on measured concentrations
    std::uint64_t seed = 0;
};

enum class GateMode { GateAware, Raw };

/// In gate-aware mode, returns only samples with T >= gate_temp (the known
/// prior switch applied outside the learned expressions); raw mode passes
/// everything through.
std::vector<RegressionSample> gate_filter(const std::vector<RegressionSample>& samples,
                                          GateMode mode, double gate_temp_c);

struct AssembleOptions {
    NoiseSpec noise;
    GateMode gate_mode = GateMode::GateAware;
    double gate_temp_c = 45.0;
    double metzner_otto_ks = 11.5;
    std::array<double, 3> loss_weights{1.0, 1.0, 1.0};
};

struct AssembledData {
    FeatureSpec features;                   // shared max-abs divisors
    std::vector<RegressionSample> samples;  // pooled, raw units, pre-filter
    std::array<Dataset, 3> per_rate;        // scaled, gate-filtered as configured
    std::array<bool, 3> gated{true, false, true};
    GateMode gate_mode = GateMode::GateAware;
    double gate_temp_c = 45.0;
};

/// Noise, finite-difference rates, stoichiometric inversion, pooling and
/// max-abs scaling across a list of experiments' measurement series.
AssembledData assemble(const std::vector<std::vector<Measurement>>& experiments,
                       const AssembleOptions& options);

/// Sample dump as CSV plus a JSON sidecar holding the scale divisors.
void save_samples_csv(const AssembledData& data, const std::string& csv_path,
                      const std::string& sidecar_path);
std::vector<std::vector<Measurement>> load_measurement_csvs(const std::vector<std::string>& paths);
void save_measurements_csv(const std::vector<Measurement>& ms,
                           const std::vector<std::pair<double, double>>& kpi_profile,
                           const std::string& path);

}  // namespace kinforge

#endif
