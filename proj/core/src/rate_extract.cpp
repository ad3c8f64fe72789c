#include "kinforge/rate_extract.hpp"

#include <cmath>
#include <json.hpp>
#include <stdexcept>

#include "kinforge/csv.hpp"
#include "kinforge/linalg.hpp"
#include "kinforge/rng.hpp"

namespace kinforge {

namespace {
// Stoichiometric matrix in balance order (A, W, L, Ls, V) x (r1, r2, r3).
constexpr double kS[5][3] = {
    {-2, 0, 0}, {-5, -10, 0}, {1, -1, -3}, {0, 1, 0}, {0, 0, 1},
};
}  // namespace

Phases finite_rate(const Measurement& m) {
    if (!(m.q_s_l_min > 0.0)) throw std::invalid_argument("finite_rate requires Q^s > 0");
    Phases out{};
    for (int i = 0; i < 5; ++i) out[i] = (m.x_s[i] - m.x_r[i]) * m.q_s_l_min / m.v_s_l;
    return out;
}

Inversion invert_stoichiometry(const std::array<double, 5>& dxdt) {
    // Normal equations: S has full column rank, so the 3x3 solve is exact.
    std::vector<double> ata(9, 0.0);
    std::vector<double> atb(3, 0.0);
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            double s = 0.0;
            for (int k = 0; k < 5; ++k) s += kS[k][i] * kS[k][j];
            ata[static_cast<std::size_t>(i * 3 + j)] = s;
        }
        double b = 0.0;
        for (int k = 0; k < 5; ++k) b += kS[k][i] * dxdt[static_cast<std::size_t>(k)];
        atb[static_cast<std::size_t>(i)] = b;
    }
    if (!solve_dense(ata, atb, 3)) throw std::runtime_error("stoichiometric inversion failed");
    Inversion inv;
    inv.rates = {atb[0], atb[1], atb[2]};
    double res = 0.0;
    for (int k = 0; k < 5; ++k) {
        double fit = 0.0;
        for (int i = 0; i < 3; ++i) fit += kS[k][i] * inv.rates[static_cast<std::size_t>(i)];
        const double d = dxdt[static_cast<std::size_t>(k)] - fit;
        res += d * d;
    }
    inv.residual_norm = std::sqrt(res);
    return inv;
}

std::vector<RegressionSample> gate_filter(const std::vector<RegressionSample>& samples,
                                          GateMode mode, double gate_temp_c) {
    if (mode == GateMode::Raw) return samples;
    std::vector<RegressionSample> out;
    out.reserve(samples.size());
    for (const RegressionSample& s : samples)
        if (s.features[5] >= gate_temp_c) out.push_back(s);
    return out;
}

AssembledData assemble(const std::vector<std::vector<Measurement>>& experiments,
                       const AssembleOptions& options) {
    if (experiments.empty()) throw std::invalid_argument("assemble requires at least one experiment");
    for (const auto& e : experiments)
        if (e.empty()) throw std::invalid_argument("assemble: empty measurement series");

    Rng rng(options.noise.seed);
    AssembledData data;
    data.gate_mode = options.gate_mode;
    data.gate_temp_c = options.gate_temp_c;
    const bool aware = options.gate_mode == GateMode::GateAware;
    data.gated = {aware, false, aware};

    for (const auto& series : experiments) {
        for (const Measurement& raw : series) {
            Measurement m = raw;
            if (options.noise.rel_level > 0.0) {
                for (int i = 0; i < 5; ++i) {
                    m.x_r[i] *= 1.0 + options.noise.rel_level * rng.normal();
                    m.x_s[i] *= 1.0 + options.noise.rel_level * rng.normal();
                }
            }
            const Phases fr = finite_rate(m);
            const Inversion inv = invert_stoichiometry(balance_from_state(fr));
            RegressionSample s;
            for (int i = 0; i < 5; ++i) s.features[static_cast<std::size_t>(i)] = m.x_s[i];
            s.features[5] = m.t_s_c;
            s.features[6] = options.metzner_otto_ks * m.n_rpm;
            s.targets = inv.rates;
            s.residual_norm = inv.residual_norm;
            data.samples.push_back(s);
        }
    }

    FeatureSpec spec;
    spec.names = default_feature_names();
    spec.scales.assign(7, 0.0);
    for (const RegressionSample& s : data.samples)
        for (int j = 0; j < 7; ++j)
            spec.scales[static_cast<std::size_t>(j)] =
                std::max(spec.scales[static_cast<std::size_t>(j)],
                         std::abs(s.features[static_cast<std::size_t>(j)]));
    for (double& d : spec.scales)
        if (d == 0.0) d = 1.0;
    data.features = spec;

    for (int r = 0; r < 3; ++r) {
        const std::vector<RegressionSample> rows =
            data.gated[static_cast<std::size_t>(r)]
                ? gate_filter(data.samples, options.gate_mode, options.gate_temp_c)
                : data.samples;
        if (rows.empty())
            throw std::runtime_error("assemble: gate filter removed every sample for rate " +
                                     std::to_string(r + 1));
        Dataset& ds = data.per_rate[static_cast<std::size_t>(r)];
        ds.n_features = 7;
        ds.feature_spec = spec;
        ds.rate_index = r;
        ds.weight = options.loss_weights[static_cast<std::size_t>(r)];
        double tmax = 0.0;
        for (const RegressionSample& s : rows)
            tmax = std::max(tmax, std::abs(s.targets[static_cast<std::size_t>(r)]));
        ds.target_scale = tmax == 0.0 ? 1.0 : tmax;
        ds.features.reserve(rows.size() * 7);
        ds.targets.reserve(rows.size());
        for (const RegressionSample& s : rows) {
            for (int j = 0; j < 7; ++j)
                ds.features.push_back(s.features[static_cast<std::size_t>(j)] /
                                      spec.scales[static_cast<std::size_t>(j)]);
            ds.targets.push_back(s.targets[static_cast<std::size_t>(r)] / ds.target_scale);
        }
        ds.validate();
    }
    return data;
}

void save_samples_csv(const AssembledData& data, const std::string& csv_path,
                      const std::string& sidecar_path) {
    std::string out = "X_W,X_A,X_L,X_V,X_Ls,T,gdot,r1,r2,r3,residual\n";
    for (const RegressionSample& s : data.samples) {
        std::vector<std::string> cells;
        for (double f : s.features) cells.push_back(format_double(f));
        for (double t : s.targets) cells.push_back(format_double(t));
        cells.push_back(format_double(s.residual_norm));
        out += csv::join(cells);
    }
    csv::write_file(csv_path, out);

    nlohmann::json side;
    side["feature_names"] = data.features.names;
    side["feature_scales"] = data.features.scales;
    for (int r = 0; r < 3; ++r) {
        side["target_scales"].push_back(data.per_rate[static_cast<std::size_t>(r)].target_scale);
        side["gated"].push_back(data.gated[static_cast<std::size_t>(r)]);
    }
    side["gate_mode"] = data.gate_mode == GateMode::GateAware ? "gate-aware" : "raw";
    side["gate_temp_c"] = data.gate_temp_c;
    csv::write_file(sidecar_path, side.dump(2) + "\n");
}

void save_measurements_csv(const std::vector<Measurement>& ms,
                           const std::vector<std::pair<double, double>>& kpi_profile,
                           const std::string& path) {
    std::string out =
        "t,X_W_r,X_A_r,X_L_r,X_V_r,X_Ls_r,X_W_s,X_A_s,X_L_s,X_V_s,X_Ls_s,T_s,N,Q_s,psi\n";
    std::size_t k = 0;
    for (const Measurement& m : ms) {
        std::vector<std::string> cells{format_double(m.t_min)};
        for (double v : m.x_r) cells.push_back(format_double(v));
        for (double v : m.x_s) cells.push_back(format_double(v));
        cells.push_back(format_double(m.t_s_c));
        cells.push_back(format_double(m.n_rpm));
        cells.push_back(format_double(m.q_s_l_min));
        double psi = 0.0;
        while (k < kpi_profile.size() && kpi_profile[k].first < m.t_min - 1e-9) ++k;
        if (k < kpi_profile.size() && std::abs(kpi_profile[k].first - m.t_min) <= 1e-9)
            psi = kpi_profile[k].second;
        cells.push_back(format_double(psi));
        out += csv::join(cells);
    }
    csv::write_file(path, out);
}

std::vector<std::vector<Measurement>> load_measurement_csvs(const std::vector<std::string>& paths) {
    std::vector<std::vector<Measurement>> all;
    for (const std::string& path : paths) {
        const std::vector<std::string> lines = csv::read_lines(path);
        if (lines.size() < 2) throw std::runtime_error(path + ": no measurement rows");
        std::vector<Measurement> ms;
        for (std::size_t i = 1; i < lines.size(); ++i) {
            const std::vector<std::string> cells = csv::split(lines[i]);
            if (cells.size() != 15)
                throw std::runtime_error(path + ": expected 15 columns, got " +
                                         std::to_string(cells.size()));
            Measurement m;
            m.t_min = csv::parse_double(cells[0]);
            for (int j = 0; j < 5; ++j) m.x_r[j] = csv::parse_double(cells[static_cast<std::size_t>(1 + j)]);
            for (int j = 0; j < 5; ++j) m.x_s[j] = csv::parse_double(cells[static_cast<std::size_t>(6 + j)]);
            m.t_s_c = csv::parse_double(cells[11]);
            m.n_rpm = csv::parse_double(cells[12]);
            m.q_s_l_min = csv::parse_double(cells[13]);
            m.v_s_l = 0.0;  // not part of the wire format; caller fills from config
            ms.push_back(m);
        }
        all.push_back(std::move(ms));
    }
    return all;
}

}  // namespace kinforge
