#ifndef KINFORGE_DATASET_HPP
#define KINFORGE_DATASET_HPP

#include <cmath>
#include <stdexcept>
#include <vector>

#include "kinforge/expr.hpp"

namespace kinforge {

/// Regression samples for one rate equation, already max-abs scaled.
struct Dataset {
    std::vector<double> features;  // row-major, rows x n_features
    int n_features = 0;
    std::vector<double> targets;
    FeatureSpec feature_spec;      // raw -> scaled mapping for the features
    double target_scale = 1.0;     // raw = scaled * target_scale
    double weight = 1.0;           // diagonal loss weight for this output
    int rate_index = -1;           // provenance, 0..2 when applicable

    int rows() const { return n_features > 0 ? static_cast<int>(targets.size()) : 0; }

    const double* row(int i) const { return features.data() + static_cast<std::size_t>(i) * n_features; }

    void validate() const {
        if (n_features <= 0) throw std::invalid_argument("Dataset: n_features must be positive");
        if (targets.empty()) throw std::invalid_argument("Dataset: needs at least one row");
        if (features.size() != targets.size() * static_cast<std::size_t>(n_features))
            throw std::invalid_argument("Dataset: feature/target row mismatch");
        for (double v : features)
            if (!std::isfinite(v)) throw std::invalid_argument("Dataset: non-finite feature");
        for (double v : targets)
            if (!std::isfinite(v)) throw std::invalid_argument("Dataset: non-finite target");
        if (!(weight > 0)) throw std::invalid_argument("Dataset: weight must be positive");
    }

    double target_variance() const {
        double mean = 0.0;
        for (double v : targets) mean += v;
        mean /= static_cast<double>(targets.size());
        double var = 0.0;
        for (double v : targets) var += (v - mean) * (v - mean);
        return var / static_cast<double>(targets.size());
    }
};

}  // namespace kinforge

#endif
