#ifndef KINFORGE_TESTS_SUPPORT_HPP
#define KINFORGE_TESTS_SUPPORT_HPP

#include "kinforge/mbdoe.hpp"
#include "kinforge/plant.hpp"

namespace kinforge::testsupport {

// Feature layout (X_W, X_A, X_L, X_V, X_Ls, T, gdot).
inline Expr v(int i) { return Expr::variable(i); }
inline Expr c(double x) { return Expr::constant(x); }
inline Expr add(Expr a, Expr b) { return Expr::binary(BinOp::Add, a, b); }
inline Expr sub(Expr a, Expr b) { return Expr::binary(BinOp::Sub, a, b); }
inline Expr mul(Expr a, Expr b) { return Expr::binary(BinOp::Mul, a, b); }
inline Expr dv(Expr a, Expr b) { return Expr::binary(BinOp::Div, a, b); }

/// The published rate laws written as expression trees over raw features,
/// with the temperature switch left to the gate flag.
inline Expr truth_rate1(const GroundTruthKinetics& k) {
    return mul(mul(mul(mul(c(k.k1), v(6)), sub(c(k.alpha_act), v(5))), v(1)), v(0));
}
inline Expr truth_rate2(const GroundTruthKinetics& k) {
    return mul(mul(mul(c(k.k2), v(6)), v(5)),
               sub(mul(v(2), v(0)), dv(mul(v(4), v(5)), c(k.big_k2))));
}
inline Expr truth_rate3(const GroundTruthKinetics& k) {
    return mul(mul(c(k.k3), v(6)),
               sub(v(2), dv(v(3), mul(mul(c(k.big_k3), v(6)), sub(v(5), c(k.beta_off))))));
}

/// Rewrites a raw-feature expression into the scaled space defined by the
/// divisors: substitute v -> v * scale_v, then divide by the target scale.
inline Expr rescale_into(const Expr& raw, const FeatureSpec& spec, double target_scale) {
    std::vector<ExprNode> nodes;
    for (int i = 0; i < raw.size(); ++i) nodes.push_back(raw.node(i));
    // rebuild recursively
    struct Builder {
        const Expr& src;
        const FeatureSpec& spec;
        Expr run(int i) const {
            const ExprNode& n = src.node(i);
            if (n.kind == ExprNode::Kind::Constant) return Expr::constant(n.value);
            if (n.kind == ExprNode::Kind::Variable)
                return mul(v(n.var), c(spec.scales[static_cast<std::size_t>(n.var)]));
            return Expr::binary(n.op, run(src.left_child(i)), run(src.right_child(i)));
        }
    } builder{raw, spec};
    return dv(builder.run(0), c(target_scale));
}

inline RateCandidate candidate(Expr e, bool gated) {
    RateCandidate r;
    r.expr = std::move(e);
    r.complexity = complexity(r.expr);
    r.gated = gated;
    return r;
}

/// Ensemble whose single member is the ground truth itself (identity scales).
inline ModelEnsemble ground_truth_ensemble(const PlantConfig& cfg) {
    ModelEnsemble ens;
    ens.features = FeatureSpec::identity(default_feature_names());
    ens.candidates[0] = {candidate(truth_rate1(cfg.kinetics), true)};
    ens.candidates[1] = {candidate(truth_rate2(cfg.kinetics), false)};
    ens.candidates[2] = {candidate(truth_rate3(cfg.kinetics), true)};
    return ens;
}

inline ModelEnsemble zero_rate_ensemble() {
    ModelEnsemble ens;
    ens.features = FeatureSpec::identity(default_feature_names());
    for (auto& list : ens.candidates) list = {candidate(c(0.0), false)};
    return ens;
}

}  // namespace kinforge::testsupport

#endif
