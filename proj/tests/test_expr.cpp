#include <doctest.h>

#include <cmath>

#include "kinforge/expr.hpp"
#include "kinforge/rng.hpp"

using namespace kinforge;

namespace {

Expr var(int i) { return Expr::variable(i); }
Expr num(double v) { return Expr::constant(v); }
Expr add(Expr a, Expr b) { return Expr::binary(BinOp::Add, a, b); }
Expr sub(Expr a, Expr b) { return Expr::binary(BinOp::Sub, a, b); }
Expr mul(Expr a, Expr b) { return Expr::binary(BinOp::Mul, a, b); }
Expr divide(Expr a, Expr b) { return Expr::binary(BinOp::Div, a, b); }

// Feature layout (X_W, X_A, X_L, X_V, X_Ls, T, gdot).
constexpr int kW = 0, kA = 1, kL = 2, kV = 3, kT = 5;

std::vector<double> random_features(Rng& rng) {
    std::vector<double> f(7);
    for (double& v : f) v = rng.uniform(0.05, 2.0);
    return f;
}

Expr random_any_tree(Rng& rng, int budget) {
    if (budget < 3 || rng.bernoulli(0.4)) {
        if (rng.bernoulli(0.5)) return var(rng.uniform_int(7));
        return num(rng.uniform(-3.0, 3.0));
    }
    const BinOp op = static_cast<BinOp>(rng.uniform_int(4));
    const int left = 1 + rng.uniform_int(budget - 2);
    return Expr::binary(op, random_any_tree(rng, left), random_any_tree(rng, budget - 1 - left));
}

}  // namespace

TEST_CASE("evaluate basics") {
    std::vector<double> f{0.5, 0.2, 0.1, 0.3, 0.4, 1.2, 0.7};

    CHECK(num(3.5).evaluate(f) == 3.5);                      // constant node
    CHECK(mul(var(kA), var(kW)).evaluate(f) == doctest::Approx(0.1));  // X_A * X_W
    // division by zero propagates as a non-finite marker
    const Expr singular = divide(var(kV), sub(var(kT), var(kT)));
    CHECK(!std::isfinite(singular.evaluate(f)));
    const Expr nested = add(num(1.0), singular);
    CHECK(!std::isfinite(nested.evaluate(f)));

    CHECK_THROWS_AS((void)var(9).evaluate(f), std::out_of_range);
}

TEST_CASE("complexity counts every node") {
    CHECK(complexity(var(kL)) == 1);
    CHECK(complexity(add(var(kL), num(2.0))) == 3);
    // k * (f - b / K) with single-leaf slots: 3 operators + 4 leaves
    const Expr tmpl = mul(var(0), sub(var(1), divide(var(2), var(3))));
    CHECK(complexity(tmpl) == 7);
}

TEST_CASE("simplify identities and folding") {
    CHECK(simplify(add(mul(var(kW), num(1.0)), num(0.0))) == var(kW));
    CHECK(simplify(mul(num(2.0), num(3.0))) == num(6.0));
    CHECK(simplify(sub(var(kL), var(kL))) == num(0.0));

    // x - x -> 0 agrees with direct evaluation on random feature vectors
    Rng rng(7);
    const Expr diff = sub(var(kL), var(kL));
    const Expr simplified = simplify(diff);
    for (int i = 0; i < 100; ++i) {
        const auto f = random_features(rng);
        CHECK(simplified.evaluate(f) == diff.evaluate(f));
    }
}

TEST_CASE("simplify never adds nodes and preserves values") {
    Rng rng(13);
    for (int trial = 0; trial < 300; ++trial) {
        const Expr e = random_any_tree(rng, 2 + rng.uniform_int(18));
        const Expr s = simplify(e);
        CHECK(complexity(s) <= complexity(e));
        for (int i = 0; i < 10; ++i) {
            const auto f = random_features(rng);
            const double a = e.evaluate(f);
            const double b = s.evaluate(f);
            if (std::isfinite(a) && std::isfinite(b)) {
                CHECK(std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)}));
            }
        }
    }
}

TEST_CASE("rate-law template check") {
    const TemplateSpec spec = TemplateSpec::rate_law();

    CHECK_FALSE(check_template(add(var(0), var(1)), spec));  // first operator not a product
    CHECK(check_template(mul(var(0), sub(var(1), divide(var(2), var(3)))), spec));
    // a flattened multiplication chain with the driving force at the end
    const Expr chain = mul(mul(num(0.2), var(6)),
                           sub(var(kL), divide(var(kV), mul(num(3.0), var(kT)))));
    CHECK(check_template(chain, spec));

    // top-level subtraction with a division subtrahend is an implicit k = 1
    const Expr bare = sub(mul(num(0.9), var(kL)), divide(var(kV), var(kT)));
    CHECK(check_template(bare, spec));

    // two driving-force factors fail
    const Expr doubled = mul(sub(var(0), divide(var(1), var(2))),
                             sub(var(3), divide(var(4), var(kT))));
    CHECK_FALSE(check_template(doubled, spec));

    // disabled template accepts everything
    CHECK(check_template(add(var(0), var(1)), TemplateSpec::disabled()));
}

TEST_CASE("template check is invariant under factor reordering") {
    const TemplateSpec spec = TemplateSpec::rate_law();
    const Expr k1 = num(0.5), k2 = var(6);
    const Expr force = sub(var(kL), divide(var(kV), var(kT)));
    const Expr a = mul(k1, mul(k2, force));
    const Expr b = mul(mul(force, k1), k2);
    const Expr c = mul(k2, mul(force, k1));
    CHECK(check_template(a, spec));
    CHECK(check_template(b, spec));
    CHECK(check_template(c, spec));
}

TEST_CASE("serialize and parse round trip") {
    CHECK(serialize(mul(var(kA), var(kW))) == "(X_A * X_W)");
    CHECK(parse_expr("(X_A * X_W)") == mul(var(kA), var(kW)));

    const Expr nested = mul(mul(num(0.2), var(6)),
                            sub(var(kL), divide(var(kV), mul(num(3.25), var(kT)))));
    CHECK(parse_expr(serialize(nested)) == nested);

    CHECK_THROWS_AS((void)parse_expr("(X_A *"), ParseError);
    try {
        (void)parse_expr("(X_A * bogus)");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.position() == 7);
    }
}

TEST_CASE("round trip preserves evaluation on random trees") {
    Rng rng(99);
    for (int trial = 0; trial < 200; ++trial) {
        const Expr e = random_any_tree(rng, 2 + rng.uniform_int(18));
        const Expr back = parse_expr(serialize(e));
        CHECK(back == e);
    }
}

TEST_CASE("unscale") {
    FeatureSpec identity = FeatureSpec::identity(default_feature_names());

    SUBCASE("identity scales leave the expression unchanged") {
        const Expr e = mul(num(2.0), var(kT));
        CHECK(unscale(e, identity, 1.0) == simplify(e));
    }

    SUBCASE("linear case") {
        FeatureSpec spec = identity;
        spec.scales[kT] = 100.0;
        const Expr e = var(kT);
        const Expr raw = unscale(e, spec, 1.0);
        std::vector<double> f{0, 0, 0, 0, 0, 50.0, 0};
        CHECK(raw.evaluate(f) == doctest::Approx(0.5).epsilon(1e-12));
    }

    SUBCASE("numeric equivalence on a rate-law shaped tree") {
        FeatureSpec spec = identity;
        spec.scales = {25.0, 4.0, 0.5, 0.2, 0.8, 90.0, 5750.0};
        const double target_scale = 12.5;
        const Expr scaled = mul(mul(num(1.5), var(6)),
                                sub(var(kL), divide(var(kV), mul(num(0.8), sub(var(kT), num(0.2))))));
        const Expr raw = unscale(scaled, spec, target_scale);
        Rng rng(5);
        for (int i = 0; i < 100; ++i) {
            std::vector<double> f_raw(7);
            std::vector<double> f_scaled(7);
            for (int j = 0; j < 7; ++j) {
                f_raw[j] = rng.uniform(0.1, 1.0) * spec.scales[j];
                f_scaled[j] = f_raw[j] / spec.scales[j];
            }
            const double got = raw.evaluate(f_raw);
            const double want = target_scale * scaled.evaluate(f_scaled);
            if (std::isfinite(want))
                CHECK(std::abs(got - want) <= 1e-10 * std::max(1.0, std::abs(want)));
        }
    }
}

TEST_CASE("canonicalize orders commutative chains") {
    const Expr a = mul(var(0), mul(num(2.0), var(6)));
    const Expr b = mul(mul(var(6), var(0)), num(2.0));
    CHECK(canonicalize(a) == canonicalize(b));
    CHECK(structurally_equal(canonicalize(a), canonicalize(b), 0.0));

    const Expr c1 = mul(num(2.0), var(0));
    const Expr c2 = mul(num(2.0005), var(0));
    CHECK(structurally_equal(c1, c2, 1e-3));
    CHECK_FALSE(structurally_equal(c1, c2, 1e-5));
}

TEST_CASE("constants survive the text format exactly") {
    Rng rng(2024);
    for (int i = 0; i < 200; ++i) {
        const double v = rng.normal() * std::pow(10.0, rng.uniform(-8, 8));
        const Expr e = num(v);
        CHECK(parse_expr(serialize(e)) == e);
    }
}
