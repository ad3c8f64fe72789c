#ifndef KINFORGE_EXPR_HPP
#define KINFORGE_EXPR_HPP

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace kinforge {

enum class BinOp : std::uint8_t { Add, Sub, Mul, Div };

const char* op_symbol(BinOp op);

/// One node of an expression tree, stored in prefix (root-first) order.
/// Only the fields for the active kind are meaningful.
struct ExprNode {
    enum class Kind : std::uint8_t { Constant, Variable, Op };
    Kind kind = Kind::Constant;
    BinOp op = BinOp::Add;
    int var = 0;
    double value = 0.0;

    static ExprNode constant(double v);
    static ExprNode variable(int index);
    static ExprNode binary(BinOp op);

    friend bool operator==(const ExprNode& a, const ExprNode& b);
};

/// Immutable arithmetic expression over indexed features, constants and the
/// binary operators {+,-,*,/}. Stored flat in prefix order; subtrees are
/// contiguous ranges, which keeps copies, splices and evaluation cheap.
/// All "mutating" operations return a new tree.
class Expr {
public:
    Expr() = default;

    static Expr constant(double v);
    static Expr variable(int index);
    static Expr binary(BinOp op, const Expr& lhs, const Expr& rhs);
    /// Builds from a prefix node sequence; throws std::invalid_argument if
    /// the sequence does not form exactly one well-formed tree.
    static Expr from_nodes(std::vector<ExprNode> nodes);

    bool empty() const { return nodes_.empty(); }
    int size() const { return static_cast<int>(nodes_.size()); }
    const ExprNode& node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }
    const ExprNode& root() const { return nodes_.front(); }
    std::span<const ExprNode> nodes() const { return nodes_; }

    /// One-past-the-end index of the subtree rooted at node i.
    int subtree_end(int i) const;
    Expr subtree(int i) const;
    /// New tree with the subtree rooted at i replaced by `replacement`.
    Expr with_replaced(int i, const Expr& replacement) const;

    /// Index of the left/right child of the op node at i.
    int left_child(int i) const { return i + 1; }
    int right_child(int i) const { return subtree_end(i + 1); }

    double evaluate(std::span<const double> features) const;

    int constant_count() const;
    /// New tree with constant leaves overwritten in prefix order.
    Expr with_constants(std::span<const double> values) const;
    std::vector<double> constants() const;

    friend bool operator==(const Expr& a, const Expr& b);

private:
    std::vector<ExprNode> nodes_;
};

/// Feature naming and max-abs scale divisors used to map raw measurements
/// into the unit-ish box the search operates in.
struct FeatureSpec {
    std::vector<std::string> names;
    std::vector<double> scales;  // strictly positive divisors

    int count() const { return static_cast<int>(names.size()); }
    void validate() const;  // throws std::invalid_argument

    static FeatureSpec identity(std::vector<std::string> names);
};

/// Names of the case-study feature vector (X_W, X_A, X_L, X_V, X_Ls, T, gdot).
const std::vector<std::string>& default_feature_names();

enum class TemplateId : std::uint8_t { RateLaw };

struct TemplateSpec {
    bool enabled = false;
    TemplateId id = TemplateId::RateLaw;

    static TemplateSpec rate_law() { return TemplateSpec{true, TemplateId::RateLaw}; }
    static TemplateSpec disabled() { return TemplateSpec{false, TemplateId::RateLaw}; }
};

/// Node count: every operator, variable and constant counts one.
int complexity(const Expr& e);

/// Constant folding plus identity elimination (x+0, x*1, x/1, x-0, x*0,
/// 0/x, x-x, double negation through subtraction). Never grows the tree.
Expr simplify(const Expr& e);

/// Rate-law template check: flatten the maximal top-level multiplication
/// chain; the tree passes iff exactly one factor is a subtraction whose
/// right child is a division. Everything else is the rate-constant part.
bool check_template(const Expr& e, const TemplateSpec& spec);

/// Thrown by parse_expr with the byte offset of the failure.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& message, std::size_t position);
    std::size_t position() const { return position_; }

private:
    std::size_t position_;
};

/// Fully parenthesised infix with shortest round-trip constants.
std::string serialize(const Expr& e, const std::vector<std::string>& names);
std::string serialize(const Expr& e);  // uses default_feature_names()
Expr parse_expr(std::string_view text, const std::vector<std::string>& names);
Expr parse_expr(std::string_view text);

/// Rewrites an expression fitted on scaled features into raw units: each
/// variable v becomes v / scale_v and the whole tree is multiplied by
/// `target_scale`, then simplified.
Expr unscale(const Expr& e, const FeatureSpec& spec, double target_scale);

/// Simplifies, flattens commutative chains and orders their operands by a
/// deterministic key. Two algebraically identical trees that differ only in
/// commutative ordering canonicalise to equal trees.
Expr canonicalize(const Expr& e);

/// Node-for-node equality with relative tolerance on constants.
bool structurally_equal(const Expr& a, const Expr& b, double const_rel_tol);

std::string format_double(double v);  // shortest round-trip decimal

}  // namespace kinforge

#endif
