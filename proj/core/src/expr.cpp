#include "kinforge/expr.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>

namespace kinforge {

namespace {
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();
}

const char* op_symbol(BinOp op) {
    switch (op) {
        case BinOp::Add: return "+";
        case BinOp::Sub: return "-";
        case BinOp::Mul: return "*";
        case BinOp::Div: return "/";
    }
    return "?";
}

ExprNode ExprNode::constant(double v) {
    ExprNode n;
    n.kind = Kind::Constant;
    n.value = v;
    return n;
}

ExprNode ExprNode::variable(int index) {
    ExprNode n;
    n.kind = Kind::Variable;
    n.var = index;
    return n;
}

ExprNode ExprNode::binary(BinOp op) {
    ExprNode n;
    n.kind = Kind::Op;
    n.op = op;
    return n;
}

bool operator==(const ExprNode& a, const ExprNode& b) {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
        case ExprNode::Kind::Constant: return a.value == b.value;
        case ExprNode::Kind::Variable: return a.var == b.var;
        case ExprNode::Kind::Op: return a.op == b.op;
    }
    return false;
}

Expr Expr::constant(double v) {
    if (!std::isfinite(v)) throw std::invalid_argument("expression constants must be finite");
    Expr e;
    e.nodes_.push_back(ExprNode::constant(v));
    return e;
}

Expr Expr::variable(int index) {
    if (index < 0) throw std::invalid_argument("variable index must be non-negative");
    Expr e;
    e.nodes_.push_back(ExprNode::variable(index));
    return e;
}

Expr Expr::binary(BinOp op, const Expr& lhs, const Expr& rhs) {
    if (lhs.empty() || rhs.empty()) throw std::invalid_argument("binary children must be non-empty");
    Expr e;
    e.nodes_.reserve(1 + lhs.nodes_.size() + rhs.nodes_.size());
    e.nodes_.push_back(ExprNode::binary(op));
    e.nodes_.insert(e.nodes_.end(), lhs.nodes_.begin(), lhs.nodes_.end());
    e.nodes_.insert(e.nodes_.end(), rhs.nodes_.begin(), rhs.nodes_.end());
    return e;
}

Expr Expr::from_nodes(std::vector<ExprNode> nodes) {
    // A prefix sequence is one tree iff pending operand slots hit zero exactly
    // at the last node.
    if (nodes.empty()) throw std::invalid_argument("empty node sequence");
    long pending = 1;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (pending <= 0) throw std::invalid_argument("trailing nodes after tree completed");
        const ExprNode& n = nodes[i];
        pending -= 1;
        if (n.kind == ExprNode::Kind::Op) {
            pending += 2;
        } else if (n.kind == ExprNode::Kind::Constant) {
            if (!std::isfinite(n.value)) throw std::invalid_argument("expression constants must be finite");
        } else if (n.var < 0) {
            throw std::invalid_argument("variable index must be non-negative");
        }
    }
    if (pending != 0) throw std::invalid_argument("truncated node sequence");
    Expr e;
    e.nodes_ = std::move(nodes);
    return e;
}

int Expr::subtree_end(int i) const {
    int pending = 1;
    int j = i;
    while (pending > 0) {
        pending += nodes_[static_cast<std::size_t>(j)].kind == ExprNode::Kind::Op ? 1 : -1;
        ++j;
    }
    return j;
}

Expr Expr::subtree(int i) const {
    Expr e;
    e.nodes_.assign(nodes_.begin() + i, nodes_.begin() + subtree_end(i));
    return e;
}

Expr Expr::with_replaced(int i, const Expr& replacement) const {
    if (replacement.empty()) throw std::invalid_argument("replacement must be non-empty");
    Expr e;
    const int end = subtree_end(i);
    e.nodes_.reserve(nodes_.size() - static_cast<std::size_t>(end - i) + replacement.nodes_.size());
    e.nodes_.insert(e.nodes_.end(), nodes_.begin(), nodes_.begin() + i);
    e.nodes_.insert(e.nodes_.end(), replacement.nodes_.begin(), replacement.nodes_.end());
    e.nodes_.insert(e.nodes_.end(), nodes_.begin() + end, nodes_.end());
    return e;
}

double Expr::evaluate(std::span<const double> features) const {
    // Reversed-prefix evaluation: operands surface left-first on the stack.
    std::array<double, 64> fixed{};
    std::vector<double> spill;
    double* stack = fixed.data();
    if (nodes_.size() > fixed.size()) {
        spill.resize(nodes_.size());
        stack = spill.data();
    }
    int top = 0;
    for (std::size_t k = nodes_.size(); k-- > 0;) {
        const ExprNode& n = nodes_[k];
        switch (n.kind) {
            case ExprNode::Kind::Constant:
                stack[top++] = n.value;
                break;
            case ExprNode::Kind::Variable:
                if (n.var >= static_cast<int>(features.size()))
                    throw std::out_of_range("variable index exceeds feature vector length");
                stack[top++] = features[static_cast<std::size_t>(n.var)];
                break;
            case ExprNode::Kind::Op: {
                const double lhs = stack[--top];
                const double rhs = stack[--top];
                double r = 0.0;
                switch (n.op) {
                    case BinOp::Add: r = lhs + rhs; break;
                    case BinOp::Sub: r = lhs - rhs; break;
                    case BinOp::Mul: r = lhs * rhs; break;
                    case BinOp::Div: r = rhs == 0.0 ? kNan : lhs / rhs; break;
                }
                stack[top++] = r;
                break;
            }
        }
    }
    return stack[0];
}

int Expr::constant_count() const {
    int c = 0;
    for (const ExprNode& n : nodes_)
        if (n.kind == ExprNode::Kind::Constant) ++c;
    return c;
}

Expr Expr::with_constants(std::span<const double> values) const {
    Expr e = *this;
    std::size_t k = 0;
    for (ExprNode& n : e.nodes_) {
        if (n.kind != ExprNode::Kind::Constant) continue;
        if (k >= values.size()) throw std::invalid_argument("constant value count mismatch");
        if (!std::isfinite(values[k])) throw std::invalid_argument("expression constants must be finite");
        n.value = values[k++];
    }
    if (k != values.size()) throw std::invalid_argument("constant value count mismatch");
    return e;
}

std::vector<double> Expr::constants() const {
    std::vector<double> out;
    for (const ExprNode& n : nodes_)
        if (n.kind == ExprNode::Kind::Constant) out.push_back(n.value);
    return out;
}

bool operator==(const Expr& a, const Expr& b) { return a.nodes_ == b.nodes_; }

void FeatureSpec::validate() const {
    if (names.size() != scales.size())
        throw std::invalid_argument("FeatureSpec: names/scales length mismatch");
    for (double s : scales)
        if (!(s > 0.0) || !std::isfinite(s))
            throw std::invalid_argument("FeatureSpec: scale divisors must be strictly positive");
}

FeatureSpec FeatureSpec::identity(std::vector<std::string> names) {
    FeatureSpec spec;
    spec.scales.assign(names.size(), 1.0);
    spec.names = std::move(names);
    return spec;
}

const std::vector<std::string>& default_feature_names() {
    static const std::vector<std::string> names{"X_W", "X_A", "X_L", "X_V", "X_Ls", "T", "gdot"};
    return names;
}

int complexity(const Expr& e) { return e.size(); }

namespace {

bool is_const(const Expr& e, double v) {
    return e.size() == 1 && e.root().kind == ExprNode::Kind::Constant && e.root().value == v;
}

bool is_const(const Expr& e) {
    return e.size() == 1 && e.root().kind == ExprNode::Kind::Constant;
}

Expr simplify_once(const Expr& e, int i) {
    const ExprNode& n = e.node(i);
    if (n.kind != ExprNode::Kind::Op) return e.subtree(i);

    Expr lhs = simplify_once(e, e.left_child(i));
    Expr rhs = simplify_once(e, e.right_child(i));

    if (is_const(lhs) && is_const(rhs)) {
        double v = 0.0;
        const double a = lhs.root().value, b = rhs.root().value;
        switch (n.op) {
            case BinOp::Add: v = a + b; break;
            case BinOp::Sub: v = a - b; break;
            case BinOp::Mul: v = a * b; break;
            case BinOp::Div: v = b == 0.0 ? kNan : a / b; break;
        }
        if (std::isfinite(v)) return Expr::constant(v);
        return Expr::binary(n.op, lhs, rhs);  // keep singular fold unevaluated
    }

    switch (n.op) {
        case BinOp::Add:
            if (is_const(lhs, 0.0)) return rhs;
            if (is_const(rhs, 0.0)) return lhs;
            break;
        case BinOp::Sub:
            if (is_const(rhs, 0.0)) return lhs;
            if (lhs == rhs) return Expr::constant(0.0);
            // 0 - (0 - x)  ->  x
            if (is_const(lhs, 0.0) && rhs.root().kind == ExprNode::Kind::Op &&
                rhs.root().op == BinOp::Sub && is_const(rhs.subtree(rhs.left_child(0)), 0.0))
                return rhs.subtree(rhs.right_child(0));
            break;
        case BinOp::Mul:
            if (is_const(lhs, 1.0)) return rhs;
            if (is_const(rhs, 1.0)) return lhs;
            if (is_const(lhs, 0.0) || is_const(rhs, 0.0)) return Expr::constant(0.0);
            break;
        case BinOp::Div:
            if (is_const(rhs, 1.0)) return lhs;
            if (is_const(lhs, 0.0)) return Expr::constant(0.0);
            break;
    }
    return Expr::binary(n.op, lhs, rhs);
}

}  // namespace

Expr simplify(const Expr& e) {
    if (e.empty()) return e;
    Expr out = e;
    for (int pass = 0; pass < 3; ++pass) {
        Expr next = simplify_once(out, 0);
        if (next == out) break;
        out = std::move(next);
    }
    return out;
}

namespace {

void collect_mul_factors(const Expr& e, int i, std::vector<int>& factors) {
    const ExprNode& n = e.node(i);
    if (n.kind == ExprNode::Kind::Op && n.op == BinOp::Mul) {
        collect_mul_factors(e, e.left_child(i), factors);
        collect_mul_factors(e, e.right_child(i), factors);
    } else {
        factors.push_back(i);
    }
}

}  // namespace

bool check_template(const Expr& e, const TemplateSpec& spec) {
    if (!spec.enabled) return true;
    if (e.empty()) return false;
    std::vector<int> factors;
    collect_mul_factors(e, 0, factors);
    int driving_force_factors = 0;
    for (int f : factors) {
        const ExprNode& n = e.node(f);
        if (n.kind != ExprNode::Kind::Op || n.op != BinOp::Sub) continue;
        const ExprNode& sub_rhs = e.node(e.right_child(f));
        if (sub_rhs.kind == ExprNode::Kind::Op && sub_rhs.op == BinOp::Div) ++driving_force_factors;
    }
    return driving_force_factors == 1;
}

ParseError::ParseError(const std::string& message, std::size_t position)
    : std::runtime_error(message + " at position " + std::to_string(position)), position_(position) {}

std::string format_double(double v) {
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    (void)ec;
    std::string s(buf.data(), ptr);
    // Keep constants visually distinct from variables in the text format.
    if (s.find_first_of(".eEn") == std::string::npos && s.find("inf") == std::string::npos) s += ".0";
    return s;
}

namespace {

void serialize_rec(const Expr& e, int i, const std::vector<std::string>& names, std::string& out) {
    const ExprNode& n = e.node(i);
    switch (n.kind) {
        case ExprNode::Kind::Constant:
            out += format_double(n.value);
            break;
        case ExprNode::Kind::Variable:
            if (n.var >= static_cast<int>(names.size()))
                throw std::out_of_range("variable index exceeds name table");
            out += names[static_cast<std::size_t>(n.var)];
            break;
        case ExprNode::Kind::Op:
            out += '(';
            serialize_rec(e, e.left_child(i), names, out);
            out += ' ';
            out += op_symbol(n.op);
            out += ' ';
            serialize_rec(e, e.right_child(i), names, out);
            out += ')';
            break;
    }
}

class Parser {
public:
    Parser(std::string_view text, const std::vector<std::string>& names) : text_(text), names_(names) {}

    Expr parse() {
        Expr e = parse_element();
        skip_ws();
        if (pos_ != text_.size()) throw ParseError("unexpected trailing input", pos_);
        return e;
    }

private:
    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    char peek() {
        skip_ws();
        if (pos_ >= text_.size()) throw ParseError("unexpected end of input", pos_);
        return text_[pos_];
    }

    Expr parse_element() {
        const char c = peek();
        if (c == '(') {
            ++pos_;
            Expr lhs = parse_element();
            const BinOp op = parse_op();
            Expr rhs = parse_element();
            skip_ws();
            if (pos_ >= text_.size() || text_[pos_] != ')')
                throw ParseError("expected ')'", pos_);
            ++pos_;
            return Expr::binary(op, lhs, rhs);
        }
        if (c == '-' || c == '.' || std::isdigit(static_cast<unsigned char>(c))) return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
        throw ParseError("expected expression", pos_);
    }

    BinOp parse_op() {
        const char c = peek();
        ++pos_;
        switch (c) {
            case '+': return BinOp::Add;
            case '-': return BinOp::Sub;
            case '*': return BinOp::Mul;
            case '/': return BinOp::Div;
        }
        throw ParseError("expected operator", pos_ - 1);
    }

    Expr parse_number() {
        skip_ws();
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(text_.data() + pos_, text_.data() + text_.size(), v);
        if (ec != std::errc{}) throw ParseError("malformed number", pos_);
        pos_ = static_cast<std::size_t>(ptr - text_.data());
        return Expr::constant(v);
    }

    Expr parse_identifier() {
        skip_ws();
        const std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
            ++pos_;
        const std::string_view name = text_.substr(start, pos_ - start);
        for (std::size_t k = 0; k < names_.size(); ++k)
            if (names_[k] == name) return Expr::variable(static_cast<int>(k));
        throw ParseError("unknown variable '" + std::string(name) + "'", start);
    }

    std::string_view text_;
    const std::vector<std::string>& names_;
    std::size_t pos_ = 0;
};

}  // namespace

std::string serialize(const Expr& e, const std::vector<std::string>& names) {
    if (e.empty()) return "";
    std::string out;
    serialize_rec(e, 0, names, out);
    return out;
}

std::string serialize(const Expr& e) { return serialize(e, default_feature_names()); }

Expr parse_expr(std::string_view text, const std::vector<std::string>& names) {
    return Parser(text, names).parse();
}

Expr parse_expr(std::string_view text) { return parse_expr(text, default_feature_names()); }

namespace {

Expr unscale_rec(const Expr& e, int i, const FeatureSpec& spec) {
    const ExprNode& n = e.node(i);
    switch (n.kind) {
        case ExprNode::Kind::Constant:
            return Expr::constant(n.value);
        case ExprNode::Kind::Variable: {
            if (n.var >= spec.count())
                throw std::out_of_range("variable index exceeds FeatureSpec");
            return Expr::binary(BinOp::Div, Expr::variable(n.var),
                                Expr::constant(spec.scales[static_cast<std::size_t>(n.var)]));
        }
        case ExprNode::Kind::Op:
            return Expr::binary(n.op, unscale_rec(e, e.left_child(i), spec),
                                unscale_rec(e, e.right_child(i), spec));
    }
    throw std::logic_error("unreachable");
}

}  // namespace

Expr unscale(const Expr& e, const FeatureSpec& spec, double target_scale) {
    spec.validate();
    Expr raw = unscale_rec(e, 0, spec);
    return simplify(Expr::binary(BinOp::Mul, Expr::constant(target_scale), raw));
}

namespace {

void collect_chain(const Expr& e, int i, BinOp op, std::vector<Expr>& terms) {
    const ExprNode& n = e.node(i);
    if (n.kind == ExprNode::Kind::Op && n.op == op) {
        collect_chain(e, e.left_child(i), op, terms);
        collect_chain(e, e.right_child(i), op, terms);
    } else {
        terms.push_back(e.subtree(i));
    }
}

Expr canonicalize_rec(const Expr& e, int i) {
    const ExprNode& n = e.node(i);
    if (n.kind != ExprNode::Kind::Op)
        return e.subtree(i);
    if (n.op == BinOp::Add || n.op == BinOp::Mul) {
        std::vector<Expr> terms;
        collect_chain(e, i, n.op, terms);
        for (Expr& t : terms) t = canonicalize_rec(t, 0);
        std::stable_sort(terms.begin(), terms.end(), [](const Expr& a, const Expr& b) {
            return serialize(a) < serialize(b);
        });
        Expr acc = terms.front();
        for (std::size_t k = 1; k < terms.size(); ++k) acc = Expr::binary(n.op, acc, terms[k]);
        return acc;
    }
    return Expr::binary(n.op, canonicalize_rec(e, e.left_child(i)),
                        canonicalize_rec(e, e.right_child(i)));
}

}  // namespace

Expr canonicalize(const Expr& e) {
    if (e.empty()) return e;
    return canonicalize_rec(simplify(e), 0);
}

bool structurally_equal(const Expr& a, const Expr& b, double const_rel_tol) {
    if (a.size() != b.size()) return false;
    for (int i = 0; i < a.size(); ++i) {
        const ExprNode& na = a.node(i);
        const ExprNode& nb = b.node(i);
        if (na.kind != nb.kind) return false;
        switch (na.kind) {
            case ExprNode::Kind::Op:
                if (na.op != nb.op) return false;
                break;
            case ExprNode::Kind::Variable:
                if (na.var != nb.var) return false;
                break;
            case ExprNode::Kind::Constant: {
                const double scale = std::max({1e-300, std::abs(na.value), std::abs(nb.value)});
                if (std::abs(na.value - nb.value) > const_rel_tol * scale) return false;
                break;
            }
        }
    }
    return true;
}

}  // namespace kinforge
