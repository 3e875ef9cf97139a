#include "pwsc/expr.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>
#include <set>

namespace pwsc::expr {

struct Node {
    NodeKind kind = NodeKind::Constant;
    double value = 0.0;
    std::size_t index = 0;
    std::string name;
    unsigned exponent = 0;
    std::vector<Expr> children;
};

ParseError::ParseError(const std::string& message, std::size_t position)
    : std::runtime_error(fmt::format("{} (at position {})", message, position)), position_(position) {}

Expr::Expr() : Expr(constant(0.0)) {}

Expr Expr::constant(double value) {
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::Constant;
    n->value = value;
    return Expr(std::move(n));
}

Expr Expr::variable(std::size_t index, std::string name) {
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::Variable;
    n->index = index;
    n->name = std::move(name);
    return Expr(std::move(n));
}

Expr Expr::make(NodeKind kind, std::vector<Expr> children, unsigned exponent) {
    auto n = std::make_shared<Node>();
    n->kind = kind;
    n->exponent = exponent;
    n->children = std::move(children);
    return Expr(std::move(n));
}

NodeKind Expr::kind() const noexcept { return node_->kind; }

double Expr::value() const {
    if (node_->kind != NodeKind::Constant) {
        throw std::logic_error("value() on a non-constant expression");
    }
    return node_->value;
}

std::size_t Expr::var_index() const {
    if (node_->kind != NodeKind::Variable) {
        throw std::logic_error("var_index() on a non-variable expression");
    }
    return node_->index;
}

const std::string& Expr::var_name() const {
    if (node_->kind != NodeKind::Variable) {
        throw std::logic_error("var_name() on a non-variable expression");
    }
    return node_->name;
}

unsigned Expr::exponent() const {
    if (node_->kind != NodeKind::Pow) {
        throw std::logic_error("exponent() on a non-power expression");
    }
    return node_->exponent;
}

std::span<const Expr> Expr::children() const noexcept { return node_->children; }

bool Expr::is_constant(double v) const noexcept {
    return node_->kind == NodeKind::Constant && node_->value == v;
}

namespace {

double ipow(double base, unsigned n) {
    double result = 1.0;
    while (n > 0) {
        if (n & 1U) result *= base;
        base *= base;
        n >>= 1U;
    }
    return result;
}

double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

double Expr::eval(std::span<const double> x) const {
    const Node& n = *node_;
    switch (n.kind) {
    case NodeKind::Constant:
        return n.value;
    case NodeKind::Variable:
        if (n.index >= x.size()) {
            throw EvalError(fmt::format("variable '{}' out of range for a state of size {}", n.name, x.size()));
        }
        return x[n.index];
    case NodeKind::Neg:
        return -n.children[0].eval(x);
    case NodeKind::Abs:
        return std::abs(n.children[0].eval(x));
    case NodeKind::Sign:
        return sign_of(n.children[0].eval(x));
    case NodeKind::Add:
        return n.children[0].eval(x) + n.children[1].eval(x);
    case NodeKind::Sub:
        return n.children[0].eval(x) - n.children[1].eval(x);
    case NodeKind::Mul:
        return n.children[0].eval(x) * n.children[1].eval(x);
    case NodeKind::Div: {
        const double num = n.children[0].eval(x);
        const double den = n.children[1].eval(x);
        if (den == 0.0) {
            throw EvalError("division by zero in " + to_string());
        }
        return num / den;
    }
    case NodeKind::Pow:
        return ipow(n.children[0].eval(x), n.exponent);
    }
    return 0.0;
}

std::string Expr::to_string() const {
    const Node& n = *node_;
    switch (n.kind) {
    case NodeKind::Constant:
        return n.value < 0.0 || std::signbit(n.value) ? fmt::format("(-{})", -n.value) : fmt::format("{}", n.value);
    case NodeKind::Variable:
        return n.name;
    case NodeKind::Neg:
        return "(-" + n.children[0].to_string() + ")";
    case NodeKind::Abs:
        return "abs(" + n.children[0].to_string() + ")";
    case NodeKind::Sign:
        return "sign(" + n.children[0].to_string() + ")";
    case NodeKind::Add:
        return "(" + n.children[0].to_string() + " + " + n.children[1].to_string() + ")";
    case NodeKind::Sub:
        return "(" + n.children[0].to_string() + " - " + n.children[1].to_string() + ")";
    case NodeKind::Mul:
        return "(" + n.children[0].to_string() + "*" + n.children[1].to_string() + ")";
    case NodeKind::Div:
        return "(" + n.children[0].to_string() + "/" + n.children[1].to_string() + ")";
    case NodeKind::Pow: {
        std::string base = n.children[0].to_string();
        if (n.children[0].kind() == NodeKind::Pow) base = "(" + base + ")";
        return base + "^" + std::to_string(n.exponent);
    }
    }
    return {};
}

bool Expr::has_kinks() const noexcept {
    if (node_->kind == NodeKind::Abs || node_->kind == NodeKind::Sign) return true;
    return std::any_of(node_->children.begin(), node_->children.end(),
                       [](const Expr& c) { return c.has_kinks(); });
}

// Folding operators. The parser bypasses these so that parsed trees keep
// their written shape (including divisions that fail at evaluation time).

Expr operator+(const Expr& a, const Expr& b) {
    if (a.is_constant() && b.is_constant()) return Expr::constant(a.value() + b.value());
    if (a.is_constant(0.0)) return b;
    if (b.is_constant(0.0)) return a;
    return Expr::make(NodeKind::Add, {a, b});
}

Expr operator-(const Expr& a, const Expr& b) {
    if (a.is_constant() && b.is_constant()) return Expr::constant(a.value() - b.value());
    if (b.is_constant(0.0)) return a;
    if (a.is_constant(0.0)) return -b;
    return Expr::make(NodeKind::Sub, {a, b});
}

Expr operator*(const Expr& a, const Expr& b) {
    if (a.is_constant() && b.is_constant()) return Expr::constant(a.value() * b.value());
    if (a.is_constant(0.0) || b.is_constant(0.0)) return Expr::constant(0.0);
    if (a.is_constant(1.0)) return b;
    if (b.is_constant(1.0)) return a;
    if (a.is_constant(-1.0)) return -b;
    if (b.is_constant(-1.0)) return -a;
    return Expr::make(NodeKind::Mul, {a, b});
}

Expr operator/(const Expr& a, const Expr& b) {
    if (a.is_constant() && b.is_constant() && b.value() != 0.0) return Expr::constant(a.value() / b.value());
    if (b.is_constant(1.0)) return a;
    return Expr::make(NodeKind::Div, {a, b});
}

Expr operator-(const Expr& a) {
    if (a.is_constant()) return Expr::constant(-a.value());
    if (a.kind() == NodeKind::Neg) return a.children()[0];
    return Expr::make(NodeKind::Neg, {a});
}

Expr abs(const Expr& a) {
    if (a.is_constant()) return Expr::constant(std::abs(a.value()));
    if (a.kind() == NodeKind::Abs) return a;
    return Expr::make(NodeKind::Abs, {a});
}

Expr sign(const Expr& a) {
    if (a.is_constant()) return Expr::constant(sign_of(a.value()));
    return Expr::make(NodeKind::Sign, {a});
}

Expr pow(const Expr& a, unsigned n) {
    if (n == 0) return Expr::constant(1.0);
    if (n == 1) return a;
    if (a.is_constant()) return Expr::constant(ipow(a.value(), n));
    return Expr::make(NodeKind::Pow, {a}, n);
}

// ---------------------------------------------------------------------------

class Parser {
public:
    Parser(std::string_view text, std::span<const std::string> vars) : text_(text), vars_(vars) {}

    Expr run() {
        skip_ws();
        if (pos_ >= text_.size()) throw ParseError("empty expression", pos_);
        Expr e = sum();
        skip_ws();
        if (pos_ < text_.size()) {
            throw ParseError(fmt::format("unexpected '{}'", text_[pos_]), pos_);
        }
        return e;
    }

private:
    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!accept(c)) {
            throw ParseError(pos_ < text_.size() ? fmt::format("expected '{}' but found '{}'", c, text_[pos_])
                                                 : fmt::format("expected '{}' at end of input", c),
                             pos_);
        }
    }

    // Operands are parsed before building the node: GCC < 13 leaks the
    // already-copied elements of an initializer list when a later one throws.
    Expr sum() {
        Expr lhs = product();
        for (;;) {
            if (accept('+')) {
                Expr rhs = product();
                lhs = Expr::make(NodeKind::Add, {lhs, rhs});
            } else if (accept('-')) {
                Expr rhs = product();
                lhs = Expr::make(NodeKind::Sub, {lhs, rhs});
            } else {
                return lhs;
            }
        }
    }

    Expr product() {
        Expr lhs = unary();
        for (;;) {
            if (accept('*')) {
                Expr rhs = unary();
                lhs = Expr::make(NodeKind::Mul, {lhs, rhs});
            } else if (accept('/')) {
                Expr rhs = unary();
                lhs = Expr::make(NodeKind::Div, {lhs, rhs});
            } else {
                return lhs;
            }
        }
    }

    Expr unary() {
        if (accept('-')) return -unary();
        if (accept('+')) return unary();
        return power();
    }

    Expr power() {
        Expr base = atom();
        if (!accept('^')) return base;
        skip_ws();
        const std::size_t start = pos_;
        std::size_t end = start;
        while (end < text_.size() && std::isdigit(static_cast<unsigned char>(text_[end]))) ++end;
        const bool fractional = end < text_.size() && (text_[end] == '.' || text_[end] == 'e' || text_[end] == 'E');
        if (end == start || fractional) {
            throw ParseError("exponent must be a non-negative integer literal", start);
        }
        unsigned n = 0;
        auto [ptr, ec] = std::from_chars(text_.data() + start, text_.data() + end, n);
        if (ec != std::errc{}) throw ParseError("exponent out of range", start);
        pos_ = end;
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == '^') {
            throw ParseError("chained '^' is ambiguous; use parentheses", pos_);
        }
        return Expr::make(NodeKind::Pow, {base}, n);
    }

    Expr atom() {
        skip_ws();
        if (pos_ >= text_.size()) throw ParseError("unexpected end of input", pos_);
        const char c = text_[pos_];
        if (c == '(') {
            ++pos_;
            Expr e = sum();
            expect(')');
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
        throw ParseError(fmt::format("unexpected '{}'", c), pos_);
    }

    Expr number() {
        const std::size_t start = pos_;
        std::size_t end = pos_;
        auto digits = [&] {
            while (end < text_.size() && std::isdigit(static_cast<unsigned char>(text_[end]))) ++end;
        };
        digits();
        if (end < text_.size() && text_[end] == '.') {
            ++end;
            digits();
        }
        if (end < text_.size() && (text_[end] == 'e' || text_[end] == 'E')) {
            std::size_t probe = end + 1;
            if (probe < text_.size() && (text_[probe] == '+' || text_[probe] == '-')) ++probe;
            if (probe < text_.size() && std::isdigit(static_cast<unsigned char>(text_[probe]))) {
                end = probe;
                digits();
            }
        }
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(text_.data() + start, text_.data() + end, v);
        if (ec != std::errc{} || ptr != text_.data() + end || !std::isfinite(v)) {
            throw ParseError("malformed number", start);
        }
        pos_ = end;
        return Expr::constant(v);
    }

    Expr identifier() {
        const std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
            ++pos_;
        }
        const std::string_view name = text_.substr(start, pos_ - start);
        if (name == "abs" || name == "sign") {
            expect('(');
            Expr arg = sum();
            expect(')');
            return Expr::make(name == "abs" ? NodeKind::Abs : NodeKind::Sign, {arg});
        }
        for (std::size_t i = 0; i < vars_.size(); ++i) {
            if (vars_[i] == name) return Expr::variable(i, std::string(name));
        }
        throw ParseError(fmt::format("unknown identifier '{}'", name), start);
    }

    std::string_view text_;
    std::span<const std::string> vars_;
    std::size_t pos_ = 0;
};

namespace {

bool is_identifier(const std::string& s) {
    if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
    return std::all_of(s.begin(), s.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; });
}

void validate_vars(std::span<const std::string> vars) {
    std::set<std::string> seen;
    for (const auto& v : vars) {
        if (!is_identifier(v) || v == "abs" || v == "sign") {
            throw std::invalid_argument(fmt::format("'{}' is not a valid variable name", v));
        }
        if (!seen.insert(v).second) {
            throw std::invalid_argument(fmt::format("duplicate variable name '{}'", v));
        }
    }
}

}  // namespace

Expr parse(std::string_view text, std::span<const std::string> vars) {
    validate_vars(vars);
    return Parser(text, vars).run();
}

Derivative differentiate(const Expr& e, std::size_t var_index) {
    switch (e.kind()) {
    case NodeKind::Constant:
        return {Expr::constant(0.0), false};
    case NodeKind::Variable:
        return {Expr::constant(e.var_index() == var_index ? 1.0 : 0.0), false};
    case NodeKind::Neg: {
        auto d = differentiate(e.children()[0], var_index);
        return {-d.expr, d.kinked};
    }
    case NodeKind::Abs: {
        const Expr& u = e.children()[0];
        auto d = differentiate(u, var_index);
        if (d.expr.is_constant(0.0)) return {d.expr, d.kinked};
        return {sign(u) * d.expr, true};
    }
    case NodeKind::Sign:
        return {Expr::constant(0.0), true};
    case NodeKind::Add:
    case NodeKind::Sub: {
        auto da = differentiate(e.children()[0], var_index);
        auto db = differentiate(e.children()[1], var_index);
        Expr r = e.kind() == NodeKind::Add ? da.expr + db.expr : da.expr - db.expr;
        return {r, da.kinked || db.kinked};
    }
    case NodeKind::Mul: {
        const Expr& a = e.children()[0];
        const Expr& b = e.children()[1];
        auto da = differentiate(a, var_index);
        auto db = differentiate(b, var_index);
        return {da.expr * b + a * db.expr, da.kinked || db.kinked};
    }
    case NodeKind::Div: {
        const Expr& a = e.children()[0];
        const Expr& b = e.children()[1];
        auto da = differentiate(a, var_index);
        auto db = differentiate(b, var_index);
        Expr r = da.expr / b - (a * db.expr) / pow(b, 2);
        return {r, da.kinked || db.kinked};
    }
    case NodeKind::Pow: {
        const Expr& u = e.children()[0];
        const unsigned n = e.exponent();
        auto d = differentiate(u, var_index);
        return {Expr::constant(static_cast<double>(n)) * pow(u, n - 1) * d.expr, d.kinked};
    }
    }
    return {};
}

// ---------------------------------------------------------------------------

VectorExpr::VectorExpr(std::vector<Expr> components, std::vector<std::string> vars)
    : components_(std::move(components)), vars_(std::move(vars)) {}

VectorExpr VectorExpr::parse(std::span<const std::string> texts, std::span<const std::string> vars) {
    std::vector<Expr> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(expr::parse(t, vars));
    return VectorExpr(std::move(out), std::vector<std::string>(vars.begin(), vars.end()));
}

VectorExpr VectorExpr::zeros(std::size_t size, std::vector<std::string> vars) {
    return VectorExpr(std::vector<Expr>(size, Expr::constant(0.0)), std::move(vars));
}

Vector VectorExpr::eval(const Vector& x) const {
    if (static_cast<std::size_t>(x.size()) != vars_.size()) {
        throw DimensionError(fmt::format("state has size {}, expected {}", x.size(), vars_.size()));
    }
    Vector out(static_cast<Eigen::Index>(components_.size()));
    for (std::size_t i = 0; i < components_.size(); ++i) out(static_cast<Eigen::Index>(i)) = components_[i].eval(x);
    return out;
}

std::vector<std::vector<Expr>> VectorExpr::jacobian() const {
    std::vector<std::vector<Expr>> jac(components_.size());
    for (std::size_t i = 0; i < components_.size(); ++i) {
        jac[i].reserve(vars_.size());
        for (std::size_t j = 0; j < vars_.size(); ++j) jac[i].push_back(differentiate(components_[i], j).expr);
    }
    return jac;
}

bool VectorExpr::is_zero() const noexcept {
    return std::all_of(components_.begin(), components_.end(), [](const Expr& e) { return e.is_constant(0.0); });
}

}  // namespace pwsc::expr
