#pragma once

// Scalar arithmetic expressions over a fixed list of state variables.
//
// Grammar (lowest to highest precedence):
//
//   sum     := product (('+' | '-') product)*
//   product := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := atom ('^' integer)?
//   atom    := number | identifier | 'abs' '(' sum ')' | 'sign' '(' sum ')' | '(' sum ')'
//
// '^' binds tighter than unary minus, so "-x2^2" is -(x2^2). Exponents are
// non-negative integer literals; chained exponents need parentheses.

#include "pwsc/types.hpp"

#include <cstddef>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pwsc::expr {

enum class NodeKind { Constant, Variable, Neg, Abs, Sign, Add, Sub, Mul, Div, Pow };

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& message, std::size_t position);

    [[nodiscard]] std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

class EvalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Node;

/// Immutable expression handle. Copies share the underlying tree.
class Expr {
public:
    Expr();  // the constant 0

    static Expr constant(double value);
    static Expr variable(std::size_t index, std::string name);

    [[nodiscard]] NodeKind kind() const noexcept;
    [[nodiscard]] double value() const;  // Constant nodes only
    [[nodiscard]] std::size_t var_index() const;
    [[nodiscard]] const std::string& var_name() const;
    [[nodiscard]] unsigned exponent() const;  // Pow nodes only
    [[nodiscard]] std::span<const Expr> children() const noexcept;

    [[nodiscard]] bool is_constant() const noexcept { return kind() == NodeKind::Constant; }
    [[nodiscard]] bool is_constant(double v) const noexcept;

    /// Throws EvalError on division by zero.
    [[nodiscard]] double eval(std::span<const double> x) const;
    [[nodiscard]] double eval(const Vector& x) const {
        return eval(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
    }

    /// Fully parenthesised text that parses back to an equivalent tree.
    [[nodiscard]] std::string to_string() const;

    /// True if the tree contains abs or sign nodes.
    [[nodiscard]] bool has_kinks() const noexcept;

    friend Expr operator+(const Expr& a, const Expr& b);
    friend Expr operator-(const Expr& a, const Expr& b);
    friend Expr operator*(const Expr& a, const Expr& b);
    friend Expr operator/(const Expr& a, const Expr& b);
    friend Expr operator-(const Expr& a);
    friend Expr abs(const Expr& a);
    friend Expr sign(const Expr& a);
    friend Expr pow(const Expr& a, unsigned n);

private:
    friend class Parser;

    explicit Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
    // Builds the node as given, without folding.
    static Expr make(NodeKind kind, std::vector<Expr> children, unsigned exponent = 0);

    std::shared_ptr<const Node> node_;
};

Expr operator+(const Expr& a, const Expr& b);
Expr operator-(const Expr& a, const Expr& b);
Expr operator*(const Expr& a, const Expr& b);
Expr operator/(const Expr& a, const Expr& b);
Expr operator-(const Expr& a);
Expr abs(const Expr& a);
Expr sign(const Expr& a);
Expr pow(const Expr& a, unsigned n);

/// Variable names must be distinct identifiers; unknown identifiers are a ParseError.
[[nodiscard]] Expr parse(std::string_view text, std::span<const std::string> vars);

struct Derivative {
    Expr expr;
    // Derivative passes through abs(): sign(0) = 0 is used where the argument vanishes,
    // so the result is only a one-sided convention there.
    bool kinked = false;
};

[[nodiscard]] Derivative differentiate(const Expr& e, std::size_t var_index);

/// Ordered list of expressions sharing one variable list.
class VectorExpr {
public:
    VectorExpr() = default;
    VectorExpr(std::vector<Expr> components, std::vector<std::string> vars);

    static VectorExpr parse(std::span<const std::string> texts, std::span<const std::string> vars);
    static VectorExpr zeros(std::size_t size, std::vector<std::string> vars);

    [[nodiscard]] std::size_t size() const noexcept { return components_.size(); }
    [[nodiscard]] std::size_t state_dim() const noexcept { return vars_.size(); }
    [[nodiscard]] const std::vector<std::string>& vars() const noexcept { return vars_; }
    [[nodiscard]] const Expr& operator[](std::size_t i) const { return components_.at(i); }
    [[nodiscard]] const std::vector<Expr>& components() const noexcept { return components_; }

    [[nodiscard]] Vector eval(const Vector& x) const;

    /// Row-major symbolic Jacobian: entry (i, j) is d component_i / d x_j.
    [[nodiscard]] std::vector<std::vector<Expr>> jacobian() const;

    [[nodiscard]] bool is_zero() const noexcept;

private:
    std::vector<Expr> components_;
    std::vector<std::string> vars_;
};

}  // namespace pwsc::expr
