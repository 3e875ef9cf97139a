#pragma once

// Open-loop and switched closed-loop vector fields with exact Jacobians.
//
// For the control-affine system  x' = f(x) + g(x) u(x)  with the switching law
// u = u+ on {H > 0}, u = u- on {H < 0}, the two closed-loop modes are
//
//   F+-(x) = f(x) + sum_i g_i(x) u+-_i(x)
//   dF+-/dx = df/dx + sum_i ( dg_i/dx u+-_i(x) + g_i(x) du+-_i/dx )
//
// where g_i is the i-th column of g. Jacobians are built from symbolic
// derivatives and evaluated numerically; nothing here uses finite differences.

#include "pwsc/expr.hpp"
#include "pwsc/surface.hpp"
#include "pwsc/types.hpp"

#include <memory>
#include <string>
#include <vector>

namespace pwsc {

class VectorField {
public:
    virtual ~VectorField() = default;
    [[nodiscard]] virtual std::size_t dim() const noexcept = 0;
    [[nodiscard]] virtual Vector value(const Vector& x) const = 0;
    [[nodiscard]] virtual Matrix jacobian(const Vector& x) const = 0;
};

using FieldPtr = std::shared_ptr<const VectorField>;

/// Autonomous field given componentwise by expressions.
class SymbolicField final : public VectorField {
public:
    explicit SymbolicField(expr::VectorExpr components);

    [[nodiscard]] std::size_t dim() const noexcept override { return components_.size(); }
    [[nodiscard]] Vector value(const Vector& x) const override { return components_.eval(x); }
    [[nodiscard]] Matrix jacobian(const Vector& x) const override;

    [[nodiscard]] const expr::VectorExpr& components() const noexcept { return components_; }

private:
    expr::VectorExpr components_;
    std::vector<std::vector<expr::Expr>> jac_;
};

/// x' = f(x) + g(x) u, with g given column by column.
struct ControlledSystem {
    std::vector<std::string> vars;
    expr::VectorExpr f;
    std::vector<expr::VectorExpr> g;

    [[nodiscard]] std::size_t n() const noexcept { return vars.size(); }
    [[nodiscard]] std::size_t m() const noexcept { return g.size(); }

    /// Throws DimensionError if f or a column of g does not have n components.
    void validate() const;

    static ControlledSystem parse(std::vector<std::string> vars, const std::vector<std::string>& f,
                                  const std::vector<std::vector<std::string>>& g_columns);

    [[nodiscard]] Matrix g_at(const Vector& x) const;
};

struct SwitchedController {
    expr::VectorExpr u_plus;
    expr::VectorExpr u_minus;
    SurfacePtr surface;

    [[nodiscard]] std::size_t m() const noexcept { return u_plus.size(); }
};

/// f + g u for one smooth feedback u, Jacobian via the product rule.
class ControlledField final : public VectorField {
public:
    ControlledField(const ControlledSystem& sys, expr::VectorExpr u);

    [[nodiscard]] std::size_t dim() const noexcept override { return f_.size(); }
    [[nodiscard]] Vector value(const Vector& x) const override;
    [[nodiscard]] Matrix jacobian(const Vector& x) const override;

    [[nodiscard]] Vector control(const Vector& x) const { return u_.eval(x); }

private:
    expr::VectorExpr f_;
    std::vector<expr::VectorExpr> g_;
    expr::VectorExpr u_;
    std::vector<std::vector<expr::Expr>> jf_;
    std::vector<std::vector<std::vector<expr::Expr>>> jg_;
    std::vector<std::vector<expr::Expr>> ju_;
};

struct ClosedLoopField {
    FieldPtr plus;
    FieldPtr minus;
};

/// Throws DimensionError when u+/u- length differs from the number of g columns
/// or the surface dimension differs from the state dimension.
[[nodiscard]] ClosedLoopField assemble_closed_loop(const ControlledSystem& sys, const SwitchedController& ctl);

[[nodiscard]] inline Matrix jacobian(const VectorField& field, const Vector& x) { return field.jacobian(x); }

class SurfaceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Gradients with norm at or below this are treated as vanishing.
inline constexpr double kMinGradientNorm = 1e-9;

/// Outer product (g(x) [u+(x) - u-(x)]) grad H(x)^T for x on the switching
/// manifold. Throws SurfaceError if |H(x)| > sigma_tol or grad H vanishes.
[[nodiscard]] Matrix jump_matrix(const ControlledSystem& sys, const SwitchedController& ctl, const Vector& x,
                                 double sigma_tol = 1e-8);

}  // namespace pwsc
