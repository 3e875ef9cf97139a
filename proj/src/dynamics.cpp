#include "pwsc/dynamics.hpp"

#include <fmt/format.h>

#include <cmath>

namespace pwsc {

namespace {

Matrix eval_jacobian(const std::vector<std::vector<expr::Expr>>& jac, const Vector& x) {
    const auto rows = static_cast<Eigen::Index>(jac.size());
    const auto cols = static_cast<Eigen::Index>(x.size());
    Matrix out(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const auto& row = jac[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = row[static_cast<std::size_t>(j)].eval(x);
    }
    return out;
}

void require_state(const Vector& x, std::size_t n) {
    if (static_cast<std::size_t>(x.size()) != n) {
        throw DimensionError(fmt::format("state has size {}, expected {}", x.size(), n));
    }
}

}  // namespace

SymbolicField::SymbolicField(expr::VectorExpr components)
    : components_(std::move(components)), jac_(components_.jacobian()) {
    if (components_.size() != components_.state_dim()) {
        throw DimensionError(fmt::format("vector field has {} components over {} variables", components_.size(),
                                         components_.state_dim()));
    }
}

Matrix SymbolicField::jacobian(const Vector& x) const {
    require_state(x, dim());
    return eval_jacobian(jac_, x);
}

void ControlledSystem::validate() const {
    if (f.size() != n() || f.state_dim() != n()) {
        throw DimensionError(fmt::format("f has {} components, expected {}", f.size(), n()));
    }
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (g[i].size() != n() || g[i].state_dim() != n()) {
            throw DimensionError(fmt::format("column {} of g has {} components, expected {}", i, g[i].size(), n()));
        }
    }
}

ControlledSystem ControlledSystem::parse(std::vector<std::string> vars, const std::vector<std::string>& f,
                                         const std::vector<std::vector<std::string>>& g_columns) {
    ControlledSystem sys;
    sys.f = expr::VectorExpr::parse(f, vars);
    for (const auto& col : g_columns) sys.g.push_back(expr::VectorExpr::parse(col, vars));
    sys.vars = std::move(vars);
    sys.validate();
    return sys;
}

Matrix ControlledSystem::g_at(const Vector& x) const {
    Matrix out(static_cast<Eigen::Index>(n()), static_cast<Eigen::Index>(m()));
    for (std::size_t i = 0; i < g.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = g[i].eval(x);
    return out;
}

ControlledField::ControlledField(const ControlledSystem& sys, expr::VectorExpr u)
    : f_(sys.f), g_(sys.g), u_(std::move(u)), jf_(f_.jacobian()), ju_(u_.jacobian()) {
    sys.validate();
    if (u_.size() != g_.size()) {
        throw DimensionError(fmt::format("control has {} components but g has {} columns", u_.size(), g_.size()));
    }
    if (u_.state_dim() != sys.n()) {
        throw DimensionError(fmt::format("control is defined over {} variables, expected {}", u_.state_dim(), sys.n()));
    }
    jg_.reserve(g_.size());
    for (const auto& col : g_) jg_.push_back(col.jacobian());
}

Vector ControlledField::value(const Vector& x) const {
    require_state(x, dim());
    Vector out = f_.eval(x);
    const Vector u = u_.eval(x);
    for (std::size_t i = 0; i < g_.size(); ++i) {
        const double ui = u(static_cast<Eigen::Index>(i));
        if (ui != 0.0) out += g_[i].eval(x) * ui;
    }
    return out;
}

Matrix ControlledField::jacobian(const Vector& x) const {
    require_state(x, dim());
    Matrix jac = eval_jacobian(jf_, x);
    const Vector u = u_.eval(x);
    for (std::size_t i = 0; i < g_.size(); ++i) {
        const double ui = u(static_cast<Eigen::Index>(i));
        if (ui != 0.0) jac += eval_jacobian(jg_[i], x) * ui;
        const Matrix du = eval_jacobian({ju_[i]}, x);  // 1 x n row
        if (!du.isZero(0.0)) jac += g_[i].eval(x) * du;
    }
    return jac;
}

ClosedLoopField assemble_closed_loop(const ControlledSystem& sys, const SwitchedController& ctl) {
    if (ctl.u_plus.size() != sys.m() || ctl.u_minus.size() != sys.m()) {
        throw DimensionError(fmt::format("u+ has {} and u- has {} components but g has {} columns", ctl.u_plus.size(),
                                         ctl.u_minus.size(), sys.m()));
    }
    if (ctl.surface && ctl.surface->dim() != sys.n()) {
        throw DimensionError(fmt::format("switching function is over {} variables, expected {}", ctl.surface->dim(),
                                         sys.n()));
    }
    return {std::make_shared<ControlledField>(sys, ctl.u_plus), std::make_shared<ControlledField>(sys, ctl.u_minus)};
}

Matrix jump_matrix(const ControlledSystem& sys, const SwitchedController& ctl, const Vector& x, double sigma_tol) {
    require_state(x, sys.n());
    if (!ctl.surface) throw SurfaceError("controller has no switching function");
    const double h = ctl.surface->value(x);
    if (std::abs(h) > sigma_tol) {
        throw SurfaceError(fmt::format("point is not on the switching manifold (|H| = {:.3g})", std::abs(h)));
    }
    const Vector grad = ctl.surface->gradient(x);
    if (grad.norm() <= kMinGradientNorm) {
        throw SurfaceError("gradient of the switching function vanishes on the manifold");
    }
    const Vector jump = sys.g_at(x) * (ctl.u_plus.eval(x) - ctl.u_minus.eval(x));
    return jump * grad.transpose();
}

}  // namespace pwsc
