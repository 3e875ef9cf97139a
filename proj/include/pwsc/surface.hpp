#pragma once

#include "pwsc/expr.hpp"
#include "pwsc/types.hpp"

#include <memory>
#include <string>
#include <vector>

namespace pwsc {

/// Scalar function H whose zero set is the switching manifold. Positive side is S+.
class SwitchingSurface {
public:
    virtual ~SwitchingSurface() = default;

    [[nodiscard]] virtual std::size_t dim() const noexcept = 0;
    [[nodiscard]] virtual double value(const Vector& x) const = 0;
    [[nodiscard]] virtual Vector gradient(const Vector& x) const = 0;
    [[nodiscard]] virtual std::string describe() const = 0;

    /// True where several smooth pieces of H attain the value within `tol`, i.e.
    /// where the gradient is not well defined. Smooth surfaces never tie.
    [[nodiscard]] virtual bool is_branch_tie(const Vector& /*x*/, double /*tol*/) const { return false; }
};

using SurfacePtr = std::shared_ptr<const SwitchingSurface>;

/// Maximum of one or more smooth expressions; a single branch is an ordinary
/// smooth H. The gradient is taken from the branch attaining the maximum
/// (the first one in declaration order on exact ties).
class ExprSurface final : public SwitchingSurface {
public:
    ExprSurface(expr::Expr h, std::size_t dim);
    ExprSurface(std::vector<expr::Expr> branches, std::size_t dim);

    static SurfacePtr parse(const std::string& text, const std::vector<std::string>& vars);

    [[nodiscard]] std::size_t dim() const noexcept override { return dim_; }
    [[nodiscard]] double value(const Vector& x) const override;
    [[nodiscard]] Vector gradient(const Vector& x) const override;
    [[nodiscard]] std::string describe() const override;
    [[nodiscard]] bool is_branch_tie(const Vector& x, double tol) const override;

    [[nodiscard]] const std::vector<expr::Expr>& branches() const noexcept { return branches_; }
    [[nodiscard]] std::size_t active_branch(const Vector& x) const;

private:
    std::vector<expr::Expr> branches_;
    std::vector<std::vector<expr::Expr>> gradients_;
    std::size_t dim_ = 0;
};

/// Negated surface: swaps the roles of S+ and S-.
class FlippedSurface final : public SwitchingSurface {
public:
    explicit FlippedSurface(SurfacePtr inner) : inner_(std::move(inner)) {}

    [[nodiscard]] std::size_t dim() const noexcept override { return inner_->dim(); }
    [[nodiscard]] double value(const Vector& x) const override { return -inner_->value(x); }
    [[nodiscard]] Vector gradient(const Vector& x) const override { return -inner_->gradient(x); }
    [[nodiscard]] std::string describe() const override { return "-(" + inner_->describe() + ")"; }
    [[nodiscard]] bool is_branch_tie(const Vector& x, double tol) const override { return inner_->is_branch_tie(x, tol); }

private:
    SurfacePtr inner_;
};

}  // namespace pwsc
