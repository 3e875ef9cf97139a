#include "pwsc/surface.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <stdexcept>

namespace pwsc {

ExprSurface::ExprSurface(expr::Expr h, std::size_t dim) : ExprSurface(std::vector<expr::Expr>{std::move(h)}, dim) {}

ExprSurface::ExprSurface(std::vector<expr::Expr> branches, std::size_t dim)
    : branches_(std::move(branches)), dim_(dim) {
    if (branches_.empty()) throw std::invalid_argument("switching surface needs at least one branch");
    for (const auto& b : branches_) {
        std::vector<expr::Expr> grad;
        grad.reserve(dim_);
        for (std::size_t j = 0; j < dim_; ++j) grad.push_back(expr::differentiate(b, j).expr);
        gradients_.push_back(std::move(grad));
    }
}

SurfacePtr ExprSurface::parse(const std::string& text, const std::vector<std::string>& vars) {
    return std::make_shared<ExprSurface>(expr::parse(text, vars), vars.size());
}

std::size_t ExprSurface::active_branch(const Vector& x) const {
    std::size_t best = 0;
    double best_value = branches_[0].eval(x);
    for (std::size_t i = 1; i < branches_.size(); ++i) {
        const double v = branches_[i].eval(x);
        if (v > best_value) {
            best_value = v;
            best = i;
        }
    }
    return best;
}

double ExprSurface::value(const Vector& x) const {
    double best = branches_[0].eval(x);
    for (std::size_t i = 1; i < branches_.size(); ++i) best = std::max(best, branches_[i].eval(x));
    return best;
}

Vector ExprSurface::gradient(const Vector& x) const {
    const auto& grad = gradients_[active_branch(x)];
    Vector out(static_cast<Eigen::Index>(dim_));
    for (std::size_t j = 0; j < dim_; ++j) out(static_cast<Eigen::Index>(j)) = grad[j].eval(x);
    return out;
}

std::string ExprSurface::describe() const {
    if (branches_.size() == 1) return branches_[0].to_string();
    std::string out = "max{";
    for (std::size_t i = 0; i < branches_.size(); ++i) {
        if (i > 0) out += "; ";
        out += branches_[i].to_string();
    }
    return out + "}";
}

bool ExprSurface::is_branch_tie(const Vector& x, double tol) const {
    if (branches_.size() < 2) return false;
    const std::size_t active = active_branch(x);
    const double top = branches_[active].eval(x);
    for (std::size_t i = 0; i < branches_.size(); ++i) {
        if (i != active && top - branches_[i].eval(x) <= tol) return true;
    }
    return false;
}

}  // namespace pwsc
