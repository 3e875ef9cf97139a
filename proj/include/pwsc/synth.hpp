#pragma once

// Switching-controller design around the open-loop contraction region.
//
// With H(x) = mu(df/dx(x)) + c_bar the open loop already contracts at rate
// c_bar on S- = {H < 0}, so u- = 0 there. On S+ = {H > 0} a feedback u+ is
// picked from a declared template
//
//   u+_i(x) = sum_j k_ij b_ij(x),   b_ij in {x_1, ..., x_n, x_1^2, ..., x_n^2}
//
// by scanning a gain lattice for the smallest gain (Euclidean norm, then
// lexicographic order) whose closed loop satisfies the S+ and manifold
// conditions. The result always carries a passing certificate.

#include "pwsc/certify.hpp"
#include "pwsc/dynamics.hpp"
#include "pwsc/expr.hpp"
#include "pwsc/measures.hpp"
#include "pwsc/surface.hpp"

#include <json.hpp>

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pwsc {

/// lambda_max of the symmetric part of df/dx, plus an offset. The gradient is
/// v^T (dS/dx_k) v for the top unit eigenvector v, which is exact wherever the
/// top eigenvalue is simple; repeated top eigenvalues count as branch ties.
class SpectralMeasureSurface final : public SwitchingSurface {
public:
    SpectralMeasureSurface(const expr::VectorExpr& f, double offset);

    [[nodiscard]] std::size_t dim() const noexcept override { return n_; }
    [[nodiscard]] double value(const Vector& x) const override;
    [[nodiscard]] Vector gradient(const Vector& x) const override;
    [[nodiscard]] std::string describe() const override;
    [[nodiscard]] bool is_branch_tie(const Vector& x, double tol) const override;

private:
    [[nodiscard]] Matrix sym_jacobian(const Vector& x) const;

    std::size_t n_;
    double offset_;
    std::vector<std::vector<expr::Expr>> jac_;
    std::vector<std::vector<std::vector<expr::Expr>>> hess_;  // [i][j][k] = d J_ij / dx_k
};

struct BuiltSurface {
    SurfacePtr h;
    std::string description;
};

/// H(x) = mu_kind(df/dx(x)) + c_bar. For the 1- and inf-measures the result is
/// a max of smooth branches, one per column or row:
///   column j: J_jj + sum_{i != j} |J_ij| + c_bar
///   row i:    J_ii + sum_{j != i} |J_ij| + c_bar
[[nodiscard]] BuiltSurface build_H(const ControlledSystem& sys, MeasureKind kind, double c_bar);

/// S+ is empty: the open loop already contracts at the target rate on the region.
class AlreadyContracting : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Splits the design region by the sign of H. Throws AlreadyContracting when
/// no node has H > 0.
[[nodiscard]] Partition partition_regions(const SwitchingSurface& h, const RegionSpec& region,
                                          const CertifyOptions& opts = {});

struct DesignSpec {
    ControlledSystem system;
    double c_bar = 1.0;
    MeasureKind kind = MeasureKind::One;
    RegionSpec region;
    /// basis[i] lists the template functions of input channel i.
    std::vector<std::vector<expr::Expr>> basis;
    /// Gain bounds, one entry per template function in channel-major order, or
    /// a single entry applied to every gain.
    std::vector<double> gain_lower{-10.0};
    std::vector<double> gain_upper{0.0};
    double gain_step = 0.5;
    CertifyOptions options;

    /// Throws std::invalid_argument on an invalid template or bounds.
    void validate() const;
    [[nodiscard]] std::size_t gain_count() const;
};

struct DesignResult {
    std::string h_expression;
    std::string sigma_description;
    std::vector<double> gains;
    expr::VectorExpr u_plus;
    expr::VectorExpr u_minus;
    SurfacePtr surface;
    Certificate certificate;
    bool already_contracting = false;
    std::size_t candidates_evaluated = 0;

    [[nodiscard]] SwitchedController controller() const { return {u_plus, u_minus, surface}; }
};

/// No lattice gain satisfies the conditions. `best_margin` is the smallest
/// violation max(worst mu + c_bar on closure of S+, worst |mu| on the
/// manifold) seen over the lattice.
class SearchFailure : public std::runtime_error {
public:
    SearchFailure(const std::string& message, std::vector<double> best_gains, double best_margin);

    [[nodiscard]] const std::vector<double>& best_gains() const noexcept { return best_gains_; }
    [[nodiscard]] double best_margin() const noexcept { return best_margin_; }

private:
    std::vector<double> best_gains_;
    double best_margin_;
};

/// u+ = sum k_ij b_ij per channel for a flat gain vector.
[[nodiscard]] expr::VectorExpr template_control(const DesignSpec& spec, const std::vector<double>& gains);

/// Lattice points for every gain, sorted by (norm, lexicographic).
[[nodiscard]] std::vector<std::vector<double>> gain_candidates(const DesignSpec& spec);

[[nodiscard]] DesignResult gain_search(const DesignSpec& spec);

[[nodiscard]] nlohmann::json to_json(const DesignResult& result);

}  // namespace pwsc
