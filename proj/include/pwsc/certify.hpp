#pragma once

// Sampled certificates of contraction and incremental exponential stability.
//
// A smooth field is contracting at rate c on a region when
// mu(df/dx(x)) <= -c at every point. For a bimodal Filippov system the
// certificate has three parts, checked on a grid over an axis-aligned box:
//
//   1. mu(dF+/dx) <= -c1 on the closure of S+ = {H > 0}
//   2. mu(dF-/dx) <= -c2 on the closure of S- = {H < 0}
//   3. mu((F+ - F-) grad H^T) = 0 on the manifold {H = 0}
//
// and, when all hold, every pair of solutions satisfies
// |x(t) - y(t)| <= e^{-c (t - t0)} |x0 - y0| with c = min(c1, c2).
//
// These are grid checks, not proofs: results list the worst sampled value and
// the grid spacing. Boxes are convex and therefore 1-reachable; predicate
// restricted regions are assumed to stay so.

#include "pwsc/dynamics.hpp"
#include "pwsc/filippov.hpp"
#include "pwsc/measures.hpp"
#include "pwsc/surface.hpp"
#include "pwsc/types.hpp"

#include <json.hpp>

#include <functional>
#include <limits>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pwsc {

class CertifyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class EmptyRegionError : public CertifyError {
public:
    using CertifyError::CertifyError;
};

class EmptySigmaError : public CertifyError {
public:
    using CertifyError::CertifyError;
};

/// Grid over an axis-aligned box, optionally restricted by a predicate.
struct RegionSpec {
    std::vector<double> lower;
    std::vector<double> upper;
    std::vector<std::size_t> resolution;  // nodes per axis, >= 2
    std::function<bool(const Vector&)> predicate;
    std::string predicate_text;
    std::vector<bool> truncated;  // axis bounds substituted for an infinite bound

    static RegionSpec box(std::vector<double> lower, std::vector<double> upper, std::size_t nodes_per_axis);

    [[nodiscard]] std::size_t dim() const noexcept { return lower.size(); }
    [[nodiscard]] double spacing(std::size_t axis) const;
    [[nodiscard]] double min_spacing() const;
    [[nodiscard]] std::size_t node_count() const;
    /// Node for a flat index (axis 0 varies slowest). Upper bounds are hit exactly.
    [[nodiscard]] Vector node(std::size_t flat) const;
    [[nodiscard]] bool contains(const Vector& x) const;

    /// Same box and predicate with every resolution multiplied by `factor`
    /// (as (r - 1) * factor + 1 so the old nodes stay on the new grid).
    [[nodiscard]] RegionSpec refined(std::size_t factor) const;

    /// Throws CertifyError on inconsistent sizes, non-finite or inverted bounds,
    /// or a resolution below 2.
    void validate() const;
};

/// Bounds with std::nullopt meaning unbounded; unbounded sides become +-truncation.
[[nodiscard]] RegionSpec make_region(const std::vector<std::optional<double>>& lower,
                                     const std::vector<std::optional<double>>& upper,
                                     std::vector<std::size_t> resolution, double truncation = 50.0);

struct CertifyOptions {
    double ineq_tol = 1e-8;            // slack on mu <= -c (closure points sit |H| <= 1e-10 off the manifold)
    double sigma_eq_tol = 1e-9;        // |mu| on the manifold
    double sigma_locate_tol = 1e-10;   // |H| at manifold samples
    double tie_tol = 1e-9;             // branch ties of max-type H
    bool evaluate_sminus = true;
};

struct MarginReport {
    double worst = -std::numeric_limits<double>::infinity();  // largest sampled mu
    Vector worst_point;
    std::size_t points = 0;
    bool pass = true;
};

/// mu(J(x)) over every region node; pass iff worst <= -c (+ ineq_tol). Throws
/// EmptyRegionError when no node satisfies the predicate.
[[nodiscard]] MarginReport check_contraction(const VectorField& field, const RegionSpec& region, MeasureKind kind,
                                             double c, const CertifyOptions& opts = {});

struct SigmaSamples {
    std::vector<Vector> points;
    std::size_t ties_excluded = 0;
};

/// Bisects every grid edge along which H changes sign down to |H| <= 1e-10,
/// drops near-duplicates (closer than half a grid spacing) and branch-tie
/// points of max-type H. Throws EmptySigmaError if nothing is found and
/// SurfaceError if grad H vanishes at a sample.
[[nodiscard]] SigmaSamples sample_sigma(const SwitchingSurface& h, const RegionSpec& region,
                                        const CertifyOptions& opts = {});

/// Region nodes split by the sign of H plus the manifold samples. Samples are
/// part of both closures.
struct Partition {
    RegionSpec region;
    std::vector<Vector> plus;
    std::vector<Vector> minus;
    std::vector<Vector> sigma;
    std::size_t ties_excluded = 0;
};

/// Like sample_sigma but an empty manifold is allowed here (sigma stays empty).
[[nodiscard]] Partition partition_region(const SwitchingSurface& h, const RegionSpec& region,
                                         const CertifyOptions& opts = {});

struct Certificate {
    MeasureKind measure = MeasureKind::One;
    double c_bar = 0.0;
    double c1 = 0.0;
    double c2 = 0.0;
    MarginReport splus;
    MarginReport sminus;
    double worst_sigma_mu = 0.0;          // max |mu(M)| over manifold samples
    double worst_sigma_mu_negated = 0.0;  // max |mu(-M)|, diagnostic only
    Vector worst_sigma_point;
    std::size_t sigma_points = 0;
    std::size_t ties_excluded = 0;
    bool sigma_pass = true;
    bool sminus_checked = true;
    RegionSpec region;
    CertifyOptions options;
    std::string surface;
    std::vector<std::string> warnings;

    [[nodiscard]] bool pass() const noexcept { return splus.pass && sminus.pass && sigma_pass; }
    /// min(c1, c2) when the certificate passes.
    [[nodiscard]] std::optional<double> rate() const;
};

using JumpFn = std::function<Matrix(const Vector&)>;

/// Evaluates the three conditions on a prepared partition. `jump` returns the
/// matrix whose measure must vanish on the manifold.
[[nodiscard]] Certificate certify_partition(const Partition& part, const VectorField& plus, const VectorField& minus,
                                            const JumpFn& jump, MeasureKind kind, double c1, double c2,
                                            const CertifyOptions& opts = {});

/// Throws EmptySigmaError when the manifold does not meet the region.
[[nodiscard]] Certificate check_theorem2(const FilippovSystem& sys, const RegionSpec& region, MeasureKind kind,
                                         double c1, double c2, const CertifyOptions& opts = {});

/// Assembles the closed loop and checks it; the manifold condition uses jump_matrix.
[[nodiscard]] Certificate check_theorem3(const ControlledSystem& sys, const SwitchedController& ctl,
                                         const RegionSpec& region, MeasureKind kind, double c1, double c2,
                                         const CertifyOptions& opts = {});

struct DecayReport {
    std::string id;
    double k = 1.0;
    double lambda = 0.0;
    MeasureKind norm = MeasureKind::One;
    double rel_tol = 1e-6;
    std::vector<double> times;
    std::vector<double> distances;
    std::vector<double> bounds;  // K e^{-lambda (t - t0)} |x0 - y0|
    std::vector<double> ratios;
    double max_ratio = 0.0;
    double max_ratio_time = 0.0;

    [[nodiscard]] bool pass() const noexcept { return max_ratio <= 1.0 + rel_tol; }
};

/// Compares |x(t) - y(t)| with K e^{-lambda (t - t0)} |x0 - y0| sample by
/// sample. Throws std::invalid_argument when the time grids differ.
[[nodiscard]] DecayReport check_decay(const Trajectory& x, const Trajectory& y, double k, double lambda,
                                      MeasureKind norm, double rel_tol = 1e-6, std::string id = {});

/// Trapezoidal integral of ||u(x(t))||_2^2 where u follows the mode labels;
/// sliding samples use alpha u+ + (1 - alpha) u-.
[[nodiscard]] double control_effort(const Trajectory& traj, const ControlledSystem& sys,
                                    const SwitchedController& ctl);

[[nodiscard]] nlohmann::json to_json(const RegionSpec& region);
[[nodiscard]] nlohmann::json to_json(const MarginReport& report);
[[nodiscard]] nlohmann::json to_json(const Certificate& cert);
/// Summary fields only; the per-sample series goes to write_decay_csv.
[[nodiscard]] nlohmann::json to_json(const DecayReport& report);

/// `t,distance,bound,ratio`
void write_decay_csv(std::ostream& os, const DecayReport& report);

}  // namespace pwsc
