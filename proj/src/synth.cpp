#include "pwsc/synth.hpp"

#include "pwsc/parallel.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <algorithm>
#include <cmath>
#include <thread>

namespace pwsc {

using expr::Expr;
using expr::NodeKind;

// ---------------------------------------------------------------------------
// H from the open-loop measure

SpectralMeasureSurface::SpectralMeasureSurface(const expr::VectorExpr& f, double offset)
    : n_(f.state_dim()), offset_(offset), jac_(f.jacobian()) {
    if (f.size() != n_) throw DimensionError("field must have one component per state variable");
    hess_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) {
        hess_[i].resize(n_);
        for (std::size_t j = 0; j < n_; ++j) {
            for (std::size_t k = 0; k < n_; ++k) hess_[i][j].push_back(expr::differentiate(jac_[i][j], k).expr);
        }
    }
}

Matrix SpectralMeasureSurface::sym_jacobian(const Vector& x) const {
    const auto n = static_cast<Eigen::Index>(n_);
    Matrix j(n, n);
    for (Eigen::Index r = 0; r < n; ++r) {
        for (Eigen::Index c = 0; c < n; ++c) j(r, c) = jac_[r][c].eval(x);
    }
    return 0.5 * (j + j.transpose());
}

double SpectralMeasureSurface::value(const Vector& x) const {
    return linalg::symmetric_max_eigenpair(sym_jacobian(x)).value + offset_;
}

Vector SpectralMeasureSurface::gradient(const Vector& x) const {
    const auto n = static_cast<Eigen::Index>(n_);
    const Vector v = linalg::symmetric_max_eigenpair(sym_jacobian(x)).vector;
    Vector grad(n);
    Matrix dj(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        for (Eigen::Index r = 0; r < n; ++r) {
            for (Eigen::Index c = 0; c < n; ++c) dj(r, c) = hess_[r][c][k].eval(x);
        }
        grad(k) = v.dot(0.5 * (dj + dj.transpose()) * v);
    }
    return grad;
}

std::string SpectralMeasureSurface::describe() const {
    return fmt::format("lambda_max(sym(df/dx)) + {}", offset_);
}

bool SpectralMeasureSurface::is_branch_tie(const Vector& x, double tol) const {
    if (n_ < 2) return false;
    const Vector ev = linalg::symmetric_eigenvalues(sym_jacobian(x));
    return ev(ev.size() - 1) - ev(ev.size() - 2) <= tol;
}

BuiltSurface build_H(const ControlledSystem& sys, MeasureKind kind, double c_bar) {
    sys.validate();
    if (!(c_bar > 0.0) || !std::isfinite(c_bar)) throw std::invalid_argument("target rate must be positive");
    if (kind == MeasureKind::Two) {
        auto h = std::make_shared<SpectralMeasureSurface>(sys.f, c_bar);
        return {h, h->describe()};
    }
    const auto jac = sys.f.jacobian();
    const std::size_t n = sys.n();
    std::vector<Expr> branches;
    for (std::size_t p = 0; p < n; ++p) {
        Expr b = jac[p][p];
        for (std::size_t q = 0; q < n; ++q) {
            if (q == p) continue;
            b = b + expr::abs(kind == MeasureKind::One ? jac[q][p] : jac[p][q]);
        }
        branches.push_back(b + Expr::constant(c_bar));
    }
    auto h = std::make_shared<ExprSurface>(std::move(branches), n);
    return {h, h->describe()};
}

Partition partition_regions(const SwitchingSurface& h, const RegionSpec& region, const CertifyOptions& opts) {
    Partition part = partition_region(h, region, opts);
    if (part.plus.empty()) {
        throw AlreadyContracting("open loop already contracting at the target rate on the design region");
    }
    return part;
}

// ---------------------------------------------------------------------------
// Template and lattice

std::size_t DesignSpec::gain_count() const {
    std::size_t n = 0;
    for (const auto& ch : basis) n += ch.size();
    return n;
}

void DesignSpec::validate() const {
    system.validate();
    if (!(c_bar > 0.0) || !std::isfinite(c_bar)) throw std::invalid_argument("target rate must be positive");
    if (basis.size() != system.m()) {
        throw std::invalid_argument(
            fmt::format("template has {} channels but the system has {} inputs", basis.size(), system.m()));
    }
    if (region.dim() != system.n()) throw std::invalid_argument("design region dimension differs from the state");
    for (const auto& ch : basis) {
        for (const auto& b : ch) {
            const bool linear = b.kind() == NodeKind::Variable;
            const bool square = b.kind() == NodeKind::Pow && b.exponent() == 2 &&
                                b.children()[0].kind() == NodeKind::Variable;
            if (!linear && !square) {
                throw std::invalid_argument(
                    fmt::format("template function '{}' is not a state variable or its square", b.to_string()));
            }
        }
    }
    const std::size_t k = gain_count();
    if (k == 0) throw std::invalid_argument("template has no gains");
    for (const auto* v : {&gain_lower, &gain_upper}) {
        if (v->size() != 1 && v->size() != k) {
            throw std::invalid_argument(fmt::format("gain bounds need 1 or {} entries", k));
        }
    }
    for (std::size_t i = 0; i < k; ++i) {
        const double lo = gain_lower[gain_lower.size() == 1 ? 0 : i];
        const double hi = gain_upper[gain_upper.size() == 1 ? 0 : i];
        if (!std::isfinite(lo) || !std::isfinite(hi) || lo > hi) {
            throw std::invalid_argument(fmt::format("invalid bounds for gain {}", i));
        }
    }
    if (!(gain_step > 0.0) || !std::isfinite(gain_step)) throw std::invalid_argument("gain step must be positive");
}

expr::VectorExpr template_control(const DesignSpec& spec, const std::vector<double>& gains) {
    if (gains.size() != spec.gain_count()) throw std::invalid_argument("gain vector has the wrong length");
    std::vector<Expr> u;
    std::size_t idx = 0;
    for (const auto& ch : spec.basis) {
        Expr ui = Expr::constant(0.0);
        for (const auto& b : ch) ui = ui + Expr::constant(gains[idx++]) * b;
        u.push_back(ui);
    }
    return expr::VectorExpr(std::move(u), spec.system.vars);
}

std::vector<std::vector<double>> gain_candidates(const DesignSpec& spec) {
    spec.validate();
    const std::size_t k = spec.gain_count();
    std::vector<std::vector<double>> axes(k);
    std::size_t total = 1;
    for (std::size_t i = 0; i < k; ++i) {
        const double lo = spec.gain_lower[spec.gain_lower.size() == 1 ? 0 : i];
        const double hi = spec.gain_upper[spec.gain_upper.size() == 1 ? 0 : i];
        const auto steps = static_cast<std::size_t>(std::floor((hi - lo) / spec.gain_step + 1e-9));
        for (std::size_t s = 0; s <= steps; ++s) axes[i].push_back(lo + static_cast<double>(s) * spec.gain_step);
        if (hi - axes[i].back() > 1e-9 * spec.gain_step) axes[i].push_back(hi);
        total *= axes[i].size();
        if (total > 1'000'000) throw std::invalid_argument("gain lattice exceeds 10^6 candidates");
    }
    std::vector<std::vector<double>> out;
    out.reserve(total);
    std::vector<std::size_t> idx(k, 0);
    for (std::size_t c = 0; c < total; ++c) {
        std::vector<double> g(k);
        for (std::size_t i = 0; i < k; ++i) g[i] = axes[i][idx[i]];
        out.push_back(std::move(g));
        for (std::size_t i = k; i-- > 0;) {
            if (++idx[i] < axes[i].size()) break;
            idx[i] = 0;
        }
    }
    const auto norm = [](const std::vector<double>& g) {
        double s = 0.0;
        for (double v : g) s += v * v;
        return std::sqrt(s);
    };
    std::stable_sort(out.begin(), out.end(), [&](const auto& a, const auto& b) {
        const double na = norm(a);
        const double nb = norm(b);
        if (std::abs(na - nb) > 1e-12 * std::max(1.0, std::max(na, nb))) return na < nb;
        return a < b;
    });
    return out;
}

// ---------------------------------------------------------------------------
// Search

SearchFailure::SearchFailure(const std::string& message, std::vector<double> best_gains, double best_margin)
    : std::runtime_error(message), best_gains_(std::move(best_gains)), best_margin_(best_margin) {}

namespace {

struct CandidateScore {
    double splus_worst = -std::numeric_limits<double>::infinity();
    double sigma_worst = 0.0;
    bool pass = false;
    double violation = 0.0;
};

// Conditions on the closure of S+ and on the manifold for one gain vector.
CandidateScore score(const DesignSpec& spec, const SurfacePtr& h, const std::vector<double>& gains,
                     const std::vector<Vector>& splus, const std::vector<Vector>& sigma) {
    const SwitchedController ctl{template_control(spec, gains),
                                 expr::VectorExpr::zeros(spec.system.m(), spec.system.vars), h};
    const ControlledField field(spec.system, ctl.u_plus);
    CandidateScore s;
    for (const auto& x : splus) s.splus_worst = std::max(s.splus_worst, matrix_measure(spec.kind, field.jacobian(x)));
    for (const auto& x : sigma) {
        s.splus_worst = std::max(s.splus_worst, matrix_measure(spec.kind, field.jacobian(x)));
        const Matrix m = jump_matrix(spec.system, ctl, x, 100.0 * spec.options.sigma_locate_tol);
        s.sigma_worst = std::max(s.sigma_worst, std::abs(matrix_measure(spec.kind, m)));
    }
    s.pass = s.splus_worst <= -spec.c_bar + spec.options.ineq_tol && s.sigma_worst <= spec.options.sigma_eq_tol;
    s.violation = std::max(s.splus_worst + spec.c_bar, s.sigma_worst);
    return s;
}

std::string sigma_text(const BuiltSurface& h, const Partition& part) {
    return fmt::format("{{x in region : {} = 0}} ({} samples, {} branch ties excluded)", h.description,
                       part.sigma.size(), part.ties_excluded);
}

}  // namespace

DesignResult gain_search(const DesignSpec& spec) {
    spec.validate();
    const BuiltSurface h = build_H(spec.system, spec.kind, spec.c_bar);

    DesignResult result;
    result.h_expression = h.description;
    result.surface = h.h;
    result.u_minus = expr::VectorExpr::zeros(spec.system.m(), spec.system.vars);

    Partition part;
    try {
        part = partition_regions(*h.h, spec.region, spec.options);
    } catch (const AlreadyContracting&) {
        part = partition_region(*h.h, spec.region, spec.options);
        result.already_contracting = true;
        result.gains.assign(spec.gain_count(), 0.0);
        result.u_plus = expr::VectorExpr::zeros(spec.system.m(), spec.system.vars);
        result.sigma_description = sigma_text(h, part);
        const auto open_loop = std::make_shared<ControlledField>(spec.system, result.u_plus);
        const auto n = static_cast<Eigen::Index>(spec.system.n());
        result.certificate = certify_partition(
            part, *open_loop, *open_loop, [n](const Vector&) { return Matrix::Zero(n, n).eval(); }, spec.kind,
            spec.c_bar, spec.c_bar, spec.options);
        result.certificate.surface = h.description;
        result.certificate.warnings.push_back("open loop already contracting at the target rate; u+ = 0");
        return result;
    }
    result.sigma_description = sigma_text(h, part);

    // Coarse pass on a strided subset of S+ (plus every manifold sample): a
    // failure there is a failure on the full grid, so only survivors get the
    // full sweep.
    const std::size_t stride = std::max<std::size_t>(1, part.plus.size() / 2000);
    std::vector<Vector> coarse;
    for (std::size_t i = 0; i < part.plus.size(); i += stride) coarse.push_back(part.plus[i]);

    const auto candidates = gain_candidates(spec);
    const std::size_t batch = parallel::worker_count();
    std::optional<std::size_t> found;
    std::size_t best = 0;
    double best_violation = std::numeric_limits<double>::infinity();

    for (std::size_t start = 0; start < candidates.size() && !found; start += batch) {
        const std::size_t end = std::min(candidates.size(), start + batch);
        std::vector<CandidateScore> scores(end - start);
        std::vector<std::exception_ptr> errors(end - start);
        const auto run = [&](std::size_t c) {
            try {
                CandidateScore s = score(spec, h.h, candidates[c], coarse, part.sigma);
                if (s.pass) s = score(spec, h.h, candidates[c], part.plus, part.sigma);
                scores[c - start] = s;
            } catch (...) {
                errors[c - start] = std::current_exception();
            }
        };
        if (end - start == 1) {
            run(start);
        } else {
            std::vector<std::jthread> workers;
            for (std::size_t c = start; c < end; ++c) workers.emplace_back(run, c);
        }
        for (auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
        for (std::size_t c = start; c < end; ++c) {
            ++result.candidates_evaluated;
            const auto& s = scores[c - start];
            if (s.pass) {
                found = c;
                break;
            }
            if (s.violation < best_violation) {
                best_violation = s.violation;
                best = c;
            }
        }
    }

    if (!found) {
        const CandidateScore exact = score(spec, h.h, candidates[best], part.plus, part.sigma);
        throw SearchFailure(fmt::format("no gain in the lattice satisfies the design conditions ({} candidates); "
                                        "best violation {:.6g} at gains [{}]",
                                        candidates.size(), exact.violation, fmt::join(candidates[best], ", ")),
                            candidates[best], exact.violation);
    }

    result.gains = candidates[*found];
    result.u_plus = template_control(spec, result.gains);
    result.certificate =
        check_theorem3(spec.system, result.controller(), spec.region, spec.kind, spec.c_bar, spec.c_bar, spec.options);
    if (!result.certificate.pass()) {
        throw SearchFailure("selected gain does not pass the full certificate", result.gains,
                            std::max({result.certificate.splus.worst + spec.c_bar,
                                     result.certificate.sminus.worst + spec.c_bar,
                                     result.certificate.worst_sigma_mu}));
    }
    return result;
}

nlohmann::json to_json(const DesignResult& result) {
    nlohmann::json j;
    j["switching_function"] = result.h_expression;
    j["sigma"] = result.sigma_description;
    j["gains"] = result.gains;
    std::vector<std::string> up;
    std::vector<std::string> um;
    for (const auto& e : result.u_plus.components()) up.push_back(e.to_string());
    for (const auto& e : result.u_minus.components()) um.push_back(e.to_string());
    j["u_plus"] = up;
    j["u_minus"] = um;
    j["already_contracting"] = result.already_contracting;
    j["candidates_evaluated"] = result.candidates_evaluated;
    j["certificate"] = to_json(result.certificate);
    return j;
}

}  // namespace pwsc
