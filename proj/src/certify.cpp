#include "pwsc/certify.hpp"

#include "pwsc/parallel.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

namespace pwsc {

// ---------------------------------------------------------------------------
// Regions

RegionSpec RegionSpec::box(std::vector<double> lower, std::vector<double> upper, std::size_t nodes_per_axis) {
    RegionSpec r;
    r.resolution.assign(lower.size(), nodes_per_axis);
    r.truncated.assign(lower.size(), false);
    r.lower = std::move(lower);
    r.upper = std::move(upper);
    r.validate();
    return r;
}

void RegionSpec::validate() const {
    if (lower.empty()) throw CertifyError("region has no axes");
    if (upper.size() != lower.size() || resolution.size() != lower.size()) {
        throw CertifyError(fmt::format("region bounds/resolution sizes differ ({}, {}, {})", lower.size(),
                                       upper.size(), resolution.size()));
    }
    for (std::size_t i = 0; i < lower.size(); ++i) {
        if (!std::isfinite(lower[i]) || !std::isfinite(upper[i])) {
            throw CertifyError(fmt::format("axis {} has a non-finite bound; give a truncation bound", i));
        }
        if (!(upper[i] >= lower[i])) throw CertifyError(fmt::format("axis {} has upper < lower", i));
        if (resolution[i] < 2) throw CertifyError(fmt::format("axis {} needs a grid resolution of at least 2", i));
    }
}

double RegionSpec::spacing(std::size_t axis) const {
    return (upper.at(axis) - lower.at(axis)) / static_cast<double>(resolution.at(axis) - 1);
}

double RegionSpec::min_spacing() const {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < dim(); ++i) {
        const double s = spacing(i);
        if (s > 0.0) best = std::min(best, s);
    }
    return std::isfinite(best) ? best : 0.0;
}

std::size_t RegionSpec::node_count() const {
    std::size_t n = 1;
    for (auto r : resolution) n *= r;
    return n;
}

Vector RegionSpec::node(std::size_t flat) const {
    const std::size_t n = dim();
    Vector x(static_cast<Eigen::Index>(n));
    for (std::size_t a = n; a-- > 0;) {
        const std::size_t i = flat % resolution[a];
        flat /= resolution[a];
        x(static_cast<Eigen::Index>(a)) =
            i + 1 == resolution[a] ? upper[a] : lower[a] + static_cast<double>(i) * spacing(a);
    }
    return x;
}

bool RegionSpec::contains(const Vector& x) const {
    for (std::size_t a = 0; a < dim(); ++a) {
        const double v = x(static_cast<Eigen::Index>(a));
        if (v < lower[a] || v > upper[a]) return false;
    }
    return !predicate || predicate(x);
}

RegionSpec RegionSpec::refined(std::size_t factor) const {
    RegionSpec r = *this;
    for (auto& res : r.resolution) res = (res - 1) * factor + 1;
    return r;
}

RegionSpec make_region(const std::vector<std::optional<double>>& lower,
                       const std::vector<std::optional<double>>& upper, std::vector<std::size_t> resolution,
                       double truncation) {
    if (!(truncation > 0.0) || !std::isfinite(truncation)) throw CertifyError("truncation bound must be positive");
    if (lower.size() != upper.size()) throw CertifyError("region bound lists differ in length");
    RegionSpec r;
    r.resolution = std::move(resolution);
    for (std::size_t i = 0; i < lower.size(); ++i) {
        r.lower.push_back(lower[i].value_or(-truncation));
        r.upper.push_back(upper[i].value_or(truncation));
        r.truncated.push_back(!lower[i] || !upper[i]);
    }
    r.validate();
    return r;
}

// ---------------------------------------------------------------------------
// Contraction on a grid

namespace {

struct Worst {
    double value = -std::numeric_limits<double>::infinity();
    Vector point;
    std::size_t count = 0;

    void offer(double v, const Vector& x) {
        ++count;
        if (v > value || point.size() == 0) {
            value = std::max(v, value);
            if (v >= value) point = x;
        }
    }
    void merge(const Worst& other) {
        count += other.count;
        if (other.point.size() != 0 && (point.size() == 0 || other.value > value)) {
            value = other.value;
            point = other.point;
        }
    }
};

Worst worst_measure(const std::vector<Vector>& points, const VectorField& field, MeasureKind kind) {
    std::vector<Worst> partial(parallel::chunk_count(points.size()));
    parallel::for_chunks(points.size(), [&](std::size_t begin, std::size_t end, std::size_t chunk) {
        for (std::size_t i = begin; i < end; ++i) {
            partial[chunk].offer(matrix_measure(kind, field.jacobian(points[i])), points[i]);
        }
    });
    Worst out;
    for (const auto& w : partial) out.merge(w);
    return out;
}

MarginReport to_report(const Worst& w, double c, const CertifyOptions& opts) {
    MarginReport r;
    r.points = w.count;
    r.worst = w.value;
    r.worst_point = w.point;
    r.pass = w.count == 0 || w.value <= -c + opts.ineq_tol;
    return r;
}

std::vector<Vector> region_nodes(const RegionSpec& region) {
    region.validate();
    std::vector<Vector> nodes;
    const std::size_t total = region.node_count();
    nodes.reserve(total);
    for (std::size_t i = 0; i < total; ++i) {
        Vector x = region.node(i);
        if (!region.predicate || region.predicate(x)) nodes.push_back(std::move(x));
    }
    return nodes;
}

}  // namespace

MarginReport check_contraction(const VectorField& field, const RegionSpec& region, MeasureKind kind, double c,
                               const CertifyOptions& opts) {
    if (region.dim() != field.dim()) {
        throw DimensionError(fmt::format("region has {} axes but the field has dimension {}", region.dim(), field.dim()));
    }
    const auto nodes = region_nodes(region);
    if (nodes.empty()) throw EmptyRegionError("no grid node lies inside the region");
    return to_report(worst_measure(nodes, field, kind), c, opts);
}

// ---------------------------------------------------------------------------
// Switching manifold samples

namespace {

// Samples closer than `radius` (max-norm) to an earlier one are dropped.
class Deduplicator {
public:
    explicit Deduplicator(double radius) : radius_(radius) {}

    bool insert(const Vector& x) {
        if (radius_ <= 0.0) {
            kept_.push_back(x);
            return true;
        }
        std::vector<long> key(static_cast<std::size_t>(x.size()));
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            key[static_cast<std::size_t>(i)] = static_cast<long>(std::floor(x(i) / radius_));
        }
        if (near_existing(key, 0, key, x)) return false;
        cells_[key].push_back(kept_.size());
        kept_.push_back(x);
        return true;
    }

    std::vector<Vector> take() { return std::move(kept_); }

private:
    bool near_existing(const std::vector<long>& base, std::size_t axis, std::vector<long>& probe, const Vector& x) const {
        if (axis == base.size()) {
            const auto it = cells_.find(probe);
            if (it == cells_.end()) return false;
            return std::any_of(it->second.begin(), it->second.end(), [&](std::size_t idx) {
                return (kept_[idx] - x).lpNorm<Eigen::Infinity>() < radius_;
            });
        }
        for (long d = -1; d <= 1; ++d) {
            std::vector<long> next = probe;
            next[axis] = base[axis] + d;
            if (near_existing(base, axis + 1, next, x)) return true;
        }
        return false;
    }

    double radius_;
    std::vector<Vector> kept_;
    std::map<std::vector<long>, std::vector<std::size_t>> cells_;
};

Vector bisect_edge(const SwitchingSurface& h, Vector lo, double h_lo, Vector hi, double tol) {
    Vector mid = lo;
    for (int it = 0; it < 200; ++it) {
        mid = 0.5 * (lo + hi);
        const double hm = h.value(mid);
        if (std::abs(hm) <= tol) return mid;
        if ((hm > 0.0) == (h_lo > 0.0)) {
            lo = mid;
            h_lo = hm;
        } else {
            hi = mid;
        }
        if ((hi - lo).lpNorm<Eigen::Infinity>() == 0.0) break;
    }
    return mid;
}

struct GridValues {
    std::vector<double> h;
    std::vector<char> inside;
};

GridValues evaluate_grid(const SwitchingSurface& h, const RegionSpec& region) {
    const std::size_t total = region.node_count();
    GridValues g;
    g.h.assign(total, 0.0);
    g.inside.assign(total, 0);
    parallel::for_chunks(total, [&](std::size_t begin, std::size_t end, std::size_t) {
        for (std::size_t i = begin; i < end; ++i) {
            const Vector x = region.node(i);
            if (region.predicate && !region.predicate(x)) continue;
            g.inside[i] = 1;
            g.h[i] = h.value(x);
        }
    });
    return g;
}

SigmaSamples locate_sigma(const SwitchingSurface& h, const RegionSpec& region, const GridValues& g,
                          const CertifyOptions& opts) {
    const std::size_t n = region.dim();
    const std::size_t total = region.node_count();
    std::vector<std::size_t> stride(n, 1);
    for (std::size_t a = n - 1; a-- > 0;) stride[a] = stride[a + 1] * region.resolution[a + 1];

    Deduplicator dedup(0.5 * region.min_spacing());
    SigmaSamples out;
    const auto accept = [&](const Vector& x) {
        if (region.predicate && !region.predicate(x)) return;
        if (h.is_branch_tie(x, opts.tie_tol)) {
            ++out.ties_excluded;
            return;
        }
        dedup.insert(x);
    };

    for (std::size_t i = 0; i < total; ++i) {
        if (g.inside[i] && g.h[i] == 0.0) accept(region.node(i));
    }
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t i = 0; i < total; ++i) {
            if ((i / stride[a]) % region.resolution[a] + 1 == region.resolution[a]) continue;
            const std::size_t j = i + stride[a];
            if (!g.inside[i] || !g.inside[j]) continue;
            const double hi = g.h[i];
            const double hj = g.h[j];
            if (!((hi > 0.0 && hj < 0.0) || (hi < 0.0 && hj > 0.0))) continue;
            accept(bisect_edge(h, region.node(i), hi, region.node(j), opts.sigma_locate_tol));
        }
    }
    out.points = dedup.take();
    for (const auto& x : out.points) {
        if (h.gradient(x).norm() <= kMinGradientNorm) {
            throw SurfaceError(fmt::format("gradient of the switching function vanishes at a manifold sample ({})",
                                           fmt::format("{}", x.transpose().eval()(0))));
        }
    }
    return out;
}

}  // namespace

SigmaSamples sample_sigma(const SwitchingSurface& h, const RegionSpec& region, const CertifyOptions& opts) {
    region.validate();
    if (h.dim() != region.dim()) {
        throw DimensionError(fmt::format("region has {} axes but H is over {} variables", region.dim(), h.dim()));
    }
    auto samples = locate_sigma(h, region, evaluate_grid(h, region), opts);
    if (samples.points.empty()) {
        throw EmptySigmaError("switching function does not change sign on the region grid");
    }
    return samples;
}

Partition partition_region(const SwitchingSurface& h, const RegionSpec& region, const CertifyOptions& opts) {
    region.validate();
    if (h.dim() != region.dim()) {
        throw DimensionError(fmt::format("region has {} axes but H is over {} variables", region.dim(), h.dim()));
    }
    const GridValues g = evaluate_grid(h, region);
    Partition p;
    p.region = region;
    for (std::size_t i = 0; i < g.h.size(); ++i) {
        if (!g.inside[i]) continue;
        if (g.h[i] > 0.0) {
            p.plus.push_back(region.node(i));
        } else if (g.h[i] < 0.0) {
            p.minus.push_back(region.node(i));
        }
    }
    auto samples = locate_sigma(h, region, g, opts);
    p.sigma = std::move(samples.points);
    p.ties_excluded = samples.ties_excluded;
    if (p.plus.empty() && p.minus.empty() && p.sigma.empty()) {
        throw EmptyRegionError("no grid node lies inside the region");
    }
    return p;
}

// ---------------------------------------------------------------------------
// Certificates

std::optional<double> Certificate::rate() const {
    if (!pass()) return std::nullopt;
    return std::min(c1, c2);
}

Certificate certify_partition(const Partition& part, const VectorField& plus, const VectorField& minus,
                              const JumpFn& jump, MeasureKind kind, double c1, double c2, const CertifyOptions& opts) {
    if (!(c1 > 0.0) || !(c2 > 0.0)) throw std::invalid_argument("contraction rates must be positive");
    Certificate cert;
    cert.measure = kind;
    cert.c1 = c1;
    cert.c2 = c2;
    cert.c_bar = std::min(c1, c2);
    cert.region = part.region;
    cert.options = opts;
    cert.ties_excluded = part.ties_excluded;
    cert.sigma_points = part.sigma.size();

    Worst wp = worst_measure(part.plus, plus, kind);
    wp.merge(worst_measure(part.sigma, plus, kind));
    cert.splus = to_report(wp, c1, opts);
    if (wp.count == 0) cert.warnings.push_back("closure of S+ has no sample points");

    cert.sminus_checked = opts.evaluate_sminus;
    if (opts.evaluate_sminus) {
        Worst wm = worst_measure(part.minus, minus, kind);
        wm.merge(worst_measure(part.sigma, minus, kind));
        cert.sminus = to_report(wm, c2, opts);
        if (wm.count == 0) cert.warnings.push_back("closure of S- has no sample points");
    }

    for (const auto& x : part.sigma) {
        const Matrix m = jump(x);
        const double mu = std::abs(matrix_measure(kind, m));
        const double mu_neg = std::abs(matrix_measure(kind, -m));
        if (mu > cert.worst_sigma_mu || cert.worst_sigma_point.size() == 0) {
            cert.worst_sigma_mu = std::max(mu, cert.worst_sigma_mu);
            cert.worst_sigma_point = x;
        }
        cert.worst_sigma_mu_negated = std::max(cert.worst_sigma_mu_negated, mu_neg);
    }
    cert.sigma_pass = cert.worst_sigma_mu <= opts.sigma_eq_tol;
    if (part.ties_excluded > 0) {
        cert.warnings.push_back(fmt::format("{} manifold samples at branch ties of H were excluded", part.ties_excluded));
    }
    return cert;
}

Certificate check_theorem2(const FilippovSystem& sys, const RegionSpec& region, MeasureKind kind, double c1,
                           double c2, const CertifyOptions& opts) {
    const Partition part = partition_region(*sys.surface, region, opts);
    if (part.sigma.empty()) throw EmptySigmaError("switching manifold does not meet the region");
    const JumpFn jump = [&](const Vector& x) -> Matrix {
        return (sys.plus->value(x) - sys.minus->value(x)) * sys.surface->gradient(x).transpose();
    };
    Certificate cert = certify_partition(part, *sys.plus, *sys.minus, jump, kind, c1, c2, opts);
    cert.surface = sys.surface->describe();
    return cert;
}

Certificate check_theorem3(const ControlledSystem& sys, const SwitchedController& ctl, const RegionSpec& region,
                           MeasureKind kind, double c1, double c2, const CertifyOptions& opts) {
    if (!ctl.surface) throw SurfaceError("controller has no switching function");
    const ClosedLoopField loop = assemble_closed_loop(sys, ctl);
    const Partition part = partition_region(*ctl.surface, region, opts);
    if (part.sigma.empty()) throw EmptySigmaError("switching manifold does not meet the region");
    const JumpFn jump = [&](const Vector& x) { return jump_matrix(sys, ctl, x, 100.0 * opts.sigma_locate_tol); };
    Certificate cert = certify_partition(part, *loop.plus, *loop.minus, jump, kind, c1, c2, opts);
    cert.surface = ctl.surface->describe();
    return cert;
}

// ---------------------------------------------------------------------------
// Decay along trajectory pairs

DecayReport check_decay(const Trajectory& x, const Trajectory& y, double k, double lambda, MeasureKind norm,
                        double rel_tol, std::string id) {
    if (x.size() != y.size() || x.empty()) {
        throw std::invalid_argument(fmt::format("trajectory grids differ ({} vs {} samples)", x.size(), y.size()));
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (std::abs(x.times[i] - y.times[i]) > 1e-12 * std::max(1.0, std::abs(x.times[i]))) {
            throw std::invalid_argument(fmt::format("trajectory grids differ at sample {}", i));
        }
    }
    if (!(k > 0.0)) throw std::invalid_argument("decay constant K must be positive");

    DecayReport r;
    r.id = std::move(id);
    r.k = k;
    r.lambda = lambda;
    r.norm = norm;
    r.rel_tol = rel_tol;
    const double t0 = x.times.front();
    const double d0 = vector_norm(norm, x.states.front() - y.states.front());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = vector_norm(norm, x.states[i] - y.states[i]);
        const double bound = k * std::exp(-lambda * (x.times[i] - t0)) * d0;
        double ratio = 0.0;
        if (d > 0.0) ratio = bound > 0.0 ? d / bound : std::numeric_limits<double>::infinity();
        r.times.push_back(x.times[i]);
        r.distances.push_back(d);
        r.bounds.push_back(bound);
        r.ratios.push_back(ratio);
        if (ratio > r.max_ratio) {
            r.max_ratio = ratio;
            r.max_ratio_time = x.times[i];
        }
    }
    return r;
}

double control_effort(const Trajectory& traj, const ControlledSystem& sys, const SwitchedController& ctl) {
    const ClosedLoopField loop = assemble_closed_loop(sys, ctl);
    const auto energy = [&](std::size_t k) {
        const Vector& x = traj.states[k];
        Vector u;
        switch (traj.modes[k]) {
        case Mode::Plus: u = ctl.u_plus.eval(x); break;
        case Mode::Minus: u = ctl.u_minus.eval(x); break;
        case Mode::Sliding: {
            const double alpha = sliding_alpha(loop.plus->value(x), loop.minus->value(x), ctl.surface->gradient(x));
            u = alpha * ctl.u_plus.eval(x) + (1.0 - alpha) * ctl.u_minus.eval(x);
            break;
        }
        }
        return u.squaredNorm();
    };
    double total = 0.0;
    for (std::size_t k = 1; k < traj.size(); ++k) {
        total += 0.5 * (traj.times[k] - traj.times[k - 1]) * (energy(k - 1) + energy(k));
    }
    return total;
}

// ---------------------------------------------------------------------------
// Serialisation

namespace {

nlohmann::json vec_json(const Vector& v) {
    auto arr = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

nlohmann::json to_json(const RegionSpec& region) {
    nlohmann::json j;
    j["lower"] = region.lower;
    j["upper"] = region.upper;
    j["resolution"] = region.resolution;
    std::vector<double> spacing;
    for (std::size_t a = 0; a < region.dim(); ++a) spacing.push_back(region.spacing(a));
    j["spacing"] = spacing;
    j["predicate"] = region.predicate_text.empty() ? nlohmann::json(nullptr) : nlohmann::json(region.predicate_text);
    std::vector<bool> truncated = region.truncated;
    truncated.resize(region.dim(), false);
    j["truncated"] = truncated;
    return j;
}

nlohmann::json to_json(const MarginReport& report) {
    return {{"worst", finite_or_null(report.worst)},
            {"worst_point", vec_json(report.worst_point)},
            {"points", report.points},
            {"pass", report.pass}};
}

nlohmann::json to_json(const Certificate& cert) {
    nlohmann::json j;
    j["measure"] = to_string(cert.measure);
    j["c_bar"] = cert.c_bar;
    j["c1"] = cert.c1;
    j["c2"] = cert.c2;
    j["rate"] = cert.rate() ? nlohmann::json(*cert.rate()) : nlohmann::json(nullptr);
    j["worst_margin_splus"] = finite_or_null(cert.splus.worst);
    j["worst_margin_sminus"] = cert.sminus_checked ? finite_or_null(cert.sminus.worst) : nlohmann::json(nullptr);
    j["worst_sigma_mu"] = cert.worst_sigma_mu;
    j["worst_sigma_mu_negated"] = cert.worst_sigma_mu_negated;
    j["conditions"] = {
        {"splus", to_json(cert.splus)},
        {"sminus", cert.sminus_checked ? to_json(cert.sminus) : nlohmann::json(nullptr)},
        {"sigma",
         {{"samples", cert.sigma_points},
          {"ties_excluded", cert.ties_excluded},
          {"worst_point", vec_json(cert.worst_sigma_point)},
          {"pass", cert.sigma_pass}}},
    };
    j["switching_function"] = cert.surface;
    j["grid"] = to_json(cert.region);
    j["tolerances"] = {{"inequality", cert.options.ineq_tol},
                       {"sigma_equality", cert.options.sigma_eq_tol},
                       {"sigma_location", cert.options.sigma_locate_tol}};
    j["warnings"] = cert.warnings;
    j["verdict"] = cert.pass() ? "pass" : "fail";
    return j;
}

nlohmann::json to_json(const DecayReport& report) {
    return {{"id", report.id},
            {"K", report.k},
            {"lambda", report.lambda},
            {"norm", to_string(report.norm)},
            {"samples", report.times.size()},
            {"initial_distance", report.distances.empty() ? 0.0 : report.distances.front()},
            {"max_ratio", finite_or_null(report.max_ratio)},
            {"max_ratio_time", report.max_ratio_time},
            {"tolerance", report.rel_tol},
            {"verdict", report.pass() ? "pass" : "fail"}};
}

void write_decay_csv(std::ostream& os, const DecayReport& report) {
    os << "t,distance,bound,ratio\n";
    for (std::size_t i = 0; i < report.times.size(); ++i) {
        os << fmt::format("{:.17g},{:.17g},{:.17g},{:.17g}\n", report.times[i], report.distances[i], report.bounds[i],
                          report.ratios[i]);
    }
}

}  // namespace pwsc
