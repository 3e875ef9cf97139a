#include "pwsc/filippov.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <algorithm>
#include <cmath>
#include <ostream>

namespace pwsc {

FilippovSystem::FilippovSystem(FieldPtr plus_field, FieldPtr minus_field, SurfacePtr h)
    : plus(std::move(plus_field)), minus(std::move(minus_field)), surface(std::move(h)) {
    if (!plus || !minus || !surface) throw std::invalid_argument("Filippov system needs two fields and a surface");
    if (plus->dim() != minus->dim() || surface->dim() != plus->dim()) {
        throw DimensionError(fmt::format("field dimensions {} / {} and surface dimension {} disagree", plus->dim(),
                                         minus->dim(), surface->dim()));
    }
}

FilippovSystem FilippovSystem::smooth(FieldPtr field, SurfacePtr h) { return {field, field, std::move(h)}; }

std::string to_string(Mode mode) {
    switch (mode) {
    case Mode::Plus: return "plus";
    case Mode::Minus: return "minus";
    case Mode::Sliding: return "sliding";
    }
    return "?";
}

std::string to_string(EventKind kind) {
    switch (kind) {
    case EventKind::Crossing: return "crossing";
    case EventKind::SlideEntry: return "slide-entry";
    case EventKind::SlideExit: return "slide-exit";
    }
    return "?";
}

SimulationError::SimulationError(Kind kind, const std::string& message, Trajectory partial)
    : std::runtime_error(message), kind_(kind), partial_(std::move(partial)) {}

Classification classify(const FilippovSystem& sys, const Vector& x, std::optional<Mode> from) {
    const Vector grad = sys.surface->gradient(x);
    Classification c;
    c.a = grad.dot(sys.plus->value(x));
    c.b = grad.dot(sys.minus->value(x));
    if (c.a > 0.0 && c.b > 0.0) {
        c.next = Mode::Plus;
    } else if (c.a < 0.0 && c.b < 0.0) {
        c.next = Mode::Minus;
    } else if (c.a > 0.0 && c.b < 0.0) {
        throw SimulationError(SimulationError::Kind::EscapingRegion,
                              fmt::format("escaping region at x = [{}] (grad H.F+ = {:.6g}, grad H.F- = {:.6g})",
                                          fmt::join(x.data(), x.data() + x.size(), ", "), c.a, c.b));
    } else if (c.a == 0.0 && c.b == 0.0) {
        c.next = from.value_or(Mode::Plus) == Mode::Minus ? Mode::Minus : Mode::Plus;
    } else {
        c.kind = Classification::Kind::Sliding;
        c.next = Mode::Sliding;
    }
    return c;
}

double sliding_alpha(const Vector& f_plus, const Vector& f_minus, const Vector& grad_h) {
    const double denom = grad_h.dot(f_minus - f_plus);
    if (std::abs(denom) < 1e-12) {
        throw SimulationError(SimulationError::Kind::DegenerateSliding,
                              "sliding vector field undefined: both fields have the same normal component");
    }
    return grad_h.dot(f_minus) / denom;
}

Vector sliding_field(const Vector& f_plus, const Vector& f_minus, const Vector& grad_h) {
    const double alpha = sliding_alpha(f_plus, f_minus, grad_h);
    return alpha * f_plus + (1.0 - alpha) * f_minus;
}

Vector sliding_field(const FilippovSystem& sys, const Vector& x) {
    return sliding_field(sys.plus->value(x), sys.minus->value(x), sys.surface->gradient(x));
}

double transition(const RegularizationConfig& cfg, double s) {
    const double r = s / cfg.epsilon;
    if (r >= 1.0) return 1.0;
    if (r <= -1.0) return -1.0;
    switch (cfg.transition) {
    case TransitionKind::Cubic: return 1.5 * r - 0.5 * r * r * r;
    case TransitionKind::Quintic: {
        const double r2 = r * r;
        return r * (15.0 - 10.0 * r2 + 3.0 * r2 * r2) / 8.0;
    }
    }
    return 0.0;
}

Vector regularized_field(const FilippovSystem& sys, const RegularizationConfig& cfg, const Vector& x) {
    if (!(cfg.epsilon > 0.0)) throw std::invalid_argument("regularization needs epsilon > 0");
    const double phi = transition(cfg, sys.surface->value(x));
    if (phi == 1.0) return sys.plus->value(x);
    if (phi == -1.0) return sys.minus->value(x);
    return 0.5 * (1.0 + phi) * sys.plus->value(x) + 0.5 * (1.0 - phi) * sys.minus->value(x);
}

namespace {

template <class Rhs>
Vector rk4(const Rhs& f, const Vector& x, double h) {
    const Vector k1 = f(x);
    const Vector k2 = f(x + 0.5 * h * k1);
    const Vector k3 = f(x + 0.5 * h * k2);
    const Vector k4 = f(x + h * k3);
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

double side(Mode m) { return m == Mode::Plus ? 1.0 : -1.0; }

// Output grid t0, t0 + h, ..., with the final step shortened to land on t1.
std::vector<double> time_grid(const SimulationOptions& opts) {
    if (!(opts.step > 0.0) || !std::isfinite(opts.step)) {
        throw SimulationError(SimulationError::Kind::InvalidInput, "simulation step must be positive");
    }
    if (!(opts.t1 > opts.t0)) {
        throw SimulationError(SimulationError::Kind::InvalidInput, "empty time span: trajectory would be empty");
    }
    const auto steps = static_cast<std::size_t>(std::ceil((opts.t1 - opts.t0) / opts.step - 1e-9));
    std::vector<double> grid;
    grid.reserve(steps + 1);
    for (std::size_t k = 0; k < steps; ++k) grid.push_back(opts.t0 + static_cast<double>(k) * opts.step);
    grid.push_back(opts.t1);
    return grid;
}

class FilippovIntegrator {
public:
    FilippovIntegrator(const FilippovSystem& sys, const SimulationOptions& opts) : sys_(sys), opts_(opts) {}

    Trajectory run(const Vector& x0) {
        if (static_cast<std::size_t>(x0.size()) != sys_.dim()) {
            throw DimensionError(fmt::format("initial state has size {}, expected {}", x0.size(), sys_.dim()));
        }
        const auto grid = time_grid(opts_);
        x_ = x0;
        t_ = grid.front();
        guard();
        mode_ = initial_mode();
        record();
        try {
            for (std::size_t k = 1; k < grid.size(); ++k) {
                advance(grid[k]);
                record();
            }
        } catch (SimulationError& e) {
            throw SimulationError(e.kind(), fmt::format("{} (t = {:.6g})", e.what(), t_), traj_);
        } catch (expr::EvalError& e) {
            throw SimulationError(SimulationError::Kind::Evaluation, fmt::format("{} (t = {:.6g})", e.what(), t_),
                                  traj_);
        }
        return std::move(traj_);
    }

private:
    Mode initial_mode() {
        const double h = sys_.surface->value(x_);
        if (h > opts_.event_tol) return Mode::Plus;
        if (h < -opts_.event_tol) return Mode::Minus;
        const auto c = classify(sys_, x_);
        if (c.kind == Classification::Kind::Sliding) project(x_);
        return c.next;
    }

    void record() {
        traj_.times.push_back(t_);
        traj_.states.push_back(x_);
        traj_.modes.push_back(mode_);
    }

    void add_event(EventKind kind) { traj_.events.push_back({t_, x_, kind, mode_}); }

    void guard(const Vector& x) const {
        if (!x.allFinite() || x.lpNorm<Eigen::Infinity>() > opts_.divergence_bound) {
            throw SimulationError(SimulationError::Kind::FiniteEscape,
                                  fmt::format("finite escape: ||x||_inf exceeded {:g}", opts_.divergence_bound));
        }
    }
    void guard() const { guard(x_); }

    void advance(double t_end) {
        int events = 0;
        while (t_end - t_ > 1e-14 * std::max(1.0, std::abs(t_end))) {
            if (events > opts_.max_events_per_step) {
                throw SimulationError(SimulationError::Kind::TooManyEvents,
                                      fmt::format("more than {} switching events within one step",
                                                  opts_.max_events_per_step));
            }
            const double dt = t_end - t_;
            const bool event = mode_ == Mode::Sliding ? sliding_substep(dt) : smooth_substep(dt);
            if (event) ++events;
        }
        t_ = t_end;
    }

    // Integrates in mode Plus/Minus over dt; stops early at a manifold hit.
    bool smooth_substep(double dt) {
        const VectorField& field = mode_ == Mode::Plus ? *sys_.plus : *sys_.minus;
        const double s = side(mode_);
        const auto rhs = [&](const Vector& y) { return field.value(y); };
        const Vector start = x_;
        const auto flow = [&](double theta) { return rk4(rhs, start, theta * dt); };
        const auto g = [&](const Vector& y) { return s * sys_.surface->value(y); };

        Vector end = flow(1.0);
        guard(end);
        const double tol = opts_.event_tol;
        if (g(end) >= -tol) {
            x_ = std::move(end);
            t_ += dt;
            return false;
        }

        double lo = 0.0;
        double hi = 1.0;
        if (g(start) <= tol) {
            // Started on the manifold and ended on the wrong side: either a
            // later re-crossing within the step, or an immediate departure.
            constexpr int kProbes = 16;
            bool bracketed = false;
            for (int i = 1; i < kProbes; ++i) {
                const double theta = static_cast<double>(i) / kProbes;
                if (g(flow(theta)) > tol) {
                    lo = theta;
                    bracketed = true;
                    break;
                }
            }
            if (!bracketed) {
                const auto c = classify(sys_, start, mode_);
                if (c.next == mode_) {
                    x_ = std::move(end);
                    t_ += dt;
                    return false;
                }
                switch_mode(c);
                return true;
            }
        }

        Vector hit = flow(hi);
        double theta_hit = hi;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            Vector y = flow(mid);
            const double gm = g(y);
            if (std::abs(gm) <= tol) {
                hit = std::move(y);
                theta_hit = mid;
                break;
            }
            if (gm > 0.0) {
                lo = mid;
            } else {
                hi = mid;
                hit = std::move(y);
                theta_hit = mid;
            }
            if ((hi - lo) * dt <= 1e-16 * std::max(1.0, std::abs(t_))) break;
        }

        x_ = std::move(hit);
        t_ += theta_hit * dt;
        const auto c = classify(sys_, x_, mode_);
        if (c.next != mode_) switch_mode(c);
        return true;
    }

    void switch_mode(const Classification& c) {
        mode_ = c.next;
        if (c.kind == Classification::Kind::Sliding) {
            project(x_);
            add_event(EventKind::SlideEntry);
        } else {
            add_event(EventKind::Crossing);
        }
    }

    // Newton steps on H along grad H; one step normally suffices.
    void project(Vector& y) const {
        for (int it = 0; it < 5; ++it) {
            const double h = sys_.surface->value(y);
            if (std::abs(h) <= opts_.event_tol) return;
            const Vector grad = sys_.surface->gradient(y);
            const double g2 = grad.squaredNorm();
            if (g2 <= kMinGradientNorm * kMinGradientNorm) {
                throw SimulationError(SimulationError::Kind::DegenerateSliding,
                                      "gradient of the switching function vanishes while sliding");
            }
            y -= (h / g2) * grad;
        }
        if (std::abs(sys_.surface->value(y)) > opts_.sliding_tol) {
            throw SimulationError(SimulationError::Kind::DegenerateSliding,
                                  "projection onto the switching manifold did not converge");
        }
    }

    // Positive while the point is still an attracting sliding point.
    double sliding_margin(const Vector& y) const {
        const Vector grad = sys_.surface->gradient(y);
        const double a = grad.dot(sys_.plus->value(y));
        const double b = grad.dot(sys_.minus->value(y));
        return std::min(b, -a);
    }

    bool sliding_substep(double dt) {
        const Vector start = x_;
        const auto rhs = [&](const Vector& y) { return sliding_field(sys_, y); };
        const auto flow = [&](double theta) {
            Vector y = rk4(rhs, start, theta * dt);
            guard(y);
            project(y);
            return y;
        };

        Vector end = flow(1.0);
        if (sliding_margin(end) >= 0.0) {
            x_ = std::move(end);
            t_ += dt;
            return false;
        }

        double lo = 0.0;
        double hi = 1.0;
        for (int it = 0; it < 200 && (hi - lo) * dt > 1e-15 * std::max(1.0, std::abs(t_)); ++it) {
            const double mid = 0.5 * (lo + hi);
            if (sliding_margin(flow(mid)) >= 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        x_ = flow(hi);
        t_ += hi * dt;
        const auto c = classify(sys_, x_, Mode::Sliding);
        mode_ = c.kind == Classification::Kind::Sliding ? (c.a >= 0.0 ? Mode::Plus : Mode::Minus) : c.next;
        add_event(EventKind::SlideExit);
        return true;
    }

    const FilippovSystem& sys_;
    const SimulationOptions& opts_;
    Trajectory traj_;
    Vector x_;
    double t_ = 0.0;
    Mode mode_ = Mode::Plus;
};

Mode regularized_label(double h) { return h < 0.0 ? Mode::Minus : Mode::Plus; }

}  // namespace

Trajectory simulate(const FilippovSystem& sys, const Vector& x0, const SimulationOptions& opts) {
    return FilippovIntegrator(sys, opts).run(x0);
}

Trajectory simulate_regularized(const FilippovSystem& sys, const RegularizationConfig& cfg, const Vector& x0,
                                const SimulationOptions& opts) {
    if (!(cfg.epsilon > 0.0)) {
        throw SimulationError(SimulationError::Kind::InvalidInput, "regularization needs epsilon > 0");
    }
    if (static_cast<std::size_t>(x0.size()) != sys.dim()) {
        throw DimensionError(fmt::format("initial state has size {}, expected {}", x0.size(), sys.dim()));
    }
    const auto grid = time_grid(opts);
    const auto rhs = [&](const Vector& y) { return regularized_field(sys, cfg, y); };
    const double eps = cfg.epsilon;

    Trajectory traj;
    Vector x = x0;
    const auto push = [&](double t) {
        traj.times.push_back(t);
        traj.states.push_back(x);
        traj.modes.push_back(regularized_label(sys.surface->value(x)));
    };
    const auto guard = [&](const Vector& y, double t) {
        if (!y.allFinite() || y.lpNorm<Eigen::Infinity>() > opts.divergence_bound) {
            throw SimulationError(SimulationError::Kind::FiniteEscape,
                                  fmt::format("finite escape: ||x||_inf exceeded {:g} (t = {:.6g})",
                                              opts.divergence_bound, t),
                                  traj);
        }
    };

    guard(x, grid.front());
    push(grid.front());
    for (std::size_t k = 1; k < grid.size(); ++k) {
        const double dt = grid[k] - grid[k - 1];
        Vector trial = rk4(rhs, x, dt);
        guard(trial, grid[k]);
        const double h0 = sys.surface->value(x);
        const double h1 = sys.surface->value(trial);
        if (std::abs(h0) >= eps && std::abs(h1) >= eps && h0 * h1 > 0.0) {
            x = std::move(trial);
        } else {
            const Vector grad = sys.surface->gradient(x);
            const double speed =
                std::max(std::abs(grad.dot(sys.plus->value(x))), std::abs(grad.dot(sys.minus->value(x))));
            const double wanted = std::ceil(4.0 * dt * speed / eps);
            const auto substeps = static_cast<long>(std::clamp(wanted, 1.0, 1e6));
            const double h = dt / static_cast<double>(substeps);
            for (long i = 0; i < substeps; ++i) x = rk4(rhs, x, h);
            guard(x, grid[k]);
        }
        push(grid[k]);
    }
    return traj;
}

namespace {

void write_row_prefix(std::ostream& os, double t, const Vector& x) {
    os << fmt::format("{:.17g}", t);
    for (Eigen::Index i = 0; i < x.size(); ++i) os << fmt::format(",{:.17g}", x(i));
}

}  // namespace

void write_trajectory_csv(std::ostream& os, const Trajectory& traj, const FilippovSystem& sys,
                          const std::vector<std::string>& vars) {
    os << "t";
    for (const auto& v : vars) os << ',' << v;
    os << ",mode,H\n";
    for (std::size_t k = 0; k < traj.size(); ++k) {
        write_row_prefix(os, traj.times[k], traj.states[k]);
        os << ',' << to_string(traj.modes[k]) << fmt::format(",{:.17g}\n", sys.surface->value(traj.states[k]));
    }
}

void write_events_csv(std::ostream& os, const Trajectory& traj, const std::vector<std::string>& vars) {
    os << "t";
    for (const auto& v : vars) os << ',' << v;
    os << ",kind\n";
    for (const auto& e : traj.events) {
        write_row_prefix(os, e.t, e.x);
        os << ',' << to_string(e.kind) << '\n';
    }
}

}  // namespace pwsc
