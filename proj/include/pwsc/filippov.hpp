#pragma once

// Bimodal Filippov systems
//
//   x' = F+(x)  if H(x) > 0
//   x' = F-(x)  if H(x) < 0
//
// At a point of the switching manifold {H = 0} let a = grad H . F+ and
// b = grad H . F-. Both of the same sign is a crossing; a < 0 < b is an
// attracting sliding region, where the motion follows the Filippov convex
// combination
//
//   F_s = alpha F+ + (1 - alpha) F-,   alpha = b / (b - a),
//
// which is tangent to the manifold. a > 0 > b (escaping) is rejected: such
// points have non-unique forward solutions.

#include "pwsc/dynamics.hpp"
#include "pwsc/surface.hpp"
#include "pwsc/types.hpp"

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pwsc {

struct FilippovSystem {
    FieldPtr plus;
    FieldPtr minus;
    SurfacePtr surface;

    FilippovSystem(FieldPtr plus_field, FieldPtr minus_field, SurfacePtr h);
    FilippovSystem(const ClosedLoopField& fields, SurfacePtr h) : FilippovSystem(fields.plus, fields.minus, std::move(h)) {}

    /// The same smooth field on both sides of the manifold.
    static FilippovSystem smooth(FieldPtr field, SurfacePtr h);

    [[nodiscard]] std::size_t dim() const noexcept { return plus->dim(); }
};

enum class Mode { Plus, Minus, Sliding };
enum class EventKind { Crossing, SlideEntry, SlideExit };

[[nodiscard]] std::string to_string(Mode mode);
[[nodiscard]] std::string to_string(EventKind kind);

struct Event {
    double t = 0.0;
    Vector x;
    EventKind kind = EventKind::Crossing;
    Mode next = Mode::Plus;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<Vector> states;
    std::vector<Mode> modes;
    std::vector<Event> events;

    [[nodiscard]] std::size_t size() const noexcept { return times.size(); }
    [[nodiscard]] bool empty() const noexcept { return times.empty(); }
};

class SimulationError : public std::runtime_error {
public:
    enum class Kind { EscapingRegion, FiniteEscape, DegenerateSliding, TooManyEvents, Evaluation, InvalidInput };

    SimulationError(Kind kind, const std::string& message, Trajectory partial = {});

    [[nodiscard]] Kind kind() const noexcept { return kind_; }
    [[nodiscard]] const Trajectory& partial() const noexcept { return partial_; }

private:
    Kind kind_;
    Trajectory partial_;
};

struct Classification {
    enum class Kind { Crossing, Sliding } kind = Kind::Crossing;
    Mode next = Mode::Plus;  // Plus/Minus for crossings, Sliding otherwise
    double a = 0.0;          // grad H . F+
    double b = 0.0;          // grad H . F-
};

/// Decides what happens at a point on (or within tolerance of) the manifold.
/// `from` breaks the tie when both fields are tangent. Throws SimulationError
/// (EscapingRegion) when both fields point away from the manifold.
[[nodiscard]] Classification classify(const FilippovSystem& sys, const Vector& x, std::optional<Mode> from = {});

/// alpha = (grad H . F-) / (grad H . (F- - F+)); throws SimulationError
/// (DegenerateSliding) if the denominator is below 1e-12 in magnitude.
[[nodiscard]] double sliding_alpha(const Vector& f_plus, const Vector& f_minus, const Vector& grad_h);

[[nodiscard]] Vector sliding_field(const Vector& f_plus, const Vector& f_minus, const Vector& grad_h);
[[nodiscard]] Vector sliding_field(const FilippovSystem& sys, const Vector& x);

struct SimulationOptions {
    double t0 = 0.0;
    double t1 = 1.0;
    double step = 1e-3;
    double event_tol = 1e-10;       // |H| at located events
    double sliding_tol = 1e-8;      // |H| kept during sliding
    double divergence_bound = 1e6;  // on ||x||_inf
    int max_events_per_step = 16;
};

/// Fixed-step RK4 with event location. Samples are recorded exactly on the
/// grid t0 + k*step (the last step is shortened to end at t1), so trajectories
/// simulated with the same options share a time grid; events in between are
/// listed in Trajectory::events.
[[nodiscard]] Trajectory simulate(const FilippovSystem& sys, const Vector& x0, const SimulationOptions& opts);

enum class TransitionKind { Cubic, Quintic };

struct RegularizationConfig {
    double epsilon = 1e-3;
    TransitionKind transition = TransitionKind::Cubic;
};

/// Odd C^1 transition phi_eps with phi(+-eps) = +-1, phi'(+-eps) = 0, clamped outside.
[[nodiscard]] double transition(const RegularizationConfig& cfg, double s);

/// f_eps(x) = (1 + phi(H)) / 2 F+(x) + (1 - phi(H)) / 2 F-(x)
[[nodiscard]] Vector regularized_field(const FilippovSystem& sys, const RegularizationConfig& cfg, const Vector& x);

/// RK4 on f_eps over the same output grid as simulate(). Steps that touch the
/// boundary layer are subdivided so each substep advances H by at most eps/4.
[[nodiscard]] Trajectory simulate_regularized(const FilippovSystem& sys, const RegularizationConfig& cfg,
                                              const Vector& x0, const SimulationOptions& opts);

/// `t,<vars...>,mode,H`, one row per sample.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj, const FilippovSystem& sys,
                          const std::vector<std::string>& vars);

/// `t,<vars...>,kind`, one row per event.
void write_events_csv(std::ostream& os, const Trajectory& traj, const std::vector<std::string>& vars);

}  // namespace pwsc
