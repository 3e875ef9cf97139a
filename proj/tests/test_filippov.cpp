#include <catch_amalgamated.hpp>

#include "fixtures.hpp"
#include "pwsc/filippov.hpp"

#include <cmath>
#include <random>
#include <sstream>

using namespace pwsc;
using fixtures::vec;
using Catch::Matchers::WithinAbs;

namespace {

FieldPtr field(const std::vector<std::string>& comps, const std::vector<std::string>& vars = fixtures::vars2()) {
    return std::make_shared<SymbolicField>(expr::VectorExpr::parse(comps, vars));
}

SurfacePtr surface(const std::string& h, const std::vector<std::string>& vars = fixtures::vars2()) {
    return ExprSurface::parse(h, vars);
}

// Enters a sliding segment on x2 = 0, leaves it at t = 1 once x1 reaches 1.
FilippovSystem slide_and_exit() { return {field({"1", "-1 + x1"}), field({"1", "1"}), surface("x2")}; }

SimulationOptions span(double t1, double step = 1e-3) {
    SimulationOptions o;
    o.t1 = t1;
    o.step = step;
    return o;
}

double sup_gap(const Trajectory& a, const Trajectory& b) {
    REQUIRE(a.size() == b.size());
    double g = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) g = std::max(g, (a.states[i] - b.states[i]).lpNorm<Eigen::Infinity>());
    return g;
}

}  // namespace

TEST_CASE("classification at the manifold", "[filippov]") {
    const FilippovSystem sliding{field({"1", "-1"}), field({"1", "1"}), surface("x2")};
    auto c = classify(sliding, vec(0, 0));
    CHECK(c.kind == Classification::Kind::Sliding);
    CHECK(c.a == -1.0);
    CHECK(c.b == 1.0);

    const FilippovSystem down{field({"1", "-1"}), field({"1", "-1"}), surface("x2")};
    c = classify(down, vec(0, 0));
    CHECK(c.kind == Classification::Kind::Crossing);
    CHECK(c.next == Mode::Minus);

    const FilippovSystem escaping{field({"1", "1"}), field({"1", "-1"}), surface("x2")};
    CHECK_THROWS_AS(classify(escaping, vec(0, 0)), SimulationError);
    try {
        (void)classify(escaping, vec(0, 0));
    } catch (const SimulationError& e) {
        CHECK(e.kind() == SimulationError::Kind::EscapingRegion);
    }
}

TEST_CASE("Filippov sliding field", "[filippov]") {
    const Vector n = vec(0, 1);
    CHECK(sliding_alpha(vec(1, -1), vec(1, 1), n) == 0.5);
    const Vector fs = sliding_field(vec(1, -1), vec(1, 1), n);
    CHECK(fs(0) == 1.0);
    CHECK(fs(1) == 0.0);

    // Solve 0 = a*(-2) + (1 - a)*1 by hand: a = 1/3, F_s = (2/3, 0).
    CHECK_THAT(sliding_alpha(vec(2, -2), vec(0, 1), n), WithinAbs(1.0 / 3.0, 1e-15));
    const Vector fs2 = sliding_field(vec(2, -2), vec(0, 1), n);
    CHECK_THAT(fs2(0), WithinAbs(2.0 / 3.0, 1e-15));
    CHECK_THAT(fs2(1), WithinAbs(0.0, 1e-15));

    CHECK_THROWS_AS(sliding_alpha(vec(1, 1), vec(2, 1), n), SimulationError);
}

TEST_CASE("sliding field is tangent to the manifold", "[filippov][property]") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> c(-5, 5);
    for (int i = 0; i < 200; ++i) {
        const Vector grad = vec(c(rng), c(rng));
        const Vector fp = vec(c(rng), c(rng));
        const Vector fm = vec(c(rng), c(rng));
        if (std::abs(grad.dot(fm - fp)) < 1e-3) continue;
        CHECK(std::abs(grad.dot(sliding_field(fp, fm, grad))) <= 1e-12 * std::max(1.0, grad.norm() * (fp.norm() + fm.norm())));
    }
}

TEST_CASE("smooth flow matches the closed form", "[filippov]") {
    const std::vector<std::string> v{"x1"};
    const auto sys = FilippovSystem::smooth(field({"-2*x1"}, v), surface("x1 + 10", v));
    Vector x0(1);
    x0 << 1.0;
    const Trajectory tr = simulate(sys, x0, span(1.0));
    CHECK_THAT(tr.times.back(), WithinAbs(1.0, 1e-15));
    CHECK_THAT(tr.states.back()(0), WithinAbs(std::exp(-2.0), 1e-6));
    CHECK(tr.events.empty());
    CHECK(tr.size() == 1001);
}

TEST_CASE("crossing event on a linear flow", "[filippov]") {
    const auto f = field({"1", "-1"});
    const FilippovSystem sys{f, f, surface("x2")};
    const Trajectory tr = simulate(sys, vec(0, 1), span(2.0));
    REQUIRE(tr.events.size() == 1);
    const Event& e = tr.events[0];
    CHECK(e.kind == EventKind::Crossing);
    CHECK(e.next == Mode::Minus);
    CHECK_THAT(e.t, WithinAbs(1.0, 1e-9));
    CHECK_THAT(e.x(0), WithinAbs(1.0, 1e-9));
    CHECK_THAT(e.x(1), WithinAbs(0.0, 1e-9));
    CHECK(tr.modes.front() == Mode::Plus);
    CHECK(tr.modes.back() == Mode::Minus);
}

TEST_CASE("slide entry and exit follow the analytic solution", "[filippov]") {
    const Trajectory tr = simulate(slide_and_exit(), vec(0, 0.3), span(2.0));
    REQUIRE(tr.events.size() == 2);
    CHECK(tr.events[0].kind == EventKind::SlideEntry);
    CHECK(tr.events[0].next == Mode::Sliding);
    CHECK_THAT(tr.events[0].t, WithinAbs(1.0 - std::sqrt(0.4), 1e-8));
    CHECK(tr.events[1].kind == EventKind::SlideExit);
    CHECK(tr.events[1].next == Mode::Plus);
    CHECK_THAT(tr.events[1].t, WithinAbs(1.0, 1e-8));
    // After the exit x2 = (t - 1)^2 / 2.
    CHECK_THAT(tr.states.back()(0), WithinAbs(2.0, 1e-9));
    CHECK_THAT(tr.states.back()(1), WithinAbs(0.5, 1e-6));
    for (std::size_t i = 0; i < tr.size(); ++i) {
        const double t = tr.times[i];
        if (t > 0.4 && t < 0.99) CHECK(tr.modes[i] == Mode::Sliding);
    }
}

TEST_CASE("sliding samples stay on the manifold", "[filippov][property]") {
    const std::vector<std::pair<FilippovSystem, Vector>> cases{
        {slide_and_exit(), vec(0, 0.3)},
        {fixtures::closed_loop(fixtures::example1()), vec(1, 4)},
        {fixtures::closed_loop(fixtures::example2()), vec(1, 8)},
        {{field({"1", "-1 - x1^2"}), field({"-1", "2"}), surface("x2 - 0.1*x1")}, vec(0.5, 1.0)},
    };
    for (const auto& [sys, x0] : cases) {
        const Trajectory tr = simulate(sys, x0, span(3.0));
        for (std::size_t i = 0; i < tr.size(); ++i) {
            if (tr.modes[i] == Mode::Sliding) CHECK(std::abs(sys.surface->value(tr.states[i])) <= 1e-8);
        }
    }
}

TEST_CASE("events are ordered and explain every mode change", "[filippov][property]") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> c(-3, 6);
    const FilippovSystem sys = fixtures::closed_loop(fixtures::example1());
    const FilippovSystem other{field({"1", "-1 - x1^2"}), field({"-1", "2"}), surface("x2 - 0.1*x1")};
    for (int trial = 0; trial < 20; ++trial) {
        const FilippovSystem& s = trial % 2 == 0 ? sys : other;
        const Trajectory tr = simulate(s, vec(c(rng), c(rng)), span(2.0, 1e-2));
        for (std::size_t i = 1; i < tr.events.size(); ++i) CHECK(tr.events[i].t > tr.events[i - 1].t);
        for (std::size_t k = 1; k < tr.size(); ++k) {
            if (tr.modes[k] == tr.modes[k - 1]) continue;
            const bool explained = std::any_of(tr.events.begin(), tr.events.end(), [&](const Event& e) {
                return e.t > tr.times[k - 1] - 1e-12 && e.t <= tr.times[k] + 1e-12;
            });
            CHECK(explained);
        }
        for (std::size_t k = 1; k < tr.size(); ++k) CHECK(tr.times[k] > tr.times[k - 1]);
    }
}

TEST_CASE("simulation is deterministic", "[filippov][property]") {
    const FilippovSystem sys = fixtures::closed_loop(fixtures::example1());
    const Trajectory a = simulate(sys, vec(1, 4), span(4.0));
    const Trajectory b = simulate(sys, vec(1, 4), span(4.0));
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.times[i] == b.times[i]);
        CHECK(a.states[i] == b.states[i]);
        CHECK(a.modes[i] == b.modes[i]);
    }
    REQUIRE(a.events.size() == b.events.size());
    for (std::size_t i = 0; i < a.events.size(); ++i) CHECK(a.events[i].t == b.events[i].t);
}

TEST_CASE("open-loop plant escapes in finite time", "[filippov]") {
    try {
        (void)simulate(fixtures::open_loop(), vec(1, 9), span(4.0));
        FAIL("expected a finite-escape error");
    } catch (const SimulationError& e) {
        CHECK(e.kind() == SimulationError::Kind::FiniteEscape);
        const Trajectory& p = e.partial();
        REQUIRE_FALSE(p.empty());
        double peak = 0.0;
        for (const auto& x : p.states) peak = std::max(peak, x(1));
        CHECK(peak > 100.0);
        // x2' = x2^2 - 6 x2 from 9 blows up at ln(3)/6.
        CHECK_THAT(p.times.back(), WithinAbs(std::log(3.0) / 6.0, 2e-3));
    }
}

TEST_CASE("starting in an escaping configuration is an error", "[filippov]") {
    const FilippovSystem escaping{field({"1", "1"}), field({"1", "-1"}), surface("x2")};
    CHECK_THROWS_AS(simulate(escaping, vec(0, 0), span(1.0)), SimulationError);
}

TEST_CASE("invalid time spans are rejected", "[filippov]") {
    const FilippovSystem sys = fixtures::closed_loop(fixtures::example1());
    SimulationOptions o;
    o.t0 = 1.0;
    o.t1 = 1.0;
    CHECK_THROWS_AS(simulate(sys, vec(1, 4), o), SimulationError);
    o.t1 = 2.0;
    o.step = 0.0;
    CHECK_THROWS_AS(simulate(sys, vec(1, 4), o), SimulationError);
}

TEST_CASE("transition functions", "[filippov][property]") {
    for (auto kind : {TransitionKind::Cubic, TransitionKind::Quintic}) {
        const RegularizationConfig cfg{0.1, kind};
        CHECK(transition(cfg, 0.1) == 1.0);
        CHECK(transition(cfg, -0.1) == -1.0);
        CHECK(transition(cfg, 5.0) == 1.0);
        CHECK(transition(cfg, -5.0) == -1.0);
        CHECK(transition(cfg, 0.0) == 0.0);
        const double h = 1e-7;
        CHECK(std::abs((transition(cfg, 0.1) - transition(cfg, 0.1 - h)) / h) <= 1e-4);
        CHECK(std::abs((transition(cfg, -0.1 + h) - transition(cfg, -0.1)) / h) <= 1e-4);
        double prev = -1.0;
        for (int i = -100; i <= 100; ++i) {
            const double s = 0.001 * i;
            CHECK_THAT(transition(cfg, -s), WithinAbs(-transition(cfg, s), 1e-15));
            CHECK(transition(cfg, s) >= prev);
            prev = transition(cfg, s);
        }
    }
    CHECK_THAT(transition({1.0, TransitionKind::Cubic}, 0.5), WithinAbs(0.75 - 0.0625, 1e-15));
}

TEST_CASE("regularised field blends the two modes", "[filippov]") {
    const FilippovSystem sys = fixtures::closed_loop(fixtures::example1());
    const RegularizationConfig cfg{1e-3, TransitionKind::Cubic};
    const Vector above = vec(0.5, 2.001);
    CHECK(regularized_field(sys, cfg, above) == sys.plus->value(above));
    const Vector below = vec(0.5, 1.5);
    CHECK(regularized_field(sys, cfg, below) == sys.minus->value(below));
    const Vector on = vec(0.5, 2.0);
    const Vector mid = 0.5 * (sys.plus->value(on) + sys.minus->value(on));
    CHECK((regularized_field(sys, cfg, on) - mid).norm() <= 1e-12);
}

TEST_CASE("regularised trajectories approach the Filippov solution", "[filippov][property]") {
    const FilippovSystem sys = fixtures::closed_loop(fixtures::example1());
    const SimulationOptions o = span(3.0);
    const Trajectory ref = simulate(sys, vec(1, 4), o);
    std::vector<double> gaps;
    for (double eps : {1e-1, 1e-2, 1e-3}) {
        gaps.push_back(sup_gap(ref, simulate_regularized(sys, {eps, TransitionKind::Cubic}, vec(1, 4), o)));
    }
    CHECK(gaps[1] < gaps[0]);
    CHECK(gaps[2] < gaps[1]);
    CHECK(gaps[2] <= 5e-2);
    const Trajectory r2 = simulate_regularized(sys, {1e-2, TransitionKind::Cubic}, vec(1, 4), o);
    const Trajectory r3 = simulate_regularized(sys, {1e-3, TransitionKind::Cubic}, vec(1, 4), o);
    CHECK(sup_gap(r2, r3) <= 5e-2);
}

TEST_CASE("pairs simulated with the same options share a grid", "[filippov]") {
    const FilippovSystem sys = fixtures::closed_loop(fixtures::example1());
    const Trajectory a = simulate(sys, vec(1, 4), span(4.0));
    const Trajectory b = simulate(sys, vec(2, 5), span(4.0));
    REQUIRE(a.size() == b.size());
    CHECK(a.times == b.times);
}

TEST_CASE("CSV export", "[filippov]") {
    const auto f = field({"1", "-1"});
    const FilippovSystem sys{f, f, surface("x2")};
    const Trajectory tr = simulate(sys, vec(0, 1), span(2.0, 0.5));
    std::ostringstream csv;
    write_trajectory_csv(csv, tr, sys, fixtures::vars2());
    const std::string text = csv.str();
    CHECK(text.rfind("t,x1,x2,mode,H\n0,0,1,plus,1\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 6);
    std::ostringstream ev;
    write_events_csv(ev, tr, fixtures::vars2());
    const std::string events = ev.str();
    CHECK(events.rfind("t,x1,x2,kind\n", 0) == 0);
    CHECK(events.find(",crossing\n") != std::string::npos);
    CHECK(std::count(events.begin(), events.end(), '\n') == 2);
}
