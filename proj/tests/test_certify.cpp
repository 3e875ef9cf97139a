#include <catch_amalgamated.hpp>

#include "fixtures.hpp"
#include "pwsc/certify.hpp"

#include <cmath>
#include <sstream>

using namespace pwsc;
using fixtures::vec;
using Catch::Matchers::WithinAbs;

namespace {

std::shared_ptr<ControlledField> open_loop_field() {
    return std::make_shared<ControlledField>(fixtures::plant(), expr::VectorExpr::zeros(1, fixtures::vars2()));
}

// Worst 1-measure of the first closed loop over x2 in [lo, hi], straight from
// the column sums of [[-4, k], [0, 2 x2 - 6 + 2k]] (the x2-column wins for x2 > -5).
double closed_loop_column_max(double k, double x2_hi) { return 2 * x2_hi - 6 + 2 * k + std::abs(k); }

SimulationOptions span(double t1) {
    SimulationOptions o;
    o.t1 = t1;
    return o;
}

}  // namespace

TEST_CASE("regions", "[certify]") {
    const RegionSpec r = make_region({std::nullopt, -1.0}, {3.0, std::nullopt}, {5, 4}, 10.0);
    CHECK(r.lower == std::vector<double>{-10.0, -1.0});
    CHECK(r.upper == std::vector<double>{3.0, 10.0});
    CHECK(r.truncated == std::vector<bool>{true, true});
    CHECK(r.node_count() == 20);
    CHECK(r.node(0) == vec(-10.0, -1.0));
    CHECK(r.node(19) == vec(3.0, 10.0));
    CHECK(r.node(3) == vec(-10.0, 10.0));  // axis 1 varies fastest
    CHECK(r.refined(2).resolution == std::vector<std::size_t>{9, 7});
    CHECK_THROWS_AS(RegionSpec::box({0.0}, {1.0}, 1), CertifyError);
    CHECK_THROWS_AS(RegionSpec::box({1.0}, {0.0}, 3), CertifyError);
    CHECK_THROWS_AS(RegionSpec::box({0.0, 0.0}, {1.0}, 3), CertifyError);
    CHECK_THROWS_AS(make_region({std::nullopt}, {1.0}, {3}, 0.0), CertifyError);
}

TEST_CASE("open-loop contraction inside and outside the contraction region", "[certify]") {
    const auto f = open_loop_field();
    const auto inside = check_contraction(*f, RegionSpec::box({-5, -5}, {5, 1.9}, 50), MeasureKind::One, 2.0);
    CHECK(inside.pass);
    CHECK_THAT(inside.worst, WithinAbs(std::max(-4.0, 2 * 1.9 - 6), 1e-12));
    CHECK(inside.points == 2500);

    const auto outside = check_contraction(*f, RegionSpec::box({-5, 2.1}, {5, 7}, 50), MeasureKind::One, 2.0);
    CHECK_FALSE(outside.pass);
    CHECK_THAT(outside.worst, WithinAbs(8.0, 1e-12));
    CHECK_THAT(outside.worst_point(1), WithinAbs(7.0, 0.0));
}

TEST_CASE("linear contraction passes on the boundary", "[certify]") {
    const std::vector<std::string> comps{"-3*x1", "-3*x2"};
    const SymbolicField f(expr::VectorExpr::parse(comps, fixtures::vars2()));
    for (auto kind : {MeasureKind::One, MeasureKind::Two, MeasureKind::Inf}) {
        const auto r = check_contraction(f, RegionSpec::box({-4, -4}, {4, 4}, 9), kind, 3.0);
        CHECK(r.pass);
        CHECK_THAT(r.worst, WithinAbs(-3.0, 1e-12));
    }
}

TEST_CASE("predicate restricts the grid", "[certify]") {
    auto region = RegionSpec::box({-2, -2}, {2, 2}, 41);
    region.predicate = [](const Vector& x) { return x.squaredNorm() <= 1.0; };
    const auto r = check_contraction(*open_loop_field(), region, MeasureKind::One, 2.0);
    CHECK(r.pass);
    CHECK(r.points < 41 * 41 / 2);
    region.predicate = [](const Vector&) { return false; };
    CHECK_THROWS_AS(check_contraction(*open_loop_field(), region, MeasureKind::One, 2.0), EmptyRegionError);
}

TEST_CASE("manifold samples", "[certify]") {
    const auto line = ExprSurface::parse("x2 - 2", fixtures::vars2());
    const RegionSpec box = RegionSpec::box({-3, 0}, {3, 7}, 30);
    const auto s = sample_sigma(*line, box);
    CHECK(s.points.size() == 30);
    for (const auto& x : s.points) CHECK(std::abs(x(1) - 2.0) <= 1e-10);

    const auto circle = ExprSurface::parse("x1^2 + x2^2 - 1", fixtures::vars2());
    const RegionSpec sq = RegionSpec::box({-2, -2}, {2, 2}, 41);
    const auto c = sample_sigma(*circle, sq);
    CHECK(c.points.size() > 20);
    for (const auto& x : c.points) CHECK(std::abs(x.norm() - 1.0) <= 1e-8);
    const double radius = 0.5 * sq.min_spacing();
    for (std::size_t i = 0; i < c.points.size(); ++i) {
        for (std::size_t j = i + 1; j < c.points.size(); ++j) {
            CHECK((c.points[i] - c.points[j]).lpNorm<Eigen::Infinity>() >= radius);
        }
    }

    const auto positive = ExprSurface::parse("x1^2 + x2^2 + 1", fixtures::vars2());
    CHECK_THROWS_AS(sample_sigma(*positive, sq), EmptySigmaError);
}

TEST_CASE("manifold samples skip branch ties and degenerate gradients", "[certify]") {
    const std::vector<std::string> v = fixtures::vars2();
    const ExprSurface corner({expr::parse("x2 - 1", v), expr::parse("x1 - 1", v)}, 2);
    const auto s = sample_sigma(corner, RegionSpec::box({0, 0}, {2, 2}, 5));
    CHECK(s.ties_excluded >= 1);
    for (const auto& x : s.points) CHECK_FALSE(corner.is_branch_tie(x, 1e-9));

    const auto cubic = ExprSurface::parse("(x2 - 2)^3", v);
    CHECK_THROWS_AS(sample_sigma(*cubic, RegionSpec::box({0, 0}, {1, 3}, 4)), SurfaceError);
}

TEST_CASE("Filippov certificate for the first closed loop", "[certify]") {
    const FilippovSystem sys = fixtures::closed_loop(fixtures::example1());
    const Certificate cert = check_theorem2(sys, fixtures::region1(), MeasureKind::One, 2.0, 2.0);
    CHECK(cert.pass());
    CHECK(cert.rate() == 2.0);

    const Certificate strict = check_theorem2(sys, fixtures::region1(), MeasureKind::One, 5.0, 2.0);
    CHECK_FALSE(strict.pass());
    CHECK_FALSE(strict.splus.pass);
    CHECK(strict.sminus.pass);
    CHECK_THAT(strict.splus.worst, WithinAbs(closed_loop_column_max(-10.0, 7.0), 1e-12));
    CHECK_FALSE(strict.rate().has_value());
}

TEST_CASE("identical modes give a zero manifold condition", "[certify]") {
    const std::vector<std::string> comps{"-2*x1 + x2", "-3*x2"};
    const auto f = std::make_shared<SymbolicField>(expr::VectorExpr::parse(comps, fixtures::vars2()));
    const FilippovSystem sys{f, f, ExprSurface::parse("x1 + x2", fixtures::vars2())};
    const Certificate cert = check_theorem2(sys, RegionSpec::box({-1, -1}, {1, 1}, 21), MeasureKind::One, 2.0, 2.0);
    CHECK(cert.pass());
    CHECK(cert.worst_sigma_mu == 0.0);
}

TEST_CASE("controlled certificates for both worked examples", "[certify]") {
    const auto sys = fixtures::plant();
    const Certificate c1 = check_theorem3(sys, fixtures::example1(), fixtures::region1(), MeasureKind::One, 2, 2);
    CHECK(c1.pass());
    CHECK(c1.worst_sigma_mu <= 1e-9);
    CHECK(c1.sigma_points > 0);
    CHECK_THAT(c1.splus.worst, WithinAbs(closed_loop_column_max(-10.0, 7.0), 1e-12));

    const Certificate c2 = check_theorem3(sys, fixtures::example2(), fixtures::region2(), MeasureKind::One, 2, 2);
    CHECK(c2.pass());
    CHECK(c2.worst_sigma_mu <= 1e-9);
    // Column 2 of [[-4, -2 x2], [0, 2 x2 - 6 - 4 x2]] is -6 for x2 >= 0; column 1 gives -4.
    CHECK_THAT(c2.splus.worst, WithinAbs(-4.0, 1e-12));

    const Certificate c5 = check_theorem3(sys, fixtures::example1(), fixtures::region1(), MeasureKind::One, 5, 5);
    CHECK_FALSE(c5.pass());
}

TEST_CASE("zero control inside the contraction region", "[certify]") {
    const auto ctl = fixtures::controller("0");
    const RegionSpec region = RegionSpec::box({-5, -5}, {5, 2}, 30);
    const Certificate cert = check_theorem3(fixtures::plant(), ctl, region, MeasureKind::One, 2, 2);
    CHECK(cert.pass());
    CHECK(cert.worst_sigma_mu == 0.0);
    CHECK(cert.worst_sigma_mu_negated == 0.0);
}

TEST_CASE("no manifold in the region is an error", "[certify]") {
    const RegionSpec region = RegionSpec::box({-5, -5}, {5, 1}, 30);
    CHECK_THROWS_AS(check_theorem3(fixtures::plant(), fixtures::example1(), region, MeasureKind::One, 2, 2),
                    EmptySigmaError);
}

TEST_CASE("relabelling the modes leaves the certificate unchanged", "[certify][property]") {
    const auto sys = fixtures::plant();
    for (const auto& ctl : {fixtures::example1(), fixtures::example2()}) {
        const auto region = RegionSpec::box({-10, -10}, {10, 7}, 60);
        const Certificate a = check_theorem3(sys, ctl, region, MeasureKind::One, 2, 2);

        // u+ <-> u- together with H -> -H describes the same closed loop.
        const SwitchedController relabelled{ctl.u_minus, ctl.u_plus, std::make_shared<FlippedSurface>(ctl.surface)};
        const Certificate b = check_theorem3(sys, relabelled, region, MeasureKind::One, 2, 2);
        CHECK(a.pass() == b.pass());
        CHECK(a.splus.worst == b.sminus.worst);
        CHECK(a.sminus.worst == b.splus.worst);
        CHECK(a.worst_sigma_mu == b.worst_sigma_mu);

        // Swapping u+ and u- alone negates the jump matrix.
        const SwitchedController swapped{ctl.u_minus, ctl.u_plus, ctl.surface};
        const Certificate c = check_theorem3(sys, swapped, region, MeasureKind::One, 2, 2);
        CHECK_THAT(c.worst_sigma_mu, WithinAbs(a.worst_sigma_mu_negated, 1e-9));
        CHECK_THAT(c.worst_sigma_mu_negated, WithinAbs(a.worst_sigma_mu, 1e-9));
    }
}

TEST_CASE("passing certificates survive grid refinement", "[certify][property]") {
    const auto sys = fixtures::plant();
    const RegionSpec coarse = fixtures::region1(60);
    const RegionSpec fine = coarse.refined(2);
    const Certificate a = check_theorem3(sys, fixtures::example1(), coarse, MeasureKind::One, 2, 2);
    const Certificate b = check_theorem3(sys, fixtures::example1(), fine, MeasureKind::One, 2, 2);
    REQUIRE(a.pass());
    CHECK(b.pass());
    // The fine grid contains the coarse nodes, and mu of the closed loop
    // changes by at most 2 per unit of x2.
    const double lip = 2.0 * coarse.spacing(1);
    CHECK(b.splus.worst >= a.splus.worst - 1e-9);
    CHECK(b.splus.worst <= a.splus.worst + lip);
    CHECK(b.sminus.worst >= a.sminus.worst - 1e-9);
    CHECK(b.sminus.worst <= a.sminus.worst + lip);
}

TEST_CASE("reported rate does not exceed the sampled margins", "[certify][property]") {
    const auto sys = fixtures::plant();
    for (double c : {0.5, 1.0, 2.0}) {
        const Certificate cert = check_theorem3(sys, fixtures::example1(), fixtures::region1(80), MeasureKind::One, c, c);
        REQUIRE(cert.pass());
        CHECK(*cert.rate() <= -cert.splus.worst + cert.options.ineq_tol);
        CHECK(*cert.rate() <= -cert.sminus.worst + cert.options.ineq_tol);
    }
}

TEST_CASE("certificates are deterministic", "[certify][property]") {
    const auto sys = fixtures::plant();
    const auto a = to_json(check_theorem3(sys, fixtures::example2(), fixtures::region2(), MeasureKind::One, 2, 2));
    const auto b = to_json(check_theorem3(sys, fixtures::example2(), fixtures::region2(), MeasureKind::One, 2, 2));
    CHECK(a.dump() == b.dump());
}

TEST_CASE("certificate document fields", "[certify]") {
    const auto j = to_json(check_theorem3(fixtures::plant(), fixtures::example1(), fixtures::region1(40),
                                          MeasureKind::One, 2, 2));
    for (const char* key : {"measure", "c_bar", "c1", "c2", "worst_margin_splus", "worst_margin_sminus",
                            "worst_sigma_mu", "grid", "verdict"}) {
        CHECK(j.contains(key));
    }
    CHECK(j["verdict"] == "pass");
    CHECK(j["measure"] == "1");
    CHECK(j["grid"]["truncated"][0] == true);
}

TEST_CASE("decay along trajectory pairs", "[certify]") {
    const FilippovSystem sys = fixtures::closed_loop(fixtures::example1());
    const Trajectory x = simulate(sys, vec(1, 4), span(4.0));
    const Trajectory y = simulate(sys, vec(2, 5), span(4.0));
    const DecayReport d = check_decay(x, y, 1.0, 2.0, MeasureKind::One);
    CHECK(d.pass());
    CHECK(d.distances.front() == 2.0);
    CHECK(d.max_ratio <= 1.0 + 1e-3);

    const DecayReport same = check_decay(x, x, 1.0, 2.0, MeasureKind::One);
    CHECK(same.pass());
    for (double r : same.ratios) CHECK(r == 0.0);

    const Trajectory shorter = simulate(sys, vec(2, 5), span(3.0));
    CHECK_THROWS_AS(check_decay(x, shorter, 1.0, 2.0, MeasureKind::One), std::invalid_argument);
}

TEST_CASE("open-loop pair violates the decay bound", "[certify]") {
    // Both solutions escape (near t = 0.18 and 0.23), so compare before that.
    const FilippovSystem open = fixtures::open_loop();
    const Trajectory x = simulate(open, vec(1, 8), span(0.15));
    const Trajectory y = simulate(open, vec(1, 9), span(0.15));
    const DecayReport d = check_decay(x, y, 1.0, 2.0, MeasureKind::One);
    CHECK_FALSE(d.pass());
    CHECK(d.max_ratio > 2.0);
}

TEST_CASE("decay CSV", "[certify]") {
    const FilippovSystem sys = fixtures::closed_loop(fixtures::example1());
    const Trajectory x = simulate(sys, vec(1, 4), span(0.002));
    const Trajectory y = simulate(sys, vec(2, 5), span(0.002));
    std::ostringstream os;
    write_decay_csv(os, check_decay(x, y, 1.0, 2.0, MeasureKind::One));
    CHECK(os.str().rfind("t,distance,bound,ratio\n0,2,2,1\n", 0) == 0);
}

TEST_CASE("control effort", "[certify]") {
    const auto sys = fixtures::plant();
    const FilippovSystem cl1 = fixtures::closed_loop(fixtures::example1());

    const auto zero = fixtures::controller("0");
    const Trajectory t0 = simulate(fixtures::closed_loop(zero), vec(1, 1), span(2.0));
    CHECK(control_effort(t0, sys, zero) == 0.0);

    auto one = fixtures::controller("1");
    one.u_minus = one.u_plus;
    const Trajectory t1 = simulate(fixtures::closed_loop(one), vec(1, 1), span(2.0));
    CHECK_THAT(control_effort(t1, sys, one), WithinAbs(2.0, 1e-9));

    const auto switched = fixtures::example1();
    SwitchedController continuous = switched;
    continuous.u_minus = continuous.u_plus;
    const Trajectory ts = simulate(cl1, vec(1, 4), span(4.0));
    const Trajectory tc = simulate(fixtures::closed_loop(continuous), vec(1, 4), span(4.0));
    CHECK(control_effort(ts, sys, switched) < control_effort(tc, sys, continuous));
}

TEST_CASE("sliding samples use the Filippov-averaged control", "[certify]") {
    // x2' = u with u+ = -1, u- = +1 on H = x2: sliding at x2 = 0 with alpha = 1/2,
    // so the averaged control is 0 once the manifold is reached at t = 0.5.
    const std::vector<std::string> v = fixtures::vars2();
    const auto sys = ControlledSystem::parse(v, {"1", "0"}, {{"0", "1"}});
    const std::vector<std::string> up{"-1"};
    const std::vector<std::string> um{"1"};
    const SwitchedController ctl{expr::VectorExpr::parse(up, v), expr::VectorExpr::parse(um, v),
                                 ExprSurface::parse("x2", v)};
    const FilippovSystem fs(assemble_closed_loop(sys, ctl), ctl.surface);
    const Trajectory tr = simulate(fs, vec(0, 0.5), span(2.0));
    CHECK_THAT(control_effort(tr, sys, ctl), WithinAbs(0.5, 2e-3));
}
