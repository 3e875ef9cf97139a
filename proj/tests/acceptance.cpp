// End-to-end acceptance checks. One PASS/FAIL line per criterion; the exit
// status is the number of failures.

#include "fixtures.hpp"
#include "pwsc/certify.hpp"
#include "pwsc/filippov.hpp"
#include "pwsc/measures.hpp"
#include "pwsc/synth.hpp"

#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <random>
#include <string>
#include <vector>

using namespace pwsc;
using fixtures::vec;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

struct Criterion {
    int id;
    std::string name;
    std::function<Outcome()> run;
};

SimulationOptions span(double t1) {
    SimulationOptions o;
    o.t1 = t1;
    o.step = 1e-3;
    return o;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

template <class F>
auto timed(F&& f, double& secs) {
    const auto t0 = std::chrono::steady_clock::now();
    auto r = f();
    secs = seconds_since(t0);
    return r;
}

DesignSpec design(const std::string& basis, double lo, RegionSpec region) {
    DesignSpec spec{fixtures::plant(), 2.0, MeasureKind::One, std::move(region), {}, {lo}, {0.0}, 0.5, {}};
    spec.basis = {{expr::parse(basis, fixtures::vars2())}};
    return spec;
}

Outcome measure_oracle() {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> entry(-10.0, 10.0);
    double worst = 0.0;
    double secs = 0.0;
    timed(
        [&] {
            for (auto kind : {MeasureKind::One, MeasureKind::Two, MeasureKind::Inf}) {
                for (int trial = 0; trial < 500; ++trial) {
                    const Eigen::Index n = 2 + trial % 3;
                    Matrix a(n, n);
                    for (Eigen::Index i = 0; i < n; ++i) {
                        for (Eigen::Index j = 0; j < n; ++j) a(i, j) = entry(rng);
                    }
                    worst = std::max(worst, std::abs(matrix_measure(kind, a) - measure_limit_oracle(kind, a, 1e-7)));
                }
            }
            return 0;
        },
        secs);
    return {worst <= 1e-4 && secs < 5.0, fmt::format("max |formula - oracle| = {:.3g} over 1500 matrices, {:.2f} s", worst, secs)};
}

Outcome open_loop_region() {
    const auto f = std::make_shared<ControlledField>(fixtures::plant(), expr::VectorExpr::zeros(1, fixtures::vars2()));
    const auto in = check_contraction(*f, RegionSpec::box({-10, -10}, {10, 1.99}, 200), MeasureKind::One, 2.0);
    const auto out = check_contraction(*f, RegionSpec::box({-10, 2.01}, {10, 7}, 200), MeasureKind::One, 2.0);

    // Scan x2 in [-10, 7] for the first node whose measure exceeds -2.
    constexpr int kNodes = 1701;
    const double h = 17.0 / (kNodes - 1);
    double threshold = NAN;
    for (int i = 0; i < kNodes; ++i) {
        const Vector x = vec(0.0, -10.0 + i * h);
        if (matrix_measure(MeasureKind::One, f->jacobian(x)) > -2.0) {
            threshold = x(1);
            break;
        }
    }
    const bool ok = in.worst <= -2.0 && out.worst > -2.0 && std::abs(threshold - 2.0) <= h;
    return {ok, fmt::format("worst mu1 on x2<=1.99: {:.6g}; on x2>=2.01: {:.6g}; threshold x2 = {:.6g} (spacing {:.3g})",
                            in.worst, out.worst, threshold, h)};
}

struct CertRun {
    Certificate coarse;
    Certificate fine;
    double secs;
};

CertRun certify_example(const SwitchedController& ctl, const RegionSpec& region) {
    double secs = 0.0;
    Certificate c = timed([&] { return check_theorem3(fixtures::plant(), ctl, region, MeasureKind::One, 2, 2); }, secs);
    Certificate f = check_theorem3(fixtures::plant(), ctl, region.refined(2), MeasureKind::One, 2, 2);
    return {std::move(c), std::move(f), secs};
}

Outcome certificate(const CertRun& r, double budget) {
    const bool ok = r.coarse.pass() && r.coarse.worst_sigma_mu <= 1e-9 && r.fine.pass() && r.secs < budget;
    return {ok, fmt::format("S+ worst {:.6g}, S- worst {:.6g}, manifold worst |mu| {:.3g} ({} samples); "
                            "2x grid {}; {:.2f} s",
                            r.coarse.splus.worst, r.coarse.sminus.worst, r.coarse.worst_sigma_mu,
                            r.coarse.sigma_points, r.fine.pass() ? "pass" : "fail", r.secs)};
}

Outcome decay_pair(const SwitchedController& ctl, const Vector& x0, const Vector& y0) {
    const FilippovSystem sys = fixtures::closed_loop(ctl);
    const DecayReport d =
        check_decay(simulate(sys, x0, span(4.0)), simulate(sys, y0, span(4.0)), 1.0, 2.0, MeasureKind::One);
    return {d.max_ratio <= 1.0 + 1e-3,
            fmt::format("max |x-y|_1 / (e^-2t |x0-y0|_1) = {:.9g} at t = {:.4g}", d.max_ratio, d.max_ratio_time)};
}

std::string escape_time(const Vector& x0) {
    try {
        (void)simulate(fixtures::open_loop(), x0, span(4.0));
    } catch (const SimulationError& e) {
        if (e.kind() == SimulationError::Kind::FiniteEscape) {
            return fmt::format("{:.4g}", e.partial().times.back());
        }
        return {};
    }
    return {};
}

Outcome example2_decay() {
    Outcome o = decay_pair(fixtures::example2(), vec(1, 8), vec(1, 9));
    const std::string ex = escape_time(vec(1, 8));
    const std::string ey = escape_time(vec(1, 9));
    o.pass = o.pass && !ex.empty() && !ey.empty();
    o.detail += fmt::format("; open loop escapes at t = {} / {}", ex.empty() ? "never" : ex, ey.empty() ? "never" : ey);
    return o;
}

Outcome gain_search_both() {
    double s1 = 0.0;
    double s2 = 0.0;
    const DesignResult r1 = timed([] { return gain_search(design("x2", -20.0, fixtures::region1())); }, s1);
    const DesignResult r2 = timed([] { return gain_search(design("x2^2", -5.0, fixtures::region2())); }, s2);
    const bool ok = r1.gains == std::vector<double>{-10.0} && r2.gains == std::vector<double>{-1.0} &&
                    r1.certificate.pass() && r2.certificate.pass() && s1 < 30.0 && s2 < 30.0;
    return {ok, fmt::format("linear k* = {} ({} candidates, {:.2f} s); quadratic k* = {} ({} candidates, {:.2f} s)",
                            r1.gains.empty() ? NAN : r1.gains[0], r1.candidates_evaluated, s1,
                            r2.gains.empty() ? NAN : r2.gains[0], r2.candidates_evaluated, s2)};
}

Outcome control_effort_comparison() {
    const auto sys = fixtures::plant();
    const SwitchedController switched = fixtures::example1();
    SwitchedController continuous = switched;
    continuous.u_minus = continuous.u_plus;
    const double es = control_effort(simulate(fixtures::closed_loop(switched), vec(1, 4), span(4.0)), sys, switched);
    const double ec =
        control_effort(simulate(fixtures::closed_loop(continuous), vec(1, 4), span(4.0)), sys, continuous);
    return {es < ec, fmt::format("switched {:.6g} vs continuous {:.6g}", es, ec)};
}

Outcome regularization() {
    const FilippovSystem sys = fixtures::closed_loop(fixtures::example1());
    const SimulationOptions o = span(3.0);
    const Trajectory ref = simulate(sys, vec(1, 4), o);
    std::vector<double> gaps;
    for (double eps : {1e-1, 1e-2, 1e-3}) {
        const Trajectory r = simulate_regularized(sys, {eps, TransitionKind::Cubic}, vec(1, 4), o);
        double g = 0.0;
        for (std::size_t i = 0; i < ref.size(); ++i) {
            g = std::max(g, (ref.states[i] - r.states[i]).lpNorm<Eigen::Infinity>());
        }
        gaps.push_back(g);
    }
    const bool ok = gaps[2] <= 5e-2 && gaps[1] < gaps[0] && gaps[2] < gaps[1];
    return {ok, fmt::format("sup gaps at eps = 1e-1, 1e-2, 1e-3: {:.4g}, {:.4g}, {:.4g}", gaps[0], gaps[1], gaps[2])};
}

Outcome certificate_implies_decay(const CertRun& c1, const CertRun& c2) {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> wide(-10.0, 10.0);
    std::uniform_real_distribution<double> below7(-10.0, 6.999);
    int checked = 0;
    int failed = 0;
    double worst = 0.0;
    const auto run = [&](const SwitchedController& ctl, bool cert_pass, auto draw_x2) {
        const FilippovSystem sys = fixtures::closed_loop(ctl);
        for (int i = 0; i < 20; ++i) {
            const Vector x0 = vec(wide(rng), draw_x2());
            const Vector y0 = vec(wide(rng), draw_x2());
            if (!cert_pass) continue;
            const DecayReport d =
                check_decay(simulate(sys, x0, span(4.0)), simulate(sys, y0, span(4.0)), 1.0, 2.0, MeasureKind::One);
            ++checked;
            worst = std::max(worst, d.max_ratio);
            if (!d.pass()) ++failed;
        }
    };
    run(fixtures::example1(), c1.coarse.pass(), [&] { return below7(rng); });
    run(fixtures::example2(), c2.coarse.pass(), [&] { return wide(rng); });
    return {checked == 40 && failed == 0,
            fmt::format("{} pairs checked, {} decay failures, worst ratio {:.6g}", checked, failed, worst)};
}

}  // namespace

int main() {
    std::optional<CertRun> c1;
    std::optional<CertRun> c2;
    const auto cert1 = [&]() -> const CertRun& {
        if (!c1) c1 = certify_example(fixtures::example1(), fixtures::region1());
        return *c1;
    };
    const auto cert2 = [&]() -> const CertRun& {
        if (!c2) c2 = certify_example(fixtures::example2(), fixtures::region2());
        return *c2;
    };

    const std::vector<Criterion> criteria{
        {1, "measure formulas agree with the limit definition", measure_oracle},
        {2, "open-loop contraction region is x2 < 2", open_loop_region},
        {3, "first controller certificate", [&] { return certificate(cert1(), 10.0); }},
        {4, "first controller decay from (1,4), (2,5)",
         [] { return decay_pair(fixtures::example1(), vec(1, 4), vec(2, 5)); }},
        {5, "second controller certificate", [&] { return certificate(cert2(), 10.0); }},
        {6, "second controller decay from (1,8), (1,9); open loop escapes", example2_decay},
        {7, "gain search recovers both controllers", gain_search_both},
        {8, "switched control uses less effort than continuous", control_effort_comparison},
        {9, "regularized trajectories converge to the Filippov solution", regularization},
        {10, "certificate pass implies decay pass on random pairs",
         [&] { return certificate_implies_decay(cert1(), cert2()); }},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        Outcome o;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, fmt::format("exception: {}", e.what())};
        }
        const double secs = seconds_since(t0);
        std::cout << fmt::format("{} [{:2}] {}: {} ({:.2f} s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail,
                                 secs);
        if (!o.pass) ++failures;
    }
    std::cout << fmt::format("{}/{} criteria passed\n", criteria.size() - failures, criteria.size());
    return failures;
}
