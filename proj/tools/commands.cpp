#include "commands.hpp"

#include "builtin.hpp"

#include "pwsc/filippov.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <fstream>
#include <sstream>
#include <ostream>

namespace pwsc::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::ofstream open_out(const fs::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error(fmt::format("cannot write {}", path.string()));
    return os;
}

void write_json(const fs::path& path, const json& j) {
    auto os = open_out(path);
    os << j.dump(2) << '\n';
}

void write_text(const fs::path& path, const std::string& text) {
    auto os = open_out(path);
    os << text;
}

std::string fmt_vec(const Vector& v) {
    std::vector<double> xs(v.data(), v.data() + v.size());
    return fmt::format("[{}]", fmt::join(xs, ", "));
}

json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

void note_truncation(const ProjectConfig& cfg, const RegionSpec& region, std::ostream& out) {
    std::vector<std::string> axes;
    for (std::size_t i = 0; i < region.dim(); ++i) {
        if (i < region.truncated.size() && region.truncated[i]) {
            axes.push_back(fmt::format("{} in [{}, {}]", cfg.vars[i], region.lower[i], region.upper[i]));
        }
    }
    if (axes.empty()) return;
    out << fmt::format("NOTE: unbounded region sides truncated at +-{}: {}\n", cfg.region->truncation,
                       fmt::join(axes, ", "));
    out << "NOTE: the certificate covers the truncated box only.\n";
}

void print_certificate(const Certificate& cert, std::ostream& out) {
    out << fmt::format("switching function: {}\n", cert.surface);
    out << fmt::format("measure {}  c1 = {}  c2 = {}\n", to_string(cert.measure), cert.c1, cert.c2);
    out << fmt::format("  S+ closure: worst mu = {:.10g} over {} points ({})\n", cert.splus.worst, cert.splus.points,
                       cert.splus.pass ? "pass" : "FAIL");
    if (cert.sminus_checked) {
        out << fmt::format("  S- closure: worst mu = {:.10g} over {} points ({})\n", cert.sminus.worst,
                           cert.sminus.points, cert.sminus.pass ? "pass" : "FAIL");
    }
    out << fmt::format("  manifold:   worst |mu| = {:.3g} over {} samples ({})\n", cert.worst_sigma_mu,
                       cert.sigma_points, cert.sigma_pass ? "pass" : "FAIL");
    for (const auto& w : cert.warnings) out << "  warning: " << w << '\n';
    out << "verdict: " << (cert.pass() ? "pass" : "fail") << '\n';
}

FilippovSystem closed_loop(const ProjectConfig& cfg, SurfacePtr* surface_out = nullptr) {
    const BuiltSurface h = build_surface(cfg);
    const SwitchedController ctl = build_controller(cfg, h.h);
    if (surface_out) *surface_out = h.h;
    return FilippovSystem(assemble_closed_loop(cfg.system, ctl), h.h);
}

SimulationOptions sim_options(const SimulationConfig& sc) {
    SimulationOptions o;
    o.t0 = sc.t0;
    o.t1 = sc.t1;
    o.step = sc.step;
    return o;
}

struct RunOutcome {
    Trajectory traj;
    std::optional<SimulationError> error;
};

RunOutcome run_one(const FilippovSystem& sys, const Vector& x0, const SimulationOptions& o) {
    try {
        return {simulate(sys, x0, o), std::nullopt};
    } catch (const SimulationError& e) {
        return {e.partial(), e};
    }
}

void write_run(const fs::path& dir, const std::string& stem, const RunOutcome& run, const FilippovSystem& sys,
               const std::vector<std::string>& vars) {
    auto traj = open_out(dir / (stem + ".csv"));
    write_trajectory_csv(traj, run.traj, sys, vars);
    auto ev = open_out(dir / ("events_" + stem + ".csv"));
    write_events_csv(ev, run.traj, vars);
}

int certify_impl(const ProjectConfig& cfg, const fs::path& dir, std::ostream& out, Certificate* result) {
    const RegionSpec region = build_region(cfg);
    note_truncation(cfg, region, out);
    const BuiltSurface h = build_surface(cfg);
    const SwitchedController ctl = build_controller(cfg, h.h);
    const Certificate cert = check_theorem3(cfg.system, ctl, region, cfg.measure, cfg.c1.value_or(cfg.c_bar),
                                            cfg.c2.value_or(cfg.c_bar));
    write_json(dir / "certificate.json", to_json(cert));
    print_certificate(cert, out);
    if (result) *result = cert;
    return cert.pass() ? kPass : kCertificateFail;
}

}  // namespace

std::string builtin_config(const std::string& id) {
    if (id == "example1") return std::string(builtin::example1);
    if (id == "example2") return std::string(builtin::example2);
    throw ConfigError(fmt::format("unknown example '{}' (expected example1 or example2)", id));
}

int cmd_measure(const ProjectConfig& cfg, const Vector& point, std::ostream& out) {
    if (static_cast<std::size_t>(point.size()) != cfg.vars.size()) {
        throw ConfigError(fmt::format("--point needs {} coordinates, got {}", cfg.vars.size(), point.size()));
    }
    const ControlledField open_loop(cfg.system, expr::VectorExpr::zeros(cfg.system.m(), cfg.vars));
    const Matrix j = open_loop.jacobian(point);
    out << fmt::format("point: {}\n", fmt_vec(point));
    for (auto kind : {MeasureKind::One, MeasureKind::Two, MeasureKind::Inf}) {
        out << fmt::format("mu_{} = {:.17g}\n", to_string(kind), matrix_measure(kind, j));
    }
    return kPass;
}

int cmd_certify(const ProjectConfig& cfg, const fs::path& dir, std::ostream& out) {
    fs::create_directories(dir);
    return certify_impl(cfg, dir, out, nullptr);
}

int cmd_simulate(const ProjectConfig& cfg, const fs::path& dir, std::ostream& out) {
    if (!cfg.simulation) throw ConfigError(fmt::format("{}: /: missing required key 'simulation'", cfg.source));
    fs::create_directories(dir);
    const auto& sc = *cfg.simulation;
    const FilippovSystem sys = closed_loop(cfg);
    const SimulationOptions o = sim_options(sc);

    const auto fail = [&](const std::string& stem, const SimulationError& e) {
        out << fmt::format("simulation error ({}): {}\n", stem, e.what());
        out << fmt::format("partial trajectory written to {}.csv\n", stem);
        return kSimulationError;
    };

    for (std::size_t i = 0; i < sc.pairs.size(); ++i) {
        const std::string a = fmt::format("trajectory_{}_a", i);
        const std::string b = fmt::format("trajectory_{}_b", i);
        const RunOutcome ra = run_one(sys, sc.pairs[i].first, o);
        write_run(dir, a, ra, sys, cfg.vars);
        if (ra.error) return fail(a, *ra.error);
        const RunOutcome rb = run_one(sys, sc.pairs[i].second, o);
        write_run(dir, b, rb, sys, cfg.vars);
        if (rb.error) return fail(b, *rb.error);
        const DecayReport d =
            check_decay(ra.traj, rb.traj, sc.k, sc.lambda, sc.norm, 1e-3, fmt::format("pair {}", i));
        auto csv = open_out(dir / fmt::format("decay_{}.csv", i));
        write_decay_csv(csv, d);
        write_json(dir / fmt::format("decay_{}.json", i), to_json(d));
        out << fmt::format("pair {}: {} / {}  events {} / {}  max distance/bound = {:.9g} ({})\n", i,
                           fmt_vec(sc.pairs[i].first), fmt_vec(sc.pairs[i].second), ra.traj.events.size(),
                           rb.traj.events.size(), d.max_ratio, d.pass() ? "pass" : "fail");
        if (sc.epsilon) {
            const RegularizationConfig rc{*sc.epsilon, TransitionKind::Cubic};
            for (const auto& [stem, x0] : {std::pair{a, sc.pairs[i].first}, std::pair{b, sc.pairs[i].second}}) {
                auto os = open_out(dir / (stem + "_regularized.csv"));
                write_trajectory_csv(os, simulate_regularized(sys, rc, x0, o), sys, cfg.vars);
            }
        }
    }
    for (std::size_t i = 0; i < sc.initial_conditions.size(); ++i) {
        const std::string stem = fmt::format("trajectory_ic{}", i);
        const RunOutcome r = run_one(sys, sc.initial_conditions[i], o);
        write_run(dir, stem, r, sys, cfg.vars);
        if (r.error) return fail(stem, *r.error);
        out << fmt::format("{}: {} samples, {} events\n", stem, r.traj.size(), r.traj.events.size());
    }
    return kPass;
}

int cmd_synthesize(const ProjectConfig& cfg, const fs::path& dir, std::ostream& out) {
    const DesignSpec spec = build_design(cfg);
    fs::create_directories(dir);
    if (cfg.h_expr) out << "note: the explicit H in the project is ignored; synthesis builds H from the measure\n";
    note_truncation(cfg, spec.region, out);
    try {
        const DesignResult r = gain_search(spec);
        write_json(dir / "design.json", to_json(r));
        if (r.already_contracting) out << "open loop already contracting at the target rate; u+ = 0\n";
        out << fmt::format("H = {}\n", r.h_expression);
        out << fmt::format("gains = [{}] after {} candidates\n", fmt::join(r.gains, ", "), r.candidates_evaluated);
        for (std::size_t i = 0; i < r.u_plus.size(); ++i) {
            out << fmt::format("u+_{} = {}\n", i + 1, r.u_plus[i].to_string());
        }
        print_certificate(r.certificate, out);
        return r.certificate.pass() ? kPass : kCertificateFail;
    } catch (const SearchFailure& e) {
        write_json(dir / "design_failure.json",
                   {{"message", e.what()}, {"best_gains", e.best_gains()}, {"best_margin", e.best_margin()}});
        out << "synthesis failed: " << e.what() << '\n';
        return kSynthesisFailure;
    }
}

int cmd_reproduce(const std::string& id, const Overrides& ov, const fs::path& dir, std::ostream& out) {
    const std::string text = builtin_config(id);
    ProjectConfig cfg = parse_config(text, "builtin:" + id);
    apply(cfg, ov);
    fs::create_directories(dir);
    write_text(dir / "config.json", text);
    out << fmt::format("== {} ==\n", id);

    std::vector<std::string> summary;
    const auto verdict = [&](const std::string& what, bool ok) {
        summary.push_back(fmt::format("{}: {}", what, ok ? "pass" : "fail"));
        return ok;
    };
    bool all = true;

    Certificate cert;
    all &= verdict("certificate", certify_impl(cfg, dir, out, &cert) == kPass);

    // Controller design from the template, with H built from the measure.
    {
        std::ostringstream synth_out;
        ProjectConfig design = cfg;
        design.h_expr.reset();
        const int rc = cmd_synthesize(design, dir, synth_out);
        out << synth_out.str();
        all &= verdict("synthesis", rc == kPass);
    }

    const auto& sc = *cfg.simulation;
    const SimulationOptions o = sim_options(sc);
    SurfacePtr surface;
    const FilippovSystem sys = closed_loop(cfg, &surface);
    const auto& [x0, y0] = sc.pairs.front();
    const RunOutcome rx = run_one(sys, x0, o);
    const RunOutcome ry = run_one(sys, y0, o);
    write_run(dir, "trajectory_x", rx, sys, cfg.vars);
    write_run(dir, "trajectory_y", ry, sys, cfg.vars);
    if (rx.error || ry.error) {
        out << "closed-loop simulation error: " << (rx.error ? rx.error->what() : ry.error->what()) << '\n';
        write_text(dir / "summary.txt", fmt::format("{}\nsimulation: error\n", fmt::join(summary, "\n")));
        return kSimulationError;
    }
    const DecayReport d = check_decay(rx.traj, ry.traj, sc.k, sc.lambda, sc.norm, 1e-3, id);
    {
        auto csv = open_out(dir / "decay.csv");
        write_decay_csv(csv, d);
    }
    write_json(dir / "decay.json", to_json(d));
    out << fmt::format("decay {} vs {}: max distance/bound = {:.9g} at t = {} ({})\n", fmt_vec(x0), fmt_vec(y0),
                       d.max_ratio, d.max_ratio_time, d.pass() ? "pass" : "fail");
    all &= verdict("decay", d.pass());

    if (id == "example1") {
        // Continuous feedback u = -10 x2 on the whole plane, same initial state.
        const SwitchedController switched = build_controller(cfg, surface);
        const SwitchedController continuous{switched.u_plus, switched.u_plus, surface};
        const FilippovSystem smooth = FilippovSystem::smooth(
            std::make_shared<ControlledField>(cfg.system, switched.u_plus), surface);
        const RunOutcome rc = run_one(smooth, x0, o);
        write_run(dir, "trajectory_continuous", rc, smooth, cfg.vars);
        if (rc.error) {
            out << "continuous-control simulation error: " << rc.error->what() << '\n';
            return kSimulationError;
        }
        const double e_switched = control_effort(rx.traj, cfg.system, switched);
        const double e_cont = control_effort(rc.traj, cfg.system, continuous);
        write_json(dir / "effort.json", {{"x0", vec_json(x0)},
                                         {"t_span", {sc.t0, sc.t1}},
                                         {"switched", e_switched},
                                         {"continuous", e_cont},
                                         {"continuous_law", switched.u_plus[0].to_string()},
                                         {"switched_less", e_switched < e_cont}});
        out << fmt::format("control effort on [{}, {}]: switched {:.9g}, continuous {:.9g}\n", sc.t0, sc.t1,
                           e_switched, e_cont);
        all &= verdict("effort", e_switched < e_cont);
    }

    if (id == "example2") {
        const auto zero = expr::VectorExpr::zeros(cfg.system.m(), cfg.vars);
        const FilippovSystem open = FilippovSystem::smooth(std::make_shared<ControlledField>(cfg.system, zero), surface);
        json report = json::array();
        bool escaped_all = true;
        for (const auto& [stem, x] : {std::pair{std::string("open_loop_x"), x0}, std::pair{std::string("open_loop_y"), y0}}) {
            const RunOutcome r = run_one(open, x, o);
            write_run(dir, stem, r, open, cfg.vars);
            const bool escaped = r.error && r.error->kind() == SimulationError::Kind::FiniteEscape;
            escaped_all &= escaped;
            report.push_back({{"x0", vec_json(x)},
                              {"finite_escape", escaped},
                              {"t_last", r.traj.empty() ? 0.0 : r.traj.times.back()},
                              {"message", r.error ? r.error->what() : ""}});
            out << fmt::format("open loop from {}: {}\n", fmt_vec(x),
                               escaped ? fmt::format("finite escape near t = {}", r.traj.times.back())
                                       : std::string("no escape"));
        }
        write_json(dir / "open_loop.json", report);
        all &= verdict("open-loop finite escape", escaped_all);
    }

    write_text(dir / "summary.txt", fmt::format("{}\n", fmt::join(summary, "\n")));
    out << fmt::format("{}: {}\n", id, all ? "all checks pass" : "some checks failed");
    return all ? kPass : kCertificateFail;
}

}  // namespace pwsc::cli
