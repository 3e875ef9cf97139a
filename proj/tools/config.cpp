#include "config.hpp"

#include <json.hpp>

#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <sstream>

namespace pwsc::cli {

using nlohmann::json;

namespace {

struct Reader {
    std::string source;

    [[noreturn]] void fail(const std::string& path, const std::string& msg) const {
        throw ConfigError(fmt::format("{}: {}: {}", source, path.empty() ? "/" : path, msg));
    }

    const json& need(const json& obj, const std::string& path, const char* key) const {
        if (!obj.is_object() || !obj.contains(key)) fail(path, fmt::format("missing required key '{}'", key));
        return obj.at(key);
    }

    double number(const json& v, const std::string& path) const {
        if (!v.is_number()) fail(path, "expected a number");
        const double d = v.get<double>();
        if (!std::isfinite(d)) fail(path, "expected a finite number");
        return d;
    }

    double positive(const json& v, const std::string& path) const {
        const double d = number(v, path);
        if (!(d > 0.0)) fail(path, "expected a positive number");
        return d;
    }

    std::string string(const json& v, const std::string& path) const {
        if (!v.is_string()) fail(path, "expected a string");
        return v.get<std::string>();
    }

    const json& array(const json& v, const std::string& path) const {
        if (!v.is_array()) fail(path, "expected an array");
        return v;
    }

    std::vector<std::string> strings(const json& v, const std::string& path) const {
        std::vector<std::string> out;
        const auto& arr = array(v, path);
        for (std::size_t i = 0; i < arr.size(); ++i) out.push_back(string(arr[i], fmt::format("{}/{}", path, i)));
        return out;
    }

    std::vector<std::string> expressions(const json& v, const std::string& path,
                                         const std::vector<std::string>& vars) const {
        auto out = strings(v, path);
        for (std::size_t i = 0; i < out.size(); ++i) check_expr(out[i], fmt::format("{}/{}", path, i), vars);
        return out;
    }

    void check_expr(const std::string& text, const std::string& path, const std::vector<std::string>& vars) const {
        try {
            (void)expr::parse(text, vars);
        } catch (const expr::ParseError& e) {
            fail(path, fmt::format("{} (column {} of \"{}\")", e.what(), e.position() + 1, text));
        }
    }

    Vector point(const json& v, const std::string& path, std::size_t n) const {
        const auto& arr = array(v, path);
        if (arr.size() != n) fail(path, fmt::format("expected {} coordinates, got {}", n, arr.size()));
        Vector x(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) x(static_cast<Eigen::Index>(i)) = number(arr[i], fmt::format("{}/{}", path, i));
        return x;
    }

    // A number applies to every entry; an array must have `n` entries.
    std::vector<double> numbers_or_scalar(const json& v, const std::string& path) const {
        if (v.is_number()) return {number(v, path)};
        std::vector<double> out;
        const auto& arr = array(v, path);
        for (std::size_t i = 0; i < arr.size(); ++i) out.push_back(number(arr[i], fmt::format("{}/{}", path, i)));
        return out;
    }

    MeasureKind measure(const json& v, const std::string& path) const {
        const std::string text = v.is_number() ? fmt::format("{}", v.get<double>()) : string(v, path);
        const auto kind = parse_measure_kind(text);
        if (!kind) fail(path, fmt::format("unknown measure '{}' (expected 1, 2 or inf)", text));
        return *kind;
    }
};

std::string location(const std::string& text, std::size_t byte) {
    std::size_t line = 1;
    std::size_t col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return fmt::format("line {}, column {}", line, col);
}

RegionConfig read_region(const Reader& r, const json& j, std::size_t n) {
    RegionConfig rc;
    const auto bounds = [&](const char* key) {
        std::vector<std::optional<double>> out;
        const std::string path = fmt::format("/region/{}", key);
        const auto& arr = r.array(r.need(j, "/region", key), path);
        if (arr.size() != n) r.fail(path, fmt::format("expected {} bounds, got {}", n, arr.size()));
        for (std::size_t i = 0; i < n; ++i) {
            if (arr[i].is_null()) {
                out.emplace_back(std::nullopt);
            } else {
                out.emplace_back(r.number(arr[i], fmt::format("{}/{}", path, i)));
            }
        }
        return out;
    };
    rc.lower = bounds("lower");
    rc.upper = bounds("upper");
    for (std::size_t i = 0; i < n; ++i) {
        if (rc.lower[i] && rc.upper[i] && *rc.upper[i] < *rc.lower[i]) {
            r.fail(fmt::format("/region/upper/{}", i), "upper bound is below the lower bound");
        }
    }
    rc.resolution.assign(n, 200);
    if (j.contains("resolution")) {
        const auto res = r.numbers_or_scalar(j.at("resolution"), "/region/resolution");
        if (res.size() != 1 && res.size() != n) r.fail("/region/resolution", fmt::format("expected 1 or {} entries", n));
        for (std::size_t i = 0; i < n; ++i) {
            const double v = res[res.size() == 1 ? 0 : i];
            if (v < 2 || v != std::floor(v)) r.fail("/region/resolution", "resolution must be an integer >= 2");
            rc.resolution[i] = static_cast<std::size_t>(v);
        }
    }
    if (j.contains("truncation")) rc.truncation = r.positive(j.at("truncation"), "/region/truncation");
    if (j.contains("predicate") && !j.at("predicate").is_null()) {
        rc.predicate = r.string(j.at("predicate"), "/region/predicate");
    }
    return rc;
}

SimulationConfig read_simulation(const Reader& r, const json& j, std::size_t n) {
    SimulationConfig sc;
    const auto& span = r.array(r.need(j, "/simulation", "t_span"), "/simulation/t_span");
    if (span.size() != 2) r.fail("/simulation/t_span", "expected [t0, t1]");
    sc.t0 = r.number(span[0], "/simulation/t_span/0");
    sc.t1 = r.number(span[1], "/simulation/t_span/1");
    if (!(sc.t1 > sc.t0)) r.fail("/simulation/t_span", "empty time span (t1 must exceed t0)");
    if (j.contains("step")) sc.step = r.positive(j.at("step"), "/simulation/step");
    if (j.contains("pairs")) {
        const auto& pairs = r.array(j.at("pairs"), "/simulation/pairs");
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            const std::string path = fmt::format("/simulation/pairs/{}", i);
            const auto& p = r.array(pairs[i], path);
            if (p.size() != 2) r.fail(path, "expected two initial conditions");
            sc.pairs.emplace_back(r.point(p[0], path + "/0", n), r.point(p[1], path + "/1", n));
        }
    }
    if (j.contains("initial_conditions")) {
        const auto& ics = r.array(j.at("initial_conditions"), "/simulation/initial_conditions");
        for (std::size_t i = 0; i < ics.size(); ++i) {
            sc.initial_conditions.push_back(r.point(ics[i], fmt::format("/simulation/initial_conditions/{}", i), n));
        }
    }
    if (sc.pairs.empty() && sc.initial_conditions.empty()) {
        r.fail("/simulation", "needs 'pairs' or 'initial_conditions'");
    }
    if (j.contains("K")) sc.k = r.positive(j.at("K"), "/simulation/K");
    if (j.contains("lambda")) sc.lambda = r.number(j.at("lambda"), "/simulation/lambda");
    if (j.contains("norm")) sc.norm = r.measure(j.at("norm"), "/simulation/norm");
    if (j.contains("epsilon")) sc.epsilon = r.positive(j.at("epsilon"), "/simulation/epsilon");
    return sc;
}

SynthesisConfig read_synthesis(const Reader& r, const json& j, const std::vector<std::string>& vars, std::size_t m) {
    SynthesisConfig sc;
    const auto& tmpl = r.array(r.need(j, "/synthesis", "template"), "/synthesis/template");
    if (tmpl.size() != m) r.fail("/synthesis/template", fmt::format("expected one basis list per input ({})", m));
    for (std::size_t i = 0; i < tmpl.size(); ++i) {
        sc.basis.push_back(r.expressions(tmpl[i], fmt::format("/synthesis/template/{}", i), vars));
    }
    if (j.contains("gain_lower")) sc.gain_lower = r.numbers_or_scalar(j.at("gain_lower"), "/synthesis/gain_lower");
    if (j.contains("gain_upper")) sc.gain_upper = r.numbers_or_scalar(j.at("gain_upper"), "/synthesis/gain_upper");
    if (j.contains("gain_step")) sc.gain_step = r.positive(j.at("gain_step"), "/synthesis/gain_step");
    return sc;
}

}  // namespace

ProjectConfig parse_config(const std::string& text, const std::string& source) {
    const Reader r{source};
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(fmt::format("{}: {}: invalid JSON ({})", source, location(text, e.byte == 0 ? 0 : e.byte - 1),
                                      e.what()));
    }
    if (!root.is_object()) r.fail("", "expected a JSON object");

    ProjectConfig cfg;
    cfg.source = source;
    cfg.vars = r.strings(r.need(root, "", "variables"), "/variables");
    if (cfg.vars.empty()) r.fail("/variables", "at least one state variable is required");
    const std::size_t n = cfg.vars.size();

    const auto f = r.expressions(r.need(root, "", "f"), "/f", cfg.vars);
    if (f.size() != n) r.fail("/f", fmt::format("expected {} components, got {}", n, f.size()));
    std::vector<std::vector<std::string>> g;
    if (root.contains("g")) {
        const auto& cols = r.array(root.at("g"), "/g");
        for (std::size_t c = 0; c < cols.size(); ++c) {
            const std::string path = fmt::format("/g/{}", c);
            g.push_back(r.expressions(cols[c], path, cfg.vars));
            if (g.back().size() != n) r.fail(path, fmt::format("expected {} components, got {}", n, g.back().size()));
        }
    }
    try {
        cfg.system = ControlledSystem::parse(cfg.vars, f, g);
    } catch (const std::exception& e) {
        r.fail("/variables", e.what());
    }
    const std::size_t m = g.size();

    if (root.contains("H")) {
        const auto& h = root.at("H");
        if (h.is_string()) {
            cfg.h_expr = r.string(h, "/H");
            r.check_expr(*cfg.h_expr, "/H", cfg.vars);
        } else if (h.is_object()) {
            const bool has_expr = h.contains("expr");
            const bool synth = h.contains("synthesized") && h.at("synthesized").is_boolean() && h.at("synthesized").get<bool>();
            if (has_expr == synth) r.fail("/H", "select exactly one of 'expr' or 'synthesized': true");
            if (has_expr) {
                cfg.h_expr = r.string(h.at("expr"), "/H/expr");
                r.check_expr(*cfg.h_expr, "/H/expr", cfg.vars);
            }
        } else {
            r.fail("/H", "expected an expression string or an object");
        }
    }

    if (root.contains("controller")) {
        const auto& c = root.at("controller");
        cfg.u_plus = r.expressions(r.need(c, "/controller", "u_plus"), "/controller/u_plus", cfg.vars);
        if (cfg.u_plus->size() != m) r.fail("/controller/u_plus", fmt::format("expected {} inputs", m));
        if (c.contains("u_minus")) {
            cfg.u_minus = r.expressions(c.at("u_minus"), "/controller/u_minus", cfg.vars);
            if (cfg.u_minus->size() != m) r.fail("/controller/u_minus", fmt::format("expected {} inputs", m));
        }
    }

    if (root.contains("measure")) cfg.measure = r.measure(root.at("measure"), "/measure");
    if (root.contains("c_bar")) cfg.c_bar = r.positive(root.at("c_bar"), "/c_bar");
    if (root.contains("c1")) cfg.c1 = r.positive(root.at("c1"), "/c1");
    if (root.contains("c2")) cfg.c2 = r.positive(root.at("c2"), "/c2");
    if (root.contains("region")) {
        cfg.region = read_region(r, root.at("region"), n);
        if (!cfg.region->predicate.empty()) {
            try {
                (void)compile_predicate(cfg.region->predicate, cfg.vars);
            } catch (const std::exception& e) {
                r.fail("/region/predicate", e.what());
            }
        }
    }
    if (root.contains("simulation")) cfg.simulation = read_simulation(r, root.at("simulation"), n);
    if (root.contains("synthesis")) cfg.synthesis = read_synthesis(r, root.at("synthesis"), cfg.vars, m);
    return cfg;
}

ProjectConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(fmt::format("{}: cannot open file", path));
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path);
}

void apply(ProjectConfig& cfg, const Overrides& ov) {
    if (ov.measure) cfg.measure = *ov.measure;
    if (ov.c_bar) {
        if (!(*ov.c_bar > 0.0)) throw ConfigError("--cbar must be positive");
        cfg.c_bar = *ov.c_bar;
        cfg.c1.reset();
        cfg.c2.reset();
    }
    if (cfg.region) {
        if (ov.grid) {
            if (*ov.grid < 2) throw ConfigError("--grid must be at least 2");
            cfg.region->resolution.assign(cfg.vars.size(), *ov.grid);
        }
        if (ov.truncate) {
            if (!(*ov.truncate > 0.0)) throw ConfigError("--truncate must be positive");
            cfg.region->truncation = *ov.truncate;
        }
    }
    if (ov.step) {
        if (!(*ov.step > 0.0)) throw ConfigError("--step must be positive");
        if (cfg.simulation) cfg.simulation->step = *ov.step;
        if (cfg.synthesis) cfg.synthesis->gain_step = *ov.step;
    }
}

std::function<bool(const Vector&)> compile_predicate(const std::string& text, const std::vector<std::string>& vars) {
    static const std::vector<std::string> ops{"<=", ">=", "<", ">"};
    for (const auto& op : ops) {
        const auto pos = text.find(op);
        if (pos == std::string::npos) continue;
        const expr::Expr lhs = expr::parse(text.substr(0, pos), vars);
        const expr::Expr rhs = expr::parse(text.substr(pos + op.size()), vars);
        if (op == "<=") return [lhs, rhs](const Vector& x) { return lhs.eval(x) <= rhs.eval(x); };
        if (op == ">=") return [lhs, rhs](const Vector& x) { return lhs.eval(x) >= rhs.eval(x); };
        if (op == "<") return [lhs, rhs](const Vector& x) { return lhs.eval(x) < rhs.eval(x); };
        return [lhs, rhs](const Vector& x) { return lhs.eval(x) > rhs.eval(x); };
    }
    throw ConfigError(fmt::format("predicate \"{}\" needs one of <, <=, >, >=", text));
}

RegionSpec build_region(const ProjectConfig& cfg) {
    if (!cfg.region) throw ConfigError(fmt::format("{}: /: missing required key 'region'", cfg.source));
    const auto& rc = *cfg.region;
    RegionSpec region;
    try {
        region = make_region(rc.lower, rc.upper, rc.resolution, rc.truncation);
    } catch (const CertifyError& e) {
        throw ConfigError(fmt::format("{}: /region: {}", cfg.source, e.what()));
    }
    if (!rc.predicate.empty()) {
        region.predicate = compile_predicate(rc.predicate, cfg.vars);
        region.predicate_text = rc.predicate;
    }
    return region;
}

BuiltSurface build_surface(const ProjectConfig& cfg) {
    if (cfg.h_expr) {
        auto h = ExprSurface::parse(*cfg.h_expr, cfg.vars);
        return {h, h->describe()};
    }
    return build_H(cfg.system, cfg.measure, cfg.c_bar);
}

SwitchedController build_controller(const ProjectConfig& cfg, SurfacePtr surface) {
    const auto zeros = expr::VectorExpr::zeros(cfg.system.m(), cfg.vars);
    SwitchedController ctl{zeros, zeros, std::move(surface)};
    if (cfg.u_plus) ctl.u_plus = expr::VectorExpr::parse(*cfg.u_plus, cfg.vars);
    if (cfg.u_minus) ctl.u_minus = expr::VectorExpr::parse(*cfg.u_minus, cfg.vars);
    return ctl;
}

DesignSpec build_design(const ProjectConfig& cfg) {
    if (!cfg.synthesis) throw ConfigError(fmt::format("{}: /: missing required key 'synthesis'", cfg.source));
    DesignSpec spec;
    spec.system = cfg.system;
    spec.c_bar = cfg.c_bar;
    spec.kind = cfg.measure;
    spec.region = build_region(cfg);
    for (const auto& ch : cfg.synthesis->basis) {
        std::vector<expr::Expr> b;
        for (const auto& t : ch) b.push_back(expr::parse(t, cfg.vars));
        spec.basis.push_back(std::move(b));
    }
    if (!cfg.synthesis->gain_lower.empty()) spec.gain_lower = cfg.synthesis->gain_lower;
    if (!cfg.synthesis->gain_upper.empty()) spec.gain_upper = cfg.synthesis->gain_upper;
    spec.gain_step = cfg.synthesis->gain_step;
    try {
        spec.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(fmt::format("{}: /synthesis: {}", cfg.source, e.what()));
    }
    return spec;
}

}  // namespace pwsc::cli
