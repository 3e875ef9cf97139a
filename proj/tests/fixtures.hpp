#pragma once

#include "pwsc/certify.hpp"
#include "pwsc/dynamics.hpp"
#include "pwsc/filippov.hpp"
#include "pwsc/surface.hpp"

#include <memory>
#include <string>
#include <vector>

namespace fixtures {

inline const std::vector<std::string>& vars2() {
    static const std::vector<std::string> v{"x1", "x2"};
    return v;
}

// x' = [-4 x1, x2^2 - 6 x2] + [1, 2]^T u
inline pwsc::ControlledSystem plant() {
    return pwsc::ControlledSystem::parse(vars2(), {"-4*x1", "x2^2 - 6*x2"}, {{"1", "2"}});
}

inline pwsc::SwitchedController controller(const std::string& u_plus, const std::string& h = "x2 - 2") {
    const std::vector<std::string> up{u_plus};
    const std::vector<std::string> um{"0"};
    return {pwsc::expr::VectorExpr::parse(up, vars2()), pwsc::expr::VectorExpr::parse(um, vars2()),
            pwsc::ExprSurface::parse(h, vars2())};
}

inline pwsc::SwitchedController example1() { return controller("-10*x2"); }
inline pwsc::SwitchedController example2() { return controller("-x2^2"); }

// {x2 < 7}, x1 truncated
inline pwsc::RegionSpec region1(std::size_t nodes = 200) {
    return pwsc::make_region({std::nullopt, std::nullopt}, {std::nullopt, 7.0}, {nodes, nodes}, 50.0);
}

inline pwsc::RegionSpec region2(std::size_t nodes = 200) {
    return pwsc::RegionSpec::box({-50.0, -50.0}, {50.0, 50.0}, nodes);
}

inline pwsc::FilippovSystem closed_loop(const pwsc::SwitchedController& ctl) {
    return pwsc::FilippovSystem(pwsc::assemble_closed_loop(plant(), ctl), ctl.surface);
}

inline pwsc::FilippovSystem open_loop() {
    const auto zero = pwsc::expr::VectorExpr::zeros(1, vars2());
    return pwsc::FilippovSystem::smooth(std::make_shared<pwsc::ControlledField>(plant(), zero),
                                        pwsc::ExprSurface::parse("x2 - 2", vars2()));
}

inline pwsc::Vector vec(double a, double b) {
    pwsc::Vector v(2);
    v << a, b;
    return v;
}

}  // namespace fixtures
