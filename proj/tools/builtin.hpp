#pragma once

// Project files for the two worked examples, embedded so `reproduce` needs no
// external input. Both share the plant
//   x' = [-4 x1, x2^2 - 6 x2] + [1, 2]^T u,
// whose 1-measure contraction region at rate 2 is {x2 < 2}.

#include <string_view>

namespace pwsc::cli::builtin {

inline constexpr std::string_view example1 = R"({
  "variables": ["x1", "x2"],
  "f": ["-4*x1", "x2^2 - 6*x2"],
  "g": [["1", "2"]],
  "H": "x2 - 2",
  "controller": {"u_plus": ["-10*x2"], "u_minus": ["0"]},
  "measure": "1",
  "c_bar": 2,
  "region": {"lower": [null, null], "upper": [null, 7], "resolution": 200, "truncation": 50},
  "simulation": {"t_span": [0, 4], "step": 0.001, "pairs": [[[1, 4], [2, 5]]], "K": 1, "lambda": 2, "norm": "1"},
  "synthesis": {"template": [["x2"]], "gain_lower": -20, "gain_upper": 0, "gain_step": 0.5}
}
)";

inline constexpr std::string_view example2 = R"({
  "variables": ["x1", "x2"],
  "f": ["-4*x1", "x2^2 - 6*x2"],
  "g": [["1", "2"]],
  "H": "x2 - 2",
  "controller": {"u_plus": ["-x2^2"], "u_minus": ["0"]},
  "measure": "1",
  "c_bar": 2,
  "region": {"lower": [null, null], "upper": [null, null], "resolution": 200, "truncation": 50},
  "simulation": {"t_span": [0, 4], "step": 0.001, "pairs": [[[1, 8], [1, 9]]], "K": 1, "lambda": 2, "norm": "1"},
  "synthesis": {"template": [["x2^2"]], "gain_lower": -5, "gain_upper": 0, "gain_step": 0.5}
}
)";

}  // namespace pwsc::cli::builtin
