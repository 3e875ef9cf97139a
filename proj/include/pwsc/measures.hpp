#pragma once

// Matrix measures (logarithmic norms) and the norms that induce them.
//
//   mu_1(A)   = max_j [ a_jj + sum_{i != j} |a_ij| ]     (column sums)
//   mu_inf(A) = max_i [ a_ii + sum_{j != i} |a_ij| ]     (row sums)
//   mu_2(A)   = lambda_max((A + A^T) / 2)
//
// Each measure is the one-sided derivative of its induced matrix norm at the
// identity, mu(A) = lim_{h -> 0+} (||I + hA|| - 1) / h; measure_limit_oracle
// evaluates that quotient directly and is used to cross-check the formulas.

#include "pwsc/types.hpp"

#include <optional>
#include <string>
#include <string_view>

namespace pwsc {

enum class MeasureKind { One, Two, Inf };

[[nodiscard]] std::string to_string(MeasureKind kind);

/// Accepts "1", "2", "inf" (also "one", "two", "infinity").
[[nodiscard]] std::optional<MeasureKind> parse_measure_kind(std::string_view text);

[[nodiscard]] double matrix_measure(MeasureKind kind, const Matrix& a);

[[nodiscard]] double vector_norm(MeasureKind kind, const Vector& v);

/// Induced (operator) norm: max column sum, spectral norm, or max row sum.
[[nodiscard]] double induced_norm(MeasureKind kind, const Matrix& a);

/// (||I + hA|| - 1) / h with the induced norm evaluated exactly; 0 < h <= 1e-4.
[[nodiscard]] double measure_limit_oracle(MeasureKind kind, const Matrix& a, double h);

namespace linalg {

/// Eigenvalues of a symmetric matrix in ascending order. Closed form for
/// n <= 2, cyclic Jacobi sweeps (off-diagonal tolerance 1e-12) otherwise.
[[nodiscard]] Vector symmetric_eigenvalues(const Matrix& s);

struct EigenPair {
    double value = 0.0;
    Vector vector;
};

/// Largest eigenvalue of a symmetric matrix and a unit eigenvector for it.
[[nodiscard]] EigenPair symmetric_max_eigenpair(const Matrix& s);

/// Largest singular value by power iteration on A^T A.
[[nodiscard]] double spectral_norm(const Matrix& a);

}  // namespace linalg

}  // namespace pwsc
