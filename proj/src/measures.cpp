#include "pwsc/measures.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

namespace pwsc {

namespace {

void require_square(const Matrix& a) {
    if (a.rows() != a.cols()) {
        throw DimensionError(fmt::format("matrix measure needs a square matrix, got {}x{}", a.rows(), a.cols()));
    }
    if (a.rows() == 0) throw DimensionError("matrix measure of an empty matrix");
}

double column_measure(const Matrix& a) {
    double best = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
        double s = a(j, j);
        for (Eigen::Index i = 0; i < a.rows(); ++i) {
            if (i != j) s += std::abs(a(i, j));
        }
        best = std::max(best, s);
    }
    return best;
}

double row_measure(const Matrix& a) {
    double best = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        double s = a(i, i);
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            if (j != i) s += std::abs(a(i, j));
        }
        best = std::max(best, s);
    }
    return best;
}

}  // namespace

std::string to_string(MeasureKind kind) {
    switch (kind) {
    case MeasureKind::One: return "1";
    case MeasureKind::Two: return "2";
    case MeasureKind::Inf: return "inf";
    }
    return "?";
}

std::optional<MeasureKind> parse_measure_kind(std::string_view text) {
    std::string t(text);
    std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (t == "1" || t == "one") return MeasureKind::One;
    if (t == "2" || t == "two") return MeasureKind::Two;
    if (t == "inf" || t == "infinity") return MeasureKind::Inf;
    return std::nullopt;
}

double matrix_measure(MeasureKind kind, const Matrix& a) {
    require_square(a);
    switch (kind) {
    case MeasureKind::One: return column_measure(a);
    case MeasureKind::Inf: return row_measure(a);
    case MeasureKind::Two: {
        const Matrix sym = 0.5 * (a + a.transpose());
        return linalg::symmetric_eigenvalues(sym).maxCoeff();
    }
    }
    return 0.0;
}

double vector_norm(MeasureKind kind, const Vector& v) {
    switch (kind) {
    case MeasureKind::One: return v.lpNorm<1>();
    case MeasureKind::Two: return v.norm();
    case MeasureKind::Inf: return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>();
    }
    return 0.0;
}

double induced_norm(MeasureKind kind, const Matrix& a) {
    switch (kind) {
    case MeasureKind::One: return a.cwiseAbs().colwise().sum().maxCoeff();
    case MeasureKind::Inf: return a.cwiseAbs().rowwise().sum().maxCoeff();
    case MeasureKind::Two: return linalg::spectral_norm(a);
    }
    return 0.0;
}

namespace linalg {

namespace {

// Dominant eigenvalue of a symmetric positive semidefinite matrix. Plain power
// iteration stalls when the top eigenvalues are nearly equal, so the iteration
// squares the matrix first (each squaring doubles the effective power count)
// and then polishes the extracted direction with a few ordinary steps.
double dominant_psd_eigenvalue(const Matrix& psd) {
    const double scale = psd.norm();
    if (scale == 0.0) return 0.0;

    Matrix m = psd / scale;
    for (int it = 0; it < 200; ++it) {
        Matrix next = m * m;
        next = 0.5 * (next + next.transpose());
        const double nrm = next.norm();
        if (nrm == 0.0) break;
        next /= nrm;
        const double change = (next - m).norm();
        m = std::move(next);
        if (change < 1e-13) break;
    }

    Eigen::Index col = 0;
    m.colwise().norm().maxCoeff(&col);
    Vector v = m.col(col);
    if (v.norm() == 0.0) v = Vector::Ones(psd.rows());
    v.normalize();

    double lambda = v.dot(psd * v);
    for (int it = 0; it < 200; ++it) {
        Vector w = psd * v;
        const double nrm = w.norm();
        if (nrm == 0.0) return 0.0;
        w /= nrm;
        const double next = w.dot(psd * w);
        v = std::move(w);
        const bool settled = std::abs(next - lambda) <= 1e-13 * std::abs(next);
        lambda = next;
        if (settled) break;
    }
    return lambda;
}

}  // namespace

namespace {

// Cyclic Jacobi: rotates away off-diagonal entries until their Frobenius norm
// is below 1e-12 relative to the whole matrix. Returns the (unsorted)
// diagonal; rotations are accumulated into `vectors` when given.
Vector jacobi_diagonalise(const Matrix& s, Matrix* vectors) {
    const Eigen::Index n = s.rows();
    Matrix a = 0.5 * (s + s.transpose());
    if (vectors != nullptr) *vectors = Matrix::Identity(n, n);
    const double frob = a.norm();
    if (frob == 0.0) return a.diagonal();

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (Eigen::Index p = 0; p < n; ++p)
            for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (std::sqrt(2.0 * off) <= 1e-12 * frob) break;

        for (Eigen::Index p = 0; p < n - 1; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) {
                if (a(p, q) == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::hypot(theta, 1.0));
                const double c = 1.0 / std::hypot(t, 1.0);
                const double sn = t * c;
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - sn * akq;
                    a(k, q) = sn * akp + c * akq;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - sn * aqk;
                    a(q, k) = sn * apk + c * aqk;
                }
                if (vectors != nullptr) {
                    Matrix& v = *vectors;
                    for (Eigen::Index k = 0; k < n; ++k) {
                        const double vkp = v(k, p);
                        const double vkq = v(k, q);
                        v(k, p) = c * vkp - sn * vkq;
                        v(k, q) = sn * vkp + c * vkq;
                    }
                }
            }
        }
    }
    return a.diagonal();
}

}  // namespace

Vector symmetric_eigenvalues(const Matrix& s) {
    if (s.rows() != s.cols() || s.rows() == 0) throw DimensionError("symmetric_eigenvalues needs a square matrix");
    const Eigen::Index n = s.rows();
    if (n == 1) return Vector::Constant(1, s(0, 0));
    if (n == 2) {
        const double mean = 0.5 * (s(0, 0) + s(1, 1));
        const double radius = std::hypot(0.5 * (s(0, 0) - s(1, 1)), 0.5 * (s(0, 1) + s(1, 0)));
        Vector out(2);
        out << mean - radius, mean + radius;
        return out;
    }
    Vector d = jacobi_diagonalise(s, nullptr);
    std::sort(d.data(), d.data() + d.size());
    return d;
}

EigenPair symmetric_max_eigenpair(const Matrix& s) {
    if (s.rows() != s.cols() || s.rows() == 0) throw DimensionError("symmetric_max_eigenpair needs a square matrix");
    Matrix vectors;
    const Vector d = jacobi_diagonalise(s, &vectors);
    Eigen::Index best = 0;
    d.maxCoeff(&best);
    return {d(best), vectors.col(best).normalized()};
}

double spectral_norm(const Matrix& a) {
    return std::sqrt(std::max(0.0, dominant_psd_eigenvalue(a.transpose() * a)));
}

}  // namespace linalg

double measure_limit_oracle(MeasureKind kind, const Matrix& a, double h) {
    require_square(a);
    if (!(h > 0.0)) throw std::invalid_argument("measure_limit_oracle needs h > 0");
    const Eigen::Index n = a.rows();
    if (kind != MeasureKind::Two) {
        const Matrix ih = Matrix::Identity(n, n) + h * a;
        return (induced_norm(kind, ih) - 1.0) / h;
    }
    // ||I + hA||_2^2 = lambda_max(I + D) with D = h(A + A^T) + h^2 A^T A. Working
    // with D directly keeps the O(h) information out of the rounding of 1 + O(h).
    const Matrix d = h * (a + a.transpose()) + h * h * (a.transpose() * a);
    const double shift = d.cwiseAbs().rowwise().sum().maxCoeff();
    const double lambda = linalg::dominant_psd_eigenvalue(d + shift * Matrix::Identity(n, n)) - shift;
    const double norm_minus_one = lambda / (std::sqrt(1.0 + lambda) + 1.0);
    return norm_minus_one / h;
}

}  // namespace pwsc
