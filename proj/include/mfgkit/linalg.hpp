#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "mfgkit/errors.hpp"

namespace mfgkit {

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double sqdist(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

inline bool all_finite(std::span<const double> a) {
    for (double x : a)
        if (!std::isfinite(x)) return false;
    return true;
}

// Solves A z = b in place for small dense d x d systems (row-major A) by
// Gaussian elimination with partial pivoting. A and b are clobbered; the
// solution lands in b.
inline void solve_linear(std::vector<double>& A, std::vector<double>& b) {
    const std::size_t d = b.size();
    for (std::size_t col = 0; col < d; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < d; ++r)
            if (std::fabs(A[r * d + col]) > std::fabs(A[piv * d + col])) piv = r;
        if (std::fabs(A[piv * d + col]) < 1e-300)
            throw SingularHessian("solve_linear: singular matrix");
        if (piv != col) {
            for (std::size_t c = 0; c < d; ++c) std::swap(A[piv * d + c], A[col * d + c]);
            std::swap(b[piv], b[col]);
        }
        const double inv = 1.0 / A[col * d + col];
        for (std::size_t r = col + 1; r < d; ++r) {
            const double f = A[r * d + col] * inv;
            if (f == 0.0) continue;
            for (std::size_t c = col; c < d; ++c) A[r * d + c] -= f * A[col * d + c];
            b[r] -= f * b[col];
        }
    }
    for (std::size_t ri = d; ri-- > 0;) {
        double s = b[ri];
        for (std::size_t c = ri + 1; c < d; ++c) s -= A[ri * d + c] * b[c];
        b[ri] = s / A[ri * d + ri];
    }
}

// Smallest eigenvalue of a symmetric d x d matrix by cyclic Jacobi sweeps.
// Plenty for the d <= 3 Hessians this toolkit differentiates. The input is
// symmetrized first; finite-difference Hessians carry slight asymmetry.
inline double sym_eig_min(std::vector<double> A, std::size_t d) {
    if (d == 1) return A[0];
    for (std::size_t r = 0; r < d; ++r)
        for (std::size_t c = r + 1; c < d; ++c) {
            const double s = 0.5 * (A[r * d + c] + A[c * d + r]);
            A[r * d + c] = s;
            A[c * d + r] = s;
        }
    for (int sweep = 0; sweep < 64; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < d; ++p)
            for (std::size_t q = p + 1; q < d; ++q) off += A[p * d + q] * A[p * d + q];
        if (off < 1e-26) break;
        for (std::size_t p = 0; p < d; ++p) {
            for (std::size_t q = p + 1; q < d; ++q) {
                const double apq = A[p * d + q];
                if (std::fabs(apq) < 1e-300) continue;
                const double theta = (A[q * d + q] - A[p * d + p]) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < d; ++k) {
                    const double akp = A[k * d + p];
                    const double akq = A[k * d + q];
                    A[k * d + p] = c * akp - s * akq;
                    A[k * d + q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < d; ++k) {
                    const double apk = A[p * d + k];
                    const double aqk = A[q * d + k];
                    A[p * d + k] = c * apk - s * aqk;
                    A[q * d + k] = s * apk + c * aqk;
                }
            }
        }
    }
    double lo = A[0];
    for (std::size_t i = 1; i < d; ++i) lo = std::min(lo, A[i * d + i]);
    return lo;
}

// w' M^{-1} w for symmetric positive definite M; equals |M^{-1/2} w|^2.
inline double inv_quadratic_form(std::vector<double> M, std::vector<double> w) {
    std::vector<double> rhs = w;
    solve_linear(M, rhs);
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * rhs[i];
    return s;
}

}  // namespace mfgkit
