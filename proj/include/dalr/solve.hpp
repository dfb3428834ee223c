#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include "dalr/matrix.hpp"

namespace dalr {

/// Cholesky factor L (lower triangular) with m = L Lᵀ.
inline DenseMatrix cholesky(const DenseMatrix& m)
{
    if (m.rows() != m.cols())
        throw DimensionError("cholesky: matrix " + m.shape() + " is not square");
    const std::size_t n = m.rows();

    double scale_ref = 1.0;
    double max_diag = 0.0;
    for (double v : m.data())
        scale_ref = std::max(scale_ref, std::abs(v));
    for (std::size_t i = 0; i < n; ++i) {
        max_diag = std::max(max_diag, m(i, i));
        for (std::size_t j = 0; j < i; ++j)
            if (std::abs(m(i, j) - m(j, i)) > 1e-10 * scale_ref)
                throw DimensionError("solve_spd: matrix " + m.shape() + " is not symmetric at ("
                                     + std::to_string(i) + ", " + std::to_string(j) + ")");
    }

    const double pivot_floor = static_cast<double>(n) * std::numeric_limits<double>::epsilon() * max_diag;
    DenseMatrix l(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double d = m(j, j);
        for (std::size_t k = 0; k < j; ++k)
            d -= l(j, k) * l(j, k);
        if (!(d > pivot_floor))
            throw SingularSystemError("solve_spd: matrix " + m.shape() + " is not positive definite (pivot "
                                      + std::to_string(j) + " = " + std::to_string(d)
                                      + "); use a larger ridge lambda");
        const double ljj = std::sqrt(d);
        l(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = m(i, j);
            for (std::size_t k = 0; k < j; ++k)
                s -= l(i, k) * l(j, k);
            l(i, j) = s / ljj;
        }
    }
    return l;
}

/// Solves m * S = rhs for symmetric positive definite m.
inline DenseMatrix solve_spd(const DenseMatrix& m, const DenseMatrix& rhs)
{
    if (m.rows() != rhs.rows())
        throw DimensionError("solve_spd: shape mismatch " + m.shape() + " vs rhs " + rhs.shape());
    const DenseMatrix l = cholesky(m);
    const std::size_t n = m.rows();

    DenseMatrix x = rhs;
    for (std::size_t c = 0; c < rhs.cols(); ++c) {
        for (std::size_t i = 0; i < n; ++i) {
            double s = x(i, c);
            for (std::size_t k = 0; k < i; ++k)
                s -= l(i, k) * x(k, c);
            x(i, c) = s / l(i, i);
        }
        for (std::size_t ii = n; ii-- > 0;) {
            double s = x(ii, c);
            for (std::size_t k = ii + 1; k < n; ++k)
                s -= l(k, ii) * x(k, c);
            x(ii, c) = s / l(ii, ii);
        }
    }
    require_finite(x, "solve_spd solution");
    return x;
}

} // namespace dalr
