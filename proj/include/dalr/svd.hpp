#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "dalr/matrix.hpp"

namespace dalr {

/// Thin SVD: a = u * diag(s) * vt with r = min(m, n).
///
/// `s` is non-increasing, `u` is m×r with orthonormal columns, `vt` is r×n
/// with orthonormal rows. The first nonzero entry of every column of `u` is
/// non-negative, so factorizations are deterministic.
struct SvdFactors {
    DenseMatrix u;
    std::vector<double> s;
    DenseMatrix vt;

    std::size_t rank_bound() const noexcept { return s.size(); }

    /// u * diag(s) * vt.
    DenseMatrix reconstruct() const { return reconstruct(s.size()); }

    /// Rank-k reassembly from the leading k triplets.
    DenseMatrix reconstruct(std::size_t k) const
    {
        DenseMatrix out(u.rows(), vt.cols());
        for (std::size_t i = 0; i < u.rows(); ++i) {
            auto orow = out.row_span(i);
            for (std::size_t l = 0; l < k; ++l) {
                const double f = u(i, l) * s[l];
                if (f == 0.0)
                    continue;
                auto vrow = vt.row_span(l);
                for (std::size_t j = 0; j < vt.cols(); ++j)
                    orow[j] += f * vrow[j];
            }
        }
        return out;
    }
};

namespace detail {

using Columns = std::vector<std::vector<double>>;

inline double dot(const std::vector<double>& a, const std::vector<double>& b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += a[i] * b[i];
    return s;
}

inline double norm2(const std::vector<double>& a)
{
    double amax = 0.0;
    for (double v : a)
        amax = std::max(amax, std::abs(v));
    if (amax == 0.0)
        return 0.0;
    double s = 0.0;
    for (double v : a)
        s += (v / amax) * (v / amax);
    return amax * std::sqrt(s);
}

inline void rotate(std::vector<double>& x, std::vector<double>& y, double c, double s)
{
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double xi = x[i];
        const double yi = y[i];
        x[i] = c * xi - s * yi;
        y[i] = s * xi + c * yi;
    }
}

/// Replaces `target` with a unit vector orthogonal to every column in `basis`.
inline void complete_orthonormal(std::vector<double>& target, const std::vector<const std::vector<double>*>& basis)
{
    const std::size_t dim = target.size();
    for (std::size_t e = 0; e < dim; ++e) {
        std::vector<double> cand(dim, 0.0);
        cand[e] = 1.0;
        for (int pass = 0; pass < 2; ++pass)
            for (const auto* q : basis) {
                const double proj = dot(cand, *q);
                for (std::size_t i = 0; i < dim; ++i)
                    cand[i] -= proj * (*q)[i];
            }
        const double nrm = norm2(cand);
        if (nrm > 0.5) {
            for (auto& v : cand)
                v /= nrm;
            target = std::move(cand);
            return;
        }
    }
}

/// One-sided Jacobi on a tall matrix given as columns (rows >= cols).
/// On return `g` holds the orthogonalized columns and `v` the accumulated rotations.
inline void one_sided_jacobi(Columns& g, Columns& v, std::size_t rows, std::size_t cols, const DenseMatrix& origin)
{
    constexpr int max_sweeps = 100;
    const double tol = std::numeric_limits<double>::epsilon() * static_cast<double>(std::max<std::size_t>(rows, 1));

    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < cols; ++p) {
            for (std::size_t q = p + 1; q < cols; ++q) {
                const double alpha = dot(g[p], g[p]);
                const double beta = dot(g[q], g[q]);
                const double gamma = dot(g[p], g[q]);
                if (alpha == 0.0 || beta == 0.0 || gamma == 0.0)
                    continue;
                if (std::abs(gamma) <= tol * std::sqrt(alpha) * std::sqrt(beta))
                    continue;
                rotated = true;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                rotate(g[p], g[q], c, s);
                rotate(v[p], v[q], c, s);
            }
        }
        if (!rotated)
            return;
    }
    throw DecompositionError("svd: one-sided Jacobi did not converge for matrix of shape " + origin.shape());
}

} // namespace detail

/// Thin singular value decomposition via one-sided Jacobi rotations.
inline SvdFactors svd(const DenseMatrix& a)
{
    if (a.empty())
        throw DimensionError("svd: empty matrix " + a.shape());
    require_finite(a, "svd input");

    const bool wide = a.rows() < a.cols();
    const std::size_t rows = wide ? a.cols() : a.rows();
    const std::size_t cols = wide ? a.rows() : a.cols();

    // Columns of the tall working matrix.
    detail::Columns g(cols, std::vector<double>(rows));
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) {
            if (wide)
                g[i][j] = a(i, j);
            else
                g[j][i] = a(i, j);
        }
    detail::Columns v(cols, std::vector<double>(cols, 0.0));
    for (std::size_t j = 0; j < cols; ++j)
        v[j][j] = 1.0;

    detail::one_sided_jacobi(g, v, rows, cols, a);

    std::vector<double> sv(cols);
    for (std::size_t j = 0; j < cols; ++j)
        sv[j] = detail::norm2(g[j]);
    std::vector<std::size_t> order(cols);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return sv[x] > sv[y]; });

    const double smax = sv[order.front()];
    const double zero_tol = smax * std::numeric_limits<double>::epsilon() * static_cast<double>(rows);

    // Normalize the tall-side singular vectors; complete any null directions.
    detail::Columns left(cols);
    std::vector<double> s(cols);
    std::vector<const std::vector<double>*> accepted;
    std::vector<std::size_t> deficient;
    for (std::size_t r = 0; r < cols; ++r) {
        const std::size_t j = order[r];
        s[r] = sv[j];
        if (sv[j] > zero_tol && sv[j] > 0.0) {
            left[r] = g[j];
            for (auto& x : left[r])
                x /= sv[j];
            accepted.push_back(&left[r]);
        } else {
            left[r].assign(rows, 0.0);
            deficient.push_back(r);
        }
    }
    for (std::size_t r : deficient) {
        detail::complete_orthonormal(left[r], accepted);
        accepted.push_back(&left[r]);
    }

    // Map back: tall side is u (not wide) or v (wide).
    const std::size_t m = a.rows();
    const std::size_t n = a.cols();
    SvdFactors out{DenseMatrix(m, cols), std::move(s), DenseMatrix(cols, n)};
    for (std::size_t r = 0; r < cols; ++r) {
        const auto& tall = left[r];
        const auto& rot = v[order[r]];
        if (!wide) {
            for (std::size_t i = 0; i < m; ++i)
                out.u(i, r) = tall[i];
            for (std::size_t j = 0; j < n; ++j)
                out.vt(r, j) = rot[j];
        } else {
            for (std::size_t i = 0; i < m; ++i)
                out.u(i, r) = rot[i];
            for (std::size_t j = 0; j < n; ++j)
                out.vt(r, j) = tall[j];
        }
    }

    // Sign convention: first nonzero entry of each left vector is non-negative.
    for (std::size_t r = 0; r < cols; ++r) {
        for (std::size_t i = 0; i < m; ++i) {
            const double x = out.u(i, r);
            if (std::abs(x) <= 1e-12)
                continue;
            if (x < 0.0) {
                for (std::size_t ii = 0; ii < m; ++ii)
                    out.u(ii, r) = -out.u(ii, r);
                for (std::size_t j = 0; j < n; ++j)
                    out.vt(r, j) = -out.vt(r, j);
            }
            break;
        }
    }
    return out;
}

} // namespace dalr
