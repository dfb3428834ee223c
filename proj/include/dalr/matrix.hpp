#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dalr/error.hpp"

namespace dalr {

/// Row-major dense matrix of doubles.
class DenseMatrix {
public:
    DenseMatrix() = default;

    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill)
    {
    }

    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data))
    {
        if (data_.size() != rows_ * cols_)
            throw DimensionError("matrix data length " + std::to_string(data_.size()) + " does not match "
                                 + std::to_string(rows_) + "x" + std::to_string(cols_));
    }

    /// Builds from nested row lists, e.g. `DenseMatrix::from_rows({{1, 2}, {3, 4}})`.
    static DenseMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows)
    {
        const std::size_t r = rows.size();
        const std::size_t c = r ? rows.begin()->size() : 0;
        std::vector<double> data;
        data.reserve(r * c);
        for (const auto& row : rows) {
            if (row.size() != c)
                throw DimensionError("ragged row list in DenseMatrix::from_rows");
            data.insert(data.end(), row.begin(), row.end());
        }
        return DenseMatrix(r, c, std::move(data));
    }

    static DenseMatrix identity(std::size_t n)
    {
        DenseMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i)
            m(i, i) = 1.0;
        return m;
    }

    static DenseMatrix diagonal(std::span<const double> d)
    {
        DenseMatrix m(d.size(), d.size());
        for (std::size_t i = 0; i < d.size(); ++i)
            m(i, i) = d[i];
        return m;
    }

    static DenseMatrix column(std::span<const double> v)
    {
        return DenseMatrix(v.size(), 1, std::vector<double>(v.begin(), v.end()));
    }

    static DenseMatrix row(std::span<const double> v)
    {
        return DenseMatrix(1, v.size(), std::vector<double>(v.begin(), v.end()));
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    std::span<double> row_span(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row_span(std::size_t i) const noexcept { return {data_.data() + i * cols_, cols_}; }

    std::vector<double> col_vector(std::size_t j) const
    {
        std::vector<double> v(rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            v[i] = (*this)(i, j);
        return v;
    }

    std::string shape() const { return std::to_string(rows_) + "x" + std::to_string(cols_); }

    bool all_finite() const noexcept
    {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
    }

    friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline std::ostream& operator<<(std::ostream& os, const DenseMatrix& m)
{
    os << m.shape() << " [";
    for (std::size_t i = 0; i < m.rows(); ++i) {
        os << (i ? "; " : "");
        for (std::size_t j = 0; j < m.cols(); ++j)
            os << (j ? " " : "") << m(i, j);
    }
    return os << ']';
}

namespace detail {

inline void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, const char* op)
{
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw DimensionError(std::string(op) + ": shape mismatch " + a.shape() + " vs " + b.shape());
}

} // namespace detail

inline void require_finite(const DenseMatrix& a, const std::string& what)
{
    if (!a.all_finite())
        throw NumericalError(what + " (" + a.shape() + ") contains non-finite values");
}

inline DenseMatrix transpose(const DenseMatrix& a)
{
    DenseMatrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            t(j, i) = a(i, j);
    return t;
}

/// a * b. The i-k-j loop order keeps the inner loop contiguous in both operands.
inline DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b)
{
    if (a.cols() != b.rows())
        throw DimensionError("matmul: shape mismatch " + a.shape() + " * " + b.shape());
    DenseMatrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto crow = c.row_span(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0)
                continue;
            auto brow = b.row_span(k);
            for (std::size_t j = 0; j < b.cols(); ++j)
                crow[j] += aik * brow[j];
        }
    }
    return c;
}

/// a * bᵀ without materializing the transpose.
inline DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b)
{
    if (a.cols() != b.cols())
        throw DimensionError("matmul_nt: shape mismatch " + a.shape() + " * (" + b.shape() + ")^T");
    DenseMatrix c(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto arow = a.row_span(i);
        for (std::size_t j = 0; j < b.rows(); ++j) {
            auto brow = b.row_span(j);
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k)
                s += arow[k] * brow[k];
            c(i, j) = s;
        }
    }
    return c;
}

/// aᵀ * b without materializing the transpose.
inline DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b)
{
    if (a.rows() != b.rows())
        throw DimensionError("matmul_tn: shape mismatch (" + a.shape() + ")^T * " + b.shape());
    DenseMatrix c(a.cols(), b.cols());
    for (std::size_t k = 0; k < a.rows(); ++k) {
        auto arow = a.row_span(k);
        auto brow = b.row_span(k);
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double aki = arow[i];
            if (aki == 0.0)
                continue;
            auto crow = c.row_span(i);
            for (std::size_t j = 0; j < b.cols(); ++j)
                crow[j] += aki * brow[j];
        }
    }
    return c;
}

inline std::vector<double> matvec(const DenseMatrix& a, std::span<const double> x)
{
    if (a.cols() != x.size())
        throw DimensionError("matvec: shape mismatch " + a.shape() + " * vector of length " + std::to_string(x.size()));
    std::vector<double> y(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto arow = a.row_span(i);
        double s = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j)
            s += arow[j] * x[j];
        y[i] = s;
    }
    return y;
}

inline DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b)
{
    detail::require_same_shape(a, b, "add");
    DenseMatrix c = a;
    auto cd = c.data();
    auto bd = b.data();
    for (std::size_t i = 0; i < cd.size(); ++i)
        cd[i] += bd[i];
    return c;
}

inline DenseMatrix subtract(const DenseMatrix& a, const DenseMatrix& b)
{
    detail::require_same_shape(a, b, "subtract");
    DenseMatrix c = a;
    auto cd = c.data();
    auto bd = b.data();
    for (std::size_t i = 0; i < cd.size(); ++i)
        cd[i] -= bd[i];
    return c;
}

inline DenseMatrix scale(const DenseMatrix& a, double factor)
{
    DenseMatrix c = a;
    for (auto& v : c.data())
        v *= factor;
    return c;
}

/// a + alpha * I for square a.
inline DenseMatrix add_scaled_identity(const DenseMatrix& a, double alpha)
{
    if (a.rows() != a.cols())
        throw DimensionError("add_scaled_identity: matrix " + a.shape() + " is not square");
    DenseMatrix c = a;
    for (std::size_t i = 0; i < c.rows(); ++i)
        c(i, i) += alpha;
    return c;
}

inline double frobenius_norm_squared(const DenseMatrix& a)
{
    double s = 0.0;
    for (double v : a.data())
        s += v * v;
    return s;
}

/// Frobenius norm, scaled to avoid overflow on large entries.
inline double frobenius_norm(const DenseMatrix& a)
{
    double amax = 0.0;
    for (double v : a.data())
        amax = std::max(amax, std::abs(v));
    if (amax == 0.0 || !std::isfinite(amax))
        return amax;
    double s = 0.0;
    for (double v : a.data()) {
        const double r = v / amax;
        s += r * r;
    }
    return amax * std::sqrt(s);
}

inline double trace(const DenseMatrix& a)
{
    if (a.rows() != a.cols())
        throw DimensionError("trace: matrix " + a.shape() + " is not square");
    double t = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        t += a(i, i);
    return t;
}

/// Columns [0, count) of a.
inline DenseMatrix leading_columns(const DenseMatrix& a, std::size_t count)
{
    if (count > a.cols())
        throw DimensionError("leading_columns: " + std::to_string(count) + " exceeds " + a.shape());
    DenseMatrix c(a.rows(), count);
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < count; ++j)
            c(i, j) = a(i, j);
    return c;
}

/// Columns [begin, end) of a.
inline DenseMatrix column_block(const DenseMatrix& a, std::size_t begin, std::size_t end)
{
    if (begin > end || end > a.cols())
        throw DimensionError("column_block: range [" + std::to_string(begin) + ", " + std::to_string(end)
                             + ") outside " + a.shape());
    DenseMatrix c(a.rows(), end - begin);
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = begin; j < end; ++j)
            c(i, j - begin) = a(i, j);
    return c;
}

/// Rows listed in `indices`, in that order.
inline DenseMatrix select_rows(const DenseMatrix& a, std::span<const std::size_t> indices)
{
    DenseMatrix c(indices.size(), a.cols());
    for (std::size_t r = 0; r < indices.size(); ++r) {
        if (indices[r] >= a.rows())
            throw RangeError("select_rows: index " + std::to_string(indices[r]) + " outside " + a.shape());
        auto src = a.row_span(indices[r]);
        std::copy(src.begin(), src.end(), c.row_span(r).begin());
    }
    return c;
}

/// Columns listed in `indices`, in that order.
inline DenseMatrix select_cols(const DenseMatrix& a, std::span<const std::size_t> indices)
{
    DenseMatrix c(a.rows(), indices.size());
    for (std::size_t q = 0; q < indices.size(); ++q)
        if (indices[q] >= a.cols())
            throw RangeError("select_cols: index " + std::to_string(indices[q]) + " outside " + a.shape());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t q = 0; q < indices.size(); ++q)
            c(i, q) = a(i, indices[q]);
    return c;
}

/// a with `v` added to every column (a.rows() == v.size()).
inline DenseMatrix add_column_broadcast(const DenseMatrix& a, std::span<const double> v)
{
    if (a.rows() != v.size())
        throw DimensionError("add_column_broadcast: " + a.shape() + " vs vector of length " + std::to_string(v.size()));
    DenseMatrix c = a;
    for (std::size_t i = 0; i < c.rows(); ++i)
        for (auto& x : c.row_span(i))
            x += v[i];
    return c;
}

} // namespace dalr
