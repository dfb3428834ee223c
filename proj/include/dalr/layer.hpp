#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "dalr/matrix.hpp"

namespace dalr {

/// A fully connected layer y = W x + b with W of shape m×n.
class LinearLayer {
public:
    LinearLayer() = default;

    LinearLayer(DenseMatrix weights, std::vector<double> bias)
        : weights_(std::move(weights)), bias_(std::move(bias))
    {
        if (bias_.size() != weights_.rows())
            throw DimensionError("LinearLayer: bias length " + std::to_string(bias_.size())
                                 + " does not match weights " + weights_.shape());
        require_finite(weights_, "LinearLayer weights");
        for (double v : bias_)
            if (!std::isfinite(v))
                throw NumericalError("LinearLayer bias contains non-finite values");
    }

    const DenseMatrix& weights() const noexcept { return weights_; }
    const std::vector<double>& bias() const noexcept { return bias_; }
    std::size_t outputs() const noexcept { return weights_.rows(); }
    std::size_t inputs() const noexcept { return weights_.cols(); }
    std::size_t parameter_count() const noexcept { return weights_.size() + bias_.size(); }

    /// W X + b 1ᵀ.
    DenseMatrix apply(const DenseMatrix& x) const { return add_column_broadcast(matmul(weights_, x), bias_); }

    friend bool operator==(const LinearLayer&, const LinearLayer&) = default;

private:
    DenseMatrix weights_;
    std::vector<double> bias_;
};

/// Layer inputs X (n×p, one sample per column) from the target domain and their per-dimension mean.
class ActivationBatch {
public:
    ActivationBatch() = default;

    explicit ActivationBatch(DenseMatrix x, bool post_relu = false) : x_(std::move(x)), post_relu_(post_relu)
    {
        if (x_.cols() == 0 || x_.rows() == 0)
            throw BatchError("ActivationBatch: empty batch " + x_.shape());
        require_finite(x_, "ActivationBatch");
        if (post_relu_)
            for (double v : x_.data())
                if (v < 0.0)
                    throw BatchError("ActivationBatch: negative entry in a batch flagged post-ReLU");
        sum_.assign(x_.rows(), 0.0);
        mean_.assign(x_.rows(), 0.0);
        const double p = static_cast<double>(x_.cols());
        for (std::size_t i = 0; i < x_.rows(); ++i) {
            for (double v : x_.row_span(i))
                sum_[i] += v;
            mean_[i] = sum_[i] / p;
        }
    }

    const DenseMatrix& x() const noexcept { return x_; }
    const std::vector<double>& mean() const noexcept { return mean_; }
    bool post_relu() const noexcept { return post_relu_; }
    std::size_t dimension() const noexcept { return x_.rows(); }
    std::size_t samples() const noexcept { return x_.cols(); }

    /// Per-dimension sum over samples (X times the all-ones vector).
    const std::vector<double>& column_sum() const noexcept { return sum_; }

private:
    DenseMatrix x_;
    std::vector<double> sum_;
    std::vector<double> mean_;
    bool post_relu_ = false;
};

} // namespace dalr
