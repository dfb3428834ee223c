#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dalr/layer.hpp"
#include "dalr/matrix.hpp"
#include "dalr/solve.hpp"
#include "dalr/svd.hpp"

namespace dalr {

enum class Method { Svd, SvdBc, Dalr };

inline const char* to_string(Method m)
{
    switch (m) {
    case Method::Svd: return "svd";
    case Method::SvdBc: return "svd-bc";
    case Method::Dalr: return "dalr";
    }
    return "unknown";
}

inline Method parse_method(std::string_view name)
{
    if (name == "svd")
        return Method::Svd;
    if (name == "svd-bc")
        return Method::SvdBc;
    if (name == "dalr")
        return Method::Dalr;
    throw UsageError("unknown compression method '" + std::string(name) + "'");
}

/// Rank-k replacement for one layer: W ≈ a bᵀ, with a m×k and b n×k.
struct FactorPair {
    DenseMatrix a;
    DenseMatrix b;
    std::vector<double> new_bias;
    std::size_t rank = 0;
    Method method = Method::Svd;
    double lambda = 0.0;

    std::size_t outputs() const noexcept { return a.rows(); }
    std::size_t inputs() const noexcept { return b.rows(); }

    /// The implied m×n weight matrix a bᵀ.
    DenseMatrix product() const { return matmul_nt(a, b); }

    /// a (bᵀ x) + new_bias, evaluated as the two spliced layers would.
    DenseMatrix apply(const DenseMatrix& x) const
    {
        return add_column_broadcast(matmul(a, matmul_tn(b, x)), new_bias);
    }

    /// (m + n) k < m n.
    bool saves_parameters() const noexcept { return (outputs() + inputs()) * rank < outputs() * inputs(); }
};

/// Ridge strength for the DALR regression. Unset means the scale-aware
/// default 1e-3 · trace(X Xᵀ) / n.
struct RidgeConfig {
    std::optional<double> lambda;

    static RidgeConfig fixed(double value)
    {
        if (!(value >= 0.0) || !std::isfinite(value))
            throw RangeError("ridge lambda must be a finite non-negative number, got " + std::to_string(value));
        return RidgeConfig{value};
    }

    static constexpr double default_factor = 1e-3;

    double resolve(double gram_trace, std::size_t n) const
    {
        if (lambda)
            return *lambda;
        return default_factor * gram_trace / static_cast<double>(n);
    }
};

enum class BiasMeanMode {
    Mean, ///< x̄ = X 1_p / p
    Sum,  ///< x̄ = X 1_p, literal compatibility variant
};

struct DalrOptions {
    /// Apply bias compensation after the DALR factorization.
    bool compensate_bias = false;
};

inline void check_rank(std::size_t m, std::size_t n, std::size_t k)
{
    if (k < 1 || k > std::min(m, n))
        throw RankError("rank " + std::to_string(k) + " outside [1, " + std::to_string(std::min(m, n))
                        + "] for a " + std::to_string(m) + "x" + std::to_string(n) + " layer");
}

/// Keeps the k leading singular triplets: a = Û, b = V̂ Ŝ.
inline FactorPair svd_truncate(const LinearLayer& layer, std::size_t k)
{
    const auto& w = layer.weights();
    check_rank(w.rows(), w.cols(), k);
    const SvdFactors f = svd(w);

    FactorPair pair;
    pair.a = leading_columns(f.u, k);
    pair.b = DenseMatrix(w.cols(), k);
    for (std::size_t j = 0; j < w.cols(); ++j)
        for (std::size_t l = 0; l < k; ++l)
            pair.b(j, l) = f.vt(l, j) * f.s[l];
    pair.new_bias = layer.bias();
    pair.rank = k;
    pair.method = Method::Svd;
    return pair;
}

/// b̂ = b + (W − a bᵀ) x̄ for a given x̄.
inline FactorPair bias_compensate(const LinearLayer& layer, FactorPair pair, std::span<const double> xbar)
{
    if (xbar.size() != layer.inputs())
        throw DimensionError("bias_compensate: activation dimension " + std::to_string(xbar.size())
                             + " does not match layer " + layer.weights().shape());
    if (pair.outputs() != layer.outputs() || pair.inputs() != layer.inputs())
        throw DimensionError("bias_compensate: factor pair " + pair.a.shape() + " / " + pair.b.shape()
                             + " does not match layer " + layer.weights().shape());
    const DenseMatrix residual = subtract(layer.weights(), pair.product());
    const std::vector<double> shift = matvec(residual, xbar);
    pair.new_bias = layer.bias();
    for (std::size_t i = 0; i < shift.size(); ++i)
        pair.new_bias[i] += shift[i];
    if (pair.method == Method::Svd)
        pair.method = Method::SvdBc;
    return pair;
}

inline FactorPair bias_compensate(const LinearLayer& layer, FactorPair pair, const ActivationBatch& acts,
                                  BiasMeanMode mode = BiasMeanMode::Mean)
{
    if (acts.dimension() != layer.inputs())
        throw DimensionError("bias_compensate: activations " + acts.x().shape() + " do not match layer "
                             + layer.weights().shape());
    return bias_compensate(layer, std::move(pair), mode == BiasMeanMode::Mean ? acts.mean() : acts.column_sum());
}

/// Running sufficient statistics of an activation stream: X Xᵀ, X 1, and p.
/// Blocks of columns may be added in any order; the sums are over samples.
class GramAccumulator {
public:
    explicit GramAccumulator(std::size_t dimension)
        : gram_(dimension, dimension), sum_(dimension, 0.0)
    {
    }

    void add(const DenseMatrix& block)
    {
        if (block.rows() != gram_.rows())
            throw DimensionError("GramAccumulator: block " + block.shape() + " does not match dimension "
                                 + std::to_string(gram_.rows()));
        const DenseMatrix g = matmul_nt(block, block);
        auto gd = gram_.data();
        auto bd = g.data();
        for (std::size_t i = 0; i < gd.size(); ++i)
            gd[i] += bd[i];
        for (std::size_t i = 0; i < block.rows(); ++i)
            for (double v : block.row_span(i))
                sum_[i] += v;
        count_ += block.cols();
    }

    std::size_t dimension() const noexcept { return gram_.rows(); }
    std::size_t samples() const noexcept { return count_; }
    const DenseMatrix& gram() const noexcept { return gram_; }
    const std::vector<double>& sum() const noexcept { return sum_; }

    std::vector<double> mean() const
    {
        if (count_ == 0)
            throw BatchError("GramAccumulator: no samples accumulated");
        std::vector<double> m(sum_);
        for (auto& v : m)
            v /= static_cast<double>(count_);
        return m;
    }

private:
    DenseMatrix gram_;
    std::vector<double> sum_;
    std::size_t count_ = 0;
};

namespace detail {

inline DenseMatrix ridge_solve(const DenseMatrix& gram, double lambda, const DenseMatrix& rhs)
{
    try {
        return solve_spd(add_scaled_identity(gram, lambda), rhs);
    } catch (const SingularSystemError& e) {
        if (lambda == 0.0)
            throw SingularSystemError(std::string(e.what()) + "; X Xᵀ is rank deficient, use lambda > 0");
        throw;
    }
}

inline FactorPair finish_dalr(const LinearLayer& layer, DenseMatrix a, DenseMatrix b, std::size_t k, double lambda,
                              const DalrOptions& opts, std::span<const double> mean)
{
    FactorPair pair;
    pair.a = std::move(a);
    pair.b = std::move(b);
    pair.new_bias = layer.bias();
    pair.rank = k;
    pair.method = Method::Dalr;
    pair.lambda = lambda;
    if (opts.compensate_bias)
        pair = bias_compensate(layer, std::move(pair), mean);
    require_finite(pair.a, "DALR factor a");
    require_finite(pair.b, "DALR factor b");
    return pair;
}

} // namespace detail

/// Domain-adaptive low-rank factorization minimizing ‖W X − a bᵀ X‖_F² + λ‖a bᵀ‖_F².
///
/// With Z = W X and Û its k leading left singular vectors:
///   a = Û,  bᵀ = Ûᵀ Z Xᵀ (X Xᵀ + λ I)⁻¹.
/// The original bias is kept unless `opts.compensate_bias` is set.
inline FactorPair dalr_compress(const LinearLayer& layer, const ActivationBatch& acts, std::size_t k,
                                const RidgeConfig& ridge = {}, const DalrOptions& opts = {})
{
    const auto& w = layer.weights();
    const auto& x = acts.x();
    if (x.rows() != w.cols())
        throw DimensionError("dalr_compress: activations " + x.shape() + " do not match layer " + w.shape());
    check_rank(w.rows(), w.cols(), k);

    const DenseMatrix z = matmul(w, x);
    const DenseMatrix u_hat = leading_columns(svd(z).u, k);
    const DenseMatrix gram = matmul_nt(x, x);
    const double lambda = ridge.resolve(trace(gram), x.rows());

    // Rᵀ = X Zᵀ Û (n×k); b = (X Xᵀ + λI)⁻¹ Rᵀ.
    const DenseMatrix rhs = matmul(x, matmul_tn(z, u_hat));
    DenseMatrix b = detail::ridge_solve(gram, lambda, rhs);
    return detail::finish_dalr(layer, u_hat, std::move(b), k, lambda, opts, acts.mean());
}

/// DALR from accumulated statistics only, for batches too large to hold.
///
/// Uses Z Zᵀ = W G Wᵀ with G = X Xᵀ = L Lᵀ, so the left singular vectors of
/// W L equal those of Z, and Z Xᵀ = W G.
inline FactorPair dalr_compress(const LinearLayer& layer, const GramAccumulator& stats, std::size_t k,
                                const RidgeConfig& ridge = {}, const DalrOptions& opts = {})
{
    const auto& w = layer.weights();
    if (stats.dimension() != w.cols())
        throw DimensionError("dalr_compress: activation dimension " + std::to_string(stats.dimension())
                             + " does not match layer " + w.shape());
    if (stats.samples() == 0)
        throw BatchError("dalr_compress: no activation samples");
    check_rank(w.rows(), w.cols(), k);

    const DenseMatrix& gram = stats.gram();
    const SvdFactors eig = svd(gram);
    DenseMatrix root = eig.u;
    for (std::size_t i = 0; i < root.rows(); ++i)
        for (std::size_t j = 0; j < root.cols(); ++j)
            root(i, j) *= std::sqrt(eig.s[j]);
    const DenseMatrix u_hat = leading_columns(svd(matmul(w, root)).u, k);
    const double lambda = ridge.resolve(trace(gram), w.cols());

    const DenseMatrix rhs = matmul(gram, matmul_tn(w, u_hat));
    DenseMatrix b = detail::ridge_solve(gram, lambda, rhs);
    return detail::finish_dalr(layer, u_hat, std::move(b), k, lambda, opts, stats.mean());
}

/// (‖Z − C X‖_F² + λ‖C‖_F², ‖Z* − C X*‖_F²) with X* = [X, √λ I] and Z* = [Z, 0].
inline std::pair<double, double> ridge_augmentation_check(const DenseMatrix& z, const DenseMatrix& x,
                                                          const DenseMatrix& c, double lambda)
{
    if (c.cols() != x.rows() || z.rows() != c.rows() || z.cols() != x.cols())
        throw DimensionError("ridge_augmentation_check: Z " + z.shape() + ", C " + c.shape() + ", X " + x.shape());
    if (!(lambda >= 0.0))
        throw RangeError("ridge_augmentation_check: lambda must be non-negative");

    const double penalized =
        frobenius_norm_squared(subtract(z, matmul(c, x))) + lambda * frobenius_norm_squared(c);

    const std::size_t n = x.rows();
    const std::size_t p = x.cols();
    DenseMatrix x_aug(n, p + n);
    DenseMatrix z_aug(z.rows(), p + n);
    const double root = std::sqrt(lambda);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < p; ++j)
            x_aug(i, j) = x(i, j);
        x_aug(i, p + i) = root;
    }
    for (std::size_t i = 0; i < z.rows(); ++i)
        for (std::size_t j = 0; j < p; ++j)
            z_aug(i, j) = z(i, j);
    const double augmented = frobenius_norm_squared(subtract(z_aug, matmul(c, x_aug)));
    return {penalized, augmented};
}

/// m n > 0 required. Returns (m + n) k / (m n).
inline double parameter_fraction(std::size_t m, std::size_t n, std::size_t k)
{
    if (m == 0 || n == 0 || k == 0)
        throw RangeError("parameter_fraction: dimensions and rank must be positive");
    return static_cast<double>((m + n) * k) / (static_cast<double>(m) * static_cast<double>(n));
}

/// ε = ‖Y − Ŷ‖_F.
inline double reconstruction_error(const DenseMatrix& y_true, const DenseMatrix& y_hat)
{
    return frobenius_norm(subtract(y_true, y_hat));
}

/// ε between the original layer and a factor pair on inputs x, biases included.
inline double reconstruction_error(const LinearLayer& layer, const FactorPair& pair, const DenseMatrix& x)
{
    return reconstruction_error(layer.apply(x), pair.apply(x));
}

// ---------------------------------------------------------------------------
// Activation-based pruning baselines

enum class PruneScore { Mean, Max };

inline const char* to_string(PruneScore s) { return s == PruneScore::Mean ? "mean" : "max"; }

/// Per-output-unit response statistics of max(0, W x + b) over a stream of batches.
class PruneScorer {
public:
    explicit PruneScorer(const LinearLayer& layer)
        : layer_(&layer), sum_(layer.outputs(), 0.0), max_(layer.outputs(), 0.0)
    {
    }

    void add(const DenseMatrix& block)
    {
        if (block.rows() != layer_->inputs())
            throw DimensionError("PruneScorer: block " + block.shape() + " does not match layer "
                                 + layer_->weights().shape());
        const DenseMatrix y = layer_->apply(block);
        for (std::size_t i = 0; i < y.rows(); ++i)
            for (double v : y.row_span(i)) {
                const double r = std::max(0.0, v);
                sum_[i] += r;
                max_[i] = std::max(max_[i], r);
            }
        count_ += block.cols();
    }

    std::size_t samples() const noexcept { return count_; }

    std::vector<double> scores(PruneScore kind) const
    {
        if (count_ == 0)
            throw BatchError("PruneScorer: empty activation batch");
        if (kind == PruneScore::Max)
            return max_;
        std::vector<double> s(sum_);
        for (auto& v : s)
            v /= static_cast<double>(count_);
        return s;
    }

private:
    const LinearLayer* layer_;
    std::vector<double> sum_;
    std::vector<double> max_;
    std::size_t count_ = 0;
};

struct PruneResult {
    LinearLayer layer;
    std::vector<std::size_t> kept; ///< Original output indices, ascending.
};

/// Indices of the `keep` highest scores, ties to the lowest index, returned ascending.
inline std::vector<std::size_t> top_units(std::span<const double> scores, std::size_t keep)
{
    if (keep < 1 || keep > scores.size())
        throw RangeError("prune: keep " + std::to_string(keep) + " outside [1, " + std::to_string(scores.size()) + "]");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    order.resize(keep);
    std::sort(order.begin(), order.end());
    return order;
}

inline PruneResult prune_units(const LinearLayer& layer, std::vector<std::size_t> kept)
{
    std::vector<double> bias;
    bias.reserve(kept.size());
    for (std::size_t i : kept)
        bias.push_back(layer.bias().at(i));
    return PruneResult{LinearLayer(select_rows(layer.weights(), kept), std::move(bias)), std::move(kept)};
}

/// Drops the output units of `layer` with the weakest post-ReLU response on `acts`.
inline PruneResult prune_by_activation(const LinearLayer& layer, const ActivationBatch& acts, std::size_t keep,
                                       PruneScore score)
{
    if (acts.samples() == 0)
        throw BatchError("prune_by_activation: empty activation batch");
    if (keep < 1 || keep > layer.outputs())
        throw RangeError("prune_by_activation: keep " + std::to_string(keep) + " outside [1, "
                         + std::to_string(layer.outputs()) + "]");
    PruneScorer scorer(layer);
    scorer.add(acts.x());
    const auto s = scorer.scores(score);
    return prune_units(layer, top_units(s, keep));
}

/// Units to keep so a pruned m×n layer matches the weight count of a rank-k factorization.
inline std::size_t pruning_budget(std::size_t m, std::size_t n, std::size_t k)
{
    if (m == 0 || n == 0)
        throw RangeError("pruning_budget: dimensions must be positive");
    const auto keep = static_cast<std::size_t>(
        std::llround(static_cast<double>(k) * static_cast<double>(m + n) / static_cast<double>(n)));
    return std::clamp<std::size_t>(keep, 1, m);
}

} // namespace dalr
