#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "dalr/layer.hpp"

namespace dalr {

/// Per-neuron activation rates over a batch, ranked, with the half-mass concentration metric.
struct ActivationProfile {
    std::vector<double> rates;
    std::vector<std::size_t> ranked_indices;
    /// Smallest fraction of top-ranked neurons holding at least half of Σ rates.
    /// Empty when no neuron ever fired.
    std::optional<double> half_mass_fraction;

    std::size_t size() const noexcept { return rates.size(); }
    bool has_activations() const noexcept { return half_mass_fraction.has_value(); }

    double half_mass() const
    {
        if (!half_mass_fraction)
            throw BatchError("no activations");
        return *half_mass_fraction;
    }

    /// Rates in ranked (non-increasing) order.
    std::vector<double> ranked_rates() const
    {
        std::vector<double> out;
        out.reserve(rates.size());
        for (std::size_t i : ranked_indices)
            out.push_back(rates[i]);
        return out;
    }
};

/// Stable descending order of `rates`; ties go to the lower index.
inline std::vector<std::size_t> rank_descending(std::span<const double> rates)
{
    std::vector<std::size_t> order(rates.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rates[a] > rates[b]; });
    return order;
}

/// Half-mass fraction of a rate vector: ⌈q n⌉ / n for the smallest top-q cut reaching 50 % of the total.
inline std::optional<double> half_mass_fraction(std::span<const double> rates)
{
    if (rates.empty())
        return std::nullopt;
    const auto order = rank_descending(rates);
    double total = 0.0;
    for (std::size_t i : order)
        total += rates[i];
    if (!(total > 0.0))
        return std::nullopt;
    double acc = 0.0;
    for (std::size_t c = 0; c < order.size(); ++c) {
        acc += rates[order[c]];
        if (acc >= 0.5 * total)
            return static_cast<double>(c + 1) / static_cast<double>(rates.size());
    }
    return 1.0;
}

inline ActivationProfile profile_from_rates(std::vector<double> rates)
{
    for (double r : rates)
        if (!(r >= 0.0 && r <= 1.0))
            throw RangeError("activation rate outside [0, 1]");
    ActivationProfile p;
    p.ranked_indices = rank_descending(rates);
    p.half_mass_fraction = half_mass_fraction(rates);
    p.rates = std::move(rates);
    return p;
}

/// Counts, per neuron, the samples whose response exceeds `threshold`.
class RateCounter {
public:
    explicit RateCounter(std::size_t dimension, double threshold = 0.0)
        : counts_(dimension, 0), threshold_(threshold)
    {
    }

    void add(const DenseMatrix& block)
    {
        if (block.rows() != counts_.size())
            throw DimensionError("RateCounter: block " + block.shape() + " does not match dimension "
                                 + std::to_string(counts_.size()));
        for (std::size_t i = 0; i < block.rows(); ++i)
            for (double v : block.row_span(i))
                if (v > threshold_)
                    ++counts_[i];
        samples_ += block.cols();
    }

    std::size_t samples() const noexcept { return samples_; }
    const std::vector<std::uint64_t>& counts() const noexcept { return counts_; }

    ActivationProfile profile() const
    {
        if (samples_ == 0)
            throw BatchError("activation_rates: empty batch");
        std::vector<double> rates(counts_.size());
        for (std::size_t i = 0; i < rates.size(); ++i)
            rates[i] = static_cast<double>(counts_[i]) / static_cast<double>(samples_);
        return profile_from_rates(std::move(rates));
    }

private:
    std::vector<std::uint64_t> counts_;
    std::size_t samples_ = 0;
    double threshold_;
};

/// Fraction of samples in which each input dimension responds above `threshold` (strictly).
inline ActivationProfile activation_rates(const ActivationBatch& acts, double threshold = 0.0)
{
    RateCounter counter(acts.dimension(), threshold);
    counter.add(acts.x());
    return counter.profile();
}

struct SkewReport {
    double source_half_mass = 0.0;
    double target_half_mass = 0.0;
    double ratio = 0.0; ///< source / target; above 1 means the target is more concentrated.
    std::vector<double> source_curve;
    std::vector<double> target_curve;
};

inline SkewReport compare_profiles(const ActivationProfile& source, const ActivationProfile& target)
{
    if (source.size() != target.size())
        throw DimensionError("compare_profiles: source has " + std::to_string(source.size())
                             + " neurons, target has " + std::to_string(target.size()));
    SkewReport r;
    r.source_half_mass = source.half_mass();
    r.target_half_mass = target.half_mass();
    r.ratio = r.source_half_mass / r.target_half_mass;
    r.source_curve = source.ranked_rates();
    r.target_curve = target.ranked_rates();
    return r;
}

} // namespace dalr
