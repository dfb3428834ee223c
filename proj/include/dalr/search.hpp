#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "dalr/compression.hpp"
#include "dalr/network.hpp"

namespace dalr {

struct SearchConfig {
    std::vector<std::size_t> schedule_a; ///< Strictly descending ranks for the first layer; [0] is the start.
    std::vector<std::size_t> schedule_b;
    double max_drop = 0.01;
    Method method = Method::Dalr;
    RidgeConfig ridge;
    /// Measure the drop against the previous step's accuracy instead of the uncompressed baseline.
    bool relative_to_previous = false;
    /// Re-extract the other layer's activations from the partially compressed network.
    bool reextract_activations = false;
};

enum class SearchLayer { A, B };

inline const char* to_string(SearchLayer l) { return l == SearchLayer::A ? "a" : "b"; }

struct SearchStep {
    std::size_t step = 0;
    SearchLayer layer = SearchLayer::A;
    std::size_t rank_a = 0;
    std::size_t rank_b = 0;
    double accuracy = 0.0;
    double candidate_a = -1.0; ///< Accuracy of the A candidate, -1 when unavailable.
    double candidate_b = -1.0;

    friend bool operator==(const SearchStep&, const SearchStep&) = default;
};

struct SearchTrace {
    std::size_t layer_a = 0;
    std::size_t layer_b = 0;
    Method method = Method::Dalr;
    double lambda_a = 0.0;
    double lambda_b = 0.0;
    double max_drop = 0.0;
    double baseline_accuracy = 0.0; ///< Uncompressed network.
    double initial_accuracy = 0.0;  ///< Both layers at schedule[0].
    std::size_t initial_rank_a = 0;
    std::size_t initial_rank_b = 0;
    std::vector<SearchStep> steps;
    std::size_t final_rank_a = 0;
    std::size_t final_rank_b = 0;
    double final_accuracy = 0.0;
    double fraction_a = 0.0; ///< parameter_fraction at the final rank.
    double fraction_b = 0.0;
    double reduction_a = 0.0; ///< 1 − fraction_a.
    double reduction_b = 0.0;
    double reduction_total = 0.0; ///< Over the weights of both layers.
    std::string stop_reason;
};

namespace detail {

inline void validate_schedule(const std::vector<std::size_t>& schedule, const LinearLayer& layer, const char* name)
{
    if (schedule.empty())
        throw UsageError(std::string("search: schedule ") + name + " is empty");
    for (std::size_t i = 0; i < schedule.size(); ++i) {
        check_rank(layer.outputs(), layer.inputs(), schedule[i]);
        if (i > 0 && schedule[i] >= schedule[i - 1])
            throw UsageError(std::string("search: schedule ") + name + " is not strictly descending");
    }
}

} // namespace detail

/// Factor pair for `layer` at rank k with the configured method.
inline FactorPair compress_layer(const LinearLayer& layer, const ActivationBatch& acts, std::size_t k, Method method,
                                 const RidgeConfig& ridge)
{
    switch (method) {
    case Method::Svd: return svd_truncate(layer, k);
    case Method::SvdBc: return bias_compensate(layer, svd_truncate(layer, k), acts);
    case Method::Dalr: return dalr_compress(layer, acts, k, ridge);
    }
    throw UsageError("compress_layer: unknown method");
}

/// Splices two pairs into `net` at two distinct original layer indices.
inline Network splice_two(const Network& net, std::size_t layer_a, const FactorPair& pair_a, std::size_t layer_b,
                          const FactorPair& pair_b)
{
    if (layer_a > layer_b)
        return splice(splice(net, layer_a, pair_a), layer_b, pair_b);
    return splice(splice(net, layer_b, pair_b), layer_a, pair_a);
}

/// Greedy joint rank search over two layers.
///
/// Each iteration evaluates advancing layer A or layer B one schedule step,
/// both recompressed from the original weights, on the validation batch with
/// the other layer at its current rank. The better candidate is applied (ties
/// go to A). A candidate is admissible while its accuracy stays within
/// `max_drop` of the reference; the search stops when no admissible candidate
/// remains.
///
/// `train_inputs` is only needed with `reextract_activations`.
inline SearchTrace joint_rank_search(const Network& net, std::size_t layer_a, std::size_t layer_b,
                                     const LabeledBatch& val, const ActivationBatch& acts_a,
                                     const ActivationBatch& acts_b, const SearchConfig& cfg,
                                     const DenseMatrix* train_inputs = nullptr)
{
    if (layer_a == layer_b)
        throw UsageError("search: layers must be distinct");
    if (layer_a >= net.size() || layer_b >= net.size())
        throw RangeError("search: layer index outside network of " + std::to_string(net.size()) + " layers");
    if (!net.splices().empty())
        throw UsageError("search: network must be uncompressed");
    if (val.labels.empty())
        throw BatchError("search: validation batch is empty");
    if (!(cfg.max_drop >= 0.0))
        throw UsageError("search: max_drop must be non-negative");
    if (cfg.reextract_activations && train_inputs == nullptr)
        throw UsageError("search: activation re-extraction needs the training inputs");
    const LinearLayer& orig_a = net.layer(layer_a);
    const LinearLayer& orig_b = net.layer(layer_b);
    detail::validate_schedule(cfg.schedule_a, orig_a, "a");
    detail::validate_schedule(cfg.schedule_b, orig_b, "b");
    if (acts_a.dimension() != orig_a.inputs() || acts_b.dimension() != orig_b.inputs())
        throw DimensionError("search: activation batches do not match the layer inputs");

    constexpr std::size_t none = static_cast<std::size_t>(-1);
    // Key: (which layer, schedule index, other layer's schedule index or `none`).
    std::map<std::tuple<int, std::size_t, std::size_t>, FactorPair> cache;

    std::function<const FactorPair&(SearchLayer, std::size_t, std::size_t)> pair_for =
        [&](SearchLayer which, std::size_t idx, std::size_t other_idx) -> const FactorPair& {
        const bool is_a = which == SearchLayer::A;
        const std::size_t other_key = cfg.reextract_activations ? other_idx : none;
        const auto key = std::make_tuple(is_a ? 0 : 1, idx, other_key);
        if (auto it = cache.find(key); it != cache.end())
            return it->second;
        const LinearLayer& layer = is_a ? orig_a : orig_b;
        const std::size_t rank = is_a ? cfg.schedule_a[idx] : cfg.schedule_b[idx];
        FactorPair pair;
        if (!cfg.reextract_activations || other_idx == none) {
            pair = compress_layer(layer, is_a ? acts_a : acts_b, rank, cfg.method, cfg.ridge);
        } else {
            // Activations from the network with only the other layer compressed.
            const std::size_t self = is_a ? layer_a : layer_b;
            const std::size_t other = is_a ? layer_b : layer_a;
            const FactorPair& other_pair = pair_for(is_a ? SearchLayer::B : SearchLayer::A, other_idx, none);
            const Network partial = splice(net, other, other_pair);
            const std::size_t pos = other < self ? self + 1 : self;
            pair = compress_layer(layer, extract_activations(partial, *train_inputs, pos), rank, cfg.method,
                                  cfg.ridge);
        }
        return cache.emplace(key, std::move(pair)).first->second;
    };

    auto evaluate = [&](std::size_t ia, std::size_t ib) {
        const FactorPair pa = pair_for(SearchLayer::A, ia, ib);
        const FactorPair pb = pair_for(SearchLayer::B, ib, ia);
        return accuracy(splice_two(net, layer_a, pa, layer_b, pb), val);
    };

    SearchTrace trace;
    trace.layer_a = layer_a;
    trace.layer_b = layer_b;
    trace.method = cfg.method;
    trace.max_drop = cfg.max_drop;
    trace.baseline_accuracy = accuracy(net, val);

    std::size_t ia = 0;
    std::size_t ib = 0;
    trace.initial_rank_a = cfg.schedule_a[0];
    trace.initial_rank_b = cfg.schedule_b[0];
    double current = evaluate(ia, ib);
    trace.initial_accuracy = current;

    for (std::size_t step = 1;; ++step) {
        const double reference = cfg.relative_to_previous ? current : trace.baseline_accuracy;
        const double floor = reference - cfg.max_drop;
        const bool has_a = ia + 1 < cfg.schedule_a.size();
        const bool has_b = ib + 1 < cfg.schedule_b.size();
        if (!has_a && !has_b) {
            trace.stop_reason = "schedules exhausted";
            break;
        }
        const double acc_a = has_a ? evaluate(ia + 1, ib) : -1.0;
        const double acc_b = has_b ? evaluate(ia, ib + 1) : -1.0;
        const bool ok_a = has_a && !(acc_a < floor);
        const bool ok_b = has_b && !(acc_b < floor);
        if (!ok_a && !ok_b) {
            trace.stop_reason = "accuracy drop exceeded";
            break;
        }
        SearchStep s;
        s.step = step;
        s.candidate_a = acc_a;
        s.candidate_b = acc_b;
        if (ok_a && (!ok_b || acc_a >= acc_b)) {
            ++ia;
            s.layer = SearchLayer::A;
            current = acc_a;
        } else {
            ++ib;
            s.layer = SearchLayer::B;
            current = acc_b;
        }
        s.rank_a = cfg.schedule_a[ia];
        s.rank_b = cfg.schedule_b[ib];
        s.accuracy = current;
        trace.steps.push_back(s);
    }

    trace.final_rank_a = cfg.schedule_a[ia];
    trace.final_rank_b = cfg.schedule_b[ib];
    trace.final_accuracy = current;
    trace.lambda_a = pair_for(SearchLayer::A, ia, ib).lambda;
    trace.lambda_b = pair_for(SearchLayer::B, ib, ia).lambda;
    trace.fraction_a = parameter_fraction(orig_a.outputs(), orig_a.inputs(), trace.final_rank_a);
    trace.fraction_b = parameter_fraction(orig_b.outputs(), orig_b.inputs(), trace.final_rank_b);
    trace.reduction_a = 1.0 - trace.fraction_a;
    trace.reduction_b = 1.0 - trace.fraction_b;
    const double wa = static_cast<double>(orig_a.weights().size());
    const double wb = static_cast<double>(orig_b.weights().size());
    trace.reduction_total = 1.0 - (trace.fraction_a * wa + trace.fraction_b * wb) / (wa + wb);
    return trace;
}

/// Network with both layers compressed at the given ranks, as the search would build it.
inline Network compress_two(const Network& net, std::size_t layer_a, std::size_t rank_a, std::size_t layer_b,
                            std::size_t rank_b, const ActivationBatch& acts_a, const ActivationBatch& acts_b,
                            Method method, const RidgeConfig& ridge)
{
    return splice_two(net, layer_a, compress_layer(net.layer(layer_a), acts_a, rank_a, method, ridge), layer_b,
                      compress_layer(net.layer(layer_b), acts_b, rank_b, method, ridge));
}

} // namespace dalr
