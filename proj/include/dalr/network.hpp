#pragma once

#include <algorithm>
#include <string>
#include <string_view>
#include <vector>

#include "dalr/compression.hpp"
#include "dalr/layer.hpp"

namespace dalr {

enum class Activation { Relu, None };

inline const char* to_string(Activation a) { return a == Activation::Relu ? "relu" : "none"; }

inline Activation parse_activation(std::string_view s)
{
    if (s == "relu")
        return Activation::Relu;
    if (s == "none")
        return Activation::None;
    throw UsageError("unknown activation '" + std::string(s) + "'");
}

/// Provenance of a layer that was replaced by two factor layers.
struct SpliceRecord {
    std::size_t position = 0;       ///< Index of the first of the two new layers.
    std::size_t original_index = 0; ///< Index of the replaced layer in the unspliced network.
    Method method = Method::Svd;
    std::size_t rank = 0;
    double lambda = 0.0;

    friend bool operator==(const SpliceRecord&, const SpliceRecord&) = default;
};

/// Feed-forward stack of linear layers. `activations[i]` follows layer i; the last is always None.
class Network {
public:
    Network() = default;

    Network(std::vector<LinearLayer> layers, std::vector<Activation> activations, std::vector<SpliceRecord> splices = {})
        : layers_(std::move(layers)), activations_(std::move(activations)), splices_(std::move(splices))
    {
        if (layers_.empty())
            throw DimensionError("Network: no layers");
        if (activations_.size() != layers_.size())
            throw DimensionError("Network: " + std::to_string(activations_.size()) + " activations for "
                                 + std::to_string(layers_.size()) + " layers");
        if (activations_.back() != Activation::None)
            throw DimensionError("Network: final layer must be linear");
        for (std::size_t i = 0; i + 1 < layers_.size(); ++i)
            if (layers_[i].outputs() != layers_[i + 1].inputs())
                throw DimensionError("Network: layer " + std::to_string(i) + " outputs "
                                     + std::to_string(layers_[i].outputs()) + " but layer " + std::to_string(i + 1)
                                     + " expects " + std::to_string(layers_[i + 1].inputs()));
        for (const auto& s : splices_)
            if (s.position + 1 >= layers_.size())
                throw RangeError("Network: splice record at position " + std::to_string(s.position)
                                 + " outside the layer stack");
    }

    const std::vector<LinearLayer>& layers() const noexcept { return layers_; }
    const std::vector<Activation>& activations() const noexcept { return activations_; }
    const std::vector<SpliceRecord>& splices() const noexcept { return splices_; }
    const LinearLayer& layer(std::size_t i) const { return layers_.at(i); }
    std::size_t size() const noexcept { return layers_.size(); }
    std::size_t input_dimension() const noexcept { return layers_.front().inputs(); }
    std::size_t output_dimension() const noexcept { return layers_.back().outputs(); }

    std::size_t parameter_count() const noexcept
    {
        std::size_t c = 0;
        for (const auto& l : layers_)
            c += l.parameter_count();
        return c;
    }

    std::size_t weight_count() const noexcept
    {
        std::size_t c = 0;
        for (const auto& l : layers_)
            c += l.weights().size();
        return c;
    }

    friend bool operator==(const Network&, const Network&) = default;

private:
    std::vector<LinearLayer> layers_;
    std::vector<Activation> activations_;
    std::vector<SpliceRecord> splices_;
};

/// Inputs (n×p) with one class label per column.
struct LabeledBatch {
    DenseMatrix inputs;
    std::vector<std::size_t> labels;

    LabeledBatch() = default;
    LabeledBatch(DenseMatrix in, std::vector<std::size_t> lab) : inputs(std::move(in)), labels(std::move(lab))
    {
        if (labels.size() != inputs.cols())
            throw DimensionError("LabeledBatch: " + std::to_string(labels.size()) + " labels for "
                                 + std::to_string(inputs.cols()) + " samples");
    }
};

inline void relu_in_place(DenseMatrix& m)
{
    for (auto& v : m.data())
        v = std::max(0.0, v);
}

/// Inputs to every layer (index 0 is `inputs` itself) followed by the final output.
inline std::vector<DenseMatrix> forward_capture(const Network& net, const DenseMatrix& inputs)
{
    if (inputs.rows() != net.input_dimension())
        throw DimensionError("forward: input " + inputs.shape() + " does not match network input dimension "
                             + std::to_string(net.input_dimension()));
    std::vector<DenseMatrix> trace;
    trace.reserve(net.size() + 1);
    trace.push_back(inputs);
    for (std::size_t i = 0; i < net.size(); ++i) {
        DenseMatrix h = net.layer(i).apply(trace.back());
        if (net.activations()[i] == Activation::Relu)
            relu_in_place(h);
        trace.push_back(std::move(h));
    }
    return trace;
}

/// Final (pre-softmax) outputs.
inline DenseMatrix forward(const Network& net, const DenseMatrix& inputs)
{
    if (inputs.rows() != net.input_dimension())
        throw DimensionError("forward: input " + inputs.shape() + " does not match network input dimension "
                             + std::to_string(net.input_dimension()));
    DenseMatrix h = inputs;
    for (std::size_t i = 0; i < net.size(); ++i) {
        h = net.layer(i).apply(h);
        if (net.activations()[i] == Activation::Relu)
            relu_in_place(h);
    }
    return h;
}

/// The batch feeding layer `layer_index` when `inputs` enter the network.
inline ActivationBatch extract_activations(const Network& net, const DenseMatrix& inputs, std::size_t layer_index)
{
    if (layer_index >= net.size())
        throw RangeError("extract_activations: layer " + std::to_string(layer_index) + " outside network of "
                         + std::to_string(net.size()) + " layers");
    if (inputs.rows() != net.input_dimension())
        throw DimensionError("extract_activations: input " + inputs.shape() + " does not match network input "
                             + std::to_string(net.input_dimension()));
    DenseMatrix h = inputs;
    for (std::size_t i = 0; i < layer_index; ++i) {
        h = net.layer(i).apply(h);
        if (net.activations()[i] == Activation::Relu)
            relu_in_place(h);
    }
    const bool post_relu = layer_index > 0 && net.activations()[layer_index - 1] == Activation::Relu;
    return ActivationBatch(std::move(h), post_relu);
}

/// Replaces layer `layer_index` by two layers: bᵀ (k×n, zero bias, no activation) then a (m×k, new bias).
inline Network splice(const Network& net, std::size_t layer_index, const FactorPair& pair)
{
    if (layer_index >= net.size())
        throw RangeError("splice: layer " + std::to_string(layer_index) + " outside network of "
                         + std::to_string(net.size()) + " layers");
    const auto& target = net.layer(layer_index);
    if (pair.outputs() != target.outputs() || pair.inputs() != target.inputs() || pair.a.cols() != pair.b.cols()
        || pair.new_bias.size() != target.outputs())
        throw DimensionError("splice: factor pair a " + pair.a.shape() + ", b " + pair.b.shape()
                             + " does not match layer " + target.weights().shape());

    std::size_t shift = 0;
    for (const auto& s : net.splices()) {
        if (layer_index == s.position || layer_index == s.position + 1)
            throw RangeError("splice: layer " + std::to_string(layer_index) + " is already a factor layer");
        if (s.position < layer_index)
            ++shift;
    }

    std::vector<LinearLayer> layers;
    std::vector<Activation> acts;
    layers.reserve(net.size() + 1);
    for (std::size_t i = 0; i < net.size(); ++i) {
        if (i != layer_index) {
            layers.push_back(net.layer(i));
            acts.push_back(net.activations()[i]);
            continue;
        }
        layers.emplace_back(transpose(pair.b), std::vector<double>(pair.b.cols(), 0.0));
        acts.push_back(Activation::None);
        layers.emplace_back(pair.a, pair.new_bias);
        acts.push_back(net.activations()[i]);
    }

    std::vector<SpliceRecord> records;
    for (auto s : net.splices()) {
        if (s.position > layer_index)
            ++s.position;
        records.push_back(s);
    }
    records.push_back(SpliceRecord{layer_index, layer_index - shift, pair.method, pair.rank, pair.lambda});
    std::sort(records.begin(), records.end(),
              [](const SpliceRecord& x, const SpliceRecord& y) { return x.position < y.position; });
    return Network(std::move(layers), std::move(acts), std::move(records));
}

/// Replaces layer `layer_index` by its pruned version and drops the matching input columns of the next layer.
inline Network apply_pruning(const Network& net, std::size_t layer_index, const PruneResult& pruned)
{
    if (layer_index + 1 >= net.size())
        throw RangeError("apply_pruning: layer " + std::to_string(layer_index)
                         + " has no successor; output units of the final layer cannot be pruned");
    std::vector<LinearLayer> layers = net.layers();
    layers[layer_index] = pruned.layer;
    const auto& next = net.layer(layer_index + 1);
    layers[layer_index + 1] = LinearLayer(select_cols(next.weights(), pruned.kept), next.bias());
    return Network(std::move(layers), net.activations(), net.splices());
}

/// Index of the largest entry in column j; ties to the lowest row.
inline std::size_t argmax_column(const DenseMatrix& m, std::size_t j)
{
    std::size_t best = 0;
    for (std::size_t i = 1; i < m.rows(); ++i)
        if (m(i, j) > m(best, j))
            best = i;
    return best;
}

/// Fraction of samples whose argmax output equals the label.
inline double accuracy(const Network& net, const LabeledBatch& batch)
{
    if (batch.labels.empty())
        throw BatchError("accuracy: empty batch");
    for (std::size_t lab : batch.labels)
        if (lab >= net.output_dimension())
            throw RangeError("accuracy: label " + std::to_string(lab) + " outside [0, "
                             + std::to_string(net.output_dimension()) + ")");
    const DenseMatrix out = forward(net, batch.inputs);
    std::size_t hits = 0;
    for (std::size_t j = 0; j < out.cols(); ++j)
        if (argmax_column(out, j) == batch.labels[j])
            ++hits;
    return static_cast<double>(hits) / static_cast<double>(batch.labels.size());
}

} // namespace dalr
