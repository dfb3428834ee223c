#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "dalr/network.hpp"
#include "support/random.hpp"

namespace dalr::testing {

/// Minibatch SGD with momentum on softmax cross-entropy.
struct TrainConfig {
    std::size_t epochs = 30;
    std::size_t batch = 32;
    double learning_rate = 0.05;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    std::size_t first_trainable = 0; ///< Layers below this index stay frozen.
};

inline Network he_initialized(const std::vector<std::size_t>& dims, Rng& rng)
{
    std::vector<LinearLayer> layers;
    std::vector<Activation> acts;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        const double scale = std::sqrt(2.0 / static_cast<double>(dims[i]));
        layers.emplace_back(random_matrix(dims[i + 1], dims[i], rng, scale), std::vector<double>(dims[i + 1], 0.0));
        acts.push_back(i + 2 < dims.size() ? Activation::Relu : Activation::None);
    }
    return Network(std::move(layers), std::move(acts));
}

/// Column-wise softmax minus the one-hot labels, divided by the batch size.
inline DenseMatrix softmax_gradient(const DenseMatrix& logits, const std::vector<std::size_t>& labels)
{
    DenseMatrix g = logits;
    const double inv = 1.0 / static_cast<double>(logits.cols());
    for (std::size_t j = 0; j < g.cols(); ++j) {
        double top = g(0, j);
        for (std::size_t i = 1; i < g.rows(); ++i)
            top = std::max(top, g(i, j));
        double z = 0.0;
        for (std::size_t i = 0; i < g.rows(); ++i) {
            g(i, j) = std::exp(g(i, j) - top);
            z += g(i, j);
        }
        for (std::size_t i = 0; i < g.rows(); ++i)
            g(i, j) = (g(i, j) / z - (i == labels[j] ? 1.0 : 0.0)) * inv;
    }
    return g;
}

inline Network train(const Network& start, const DenseMatrix& inputs, const std::vector<std::size_t>& labels,
                     const TrainConfig& cfg, Rng& rng)
{
    const std::size_t depth = start.size();
    std::vector<DenseMatrix> w, vw;
    std::vector<std::vector<double>> b, vb;
    for (const auto& l : start.layers()) {
        w.push_back(l.weights());
        b.push_back(l.bias());
        vw.emplace_back(l.outputs(), l.inputs());
        vb.emplace_back(l.outputs(), 0.0);
    }

    std::vector<std::size_t> order(inputs.cols());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start_col = 0; start_col < order.size(); start_col += cfg.batch) {
            const std::size_t end = std::min(order.size(), start_col + cfg.batch);
            const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start_col),
                                               order.begin() + static_cast<std::ptrdiff_t>(end));
            std::vector<std::size_t> y;
            for (std::size_t j : idx)
                y.push_back(labels[j]);

            std::vector<DenseMatrix> h{select_cols(inputs, idx)};
            for (std::size_t l = 0; l < depth; ++l) {
                DenseMatrix next = add_column_broadcast(matmul(w[l], h.back()), b[l]);
                if (start.activations()[l] == Activation::Relu)
                    relu_in_place(next);
                h.push_back(std::move(next));
            }

            DenseMatrix g = softmax_gradient(h.back(), y);
            for (std::size_t l = depth; l-- > cfg.first_trainable;) {
                const DenseMatrix dw = matmul_nt(g, h[l]);
                DenseMatrix g_prev;
                if (l > cfg.first_trainable) {
                    g_prev = matmul_tn(w[l], g);
                    if (start.activations()[l - 1] == Activation::Relu)
                        for (std::size_t i = 0; i < g_prev.size(); ++i)
                            if (h[l].data()[i] <= 0.0)
                                g_prev.data()[i] = 0.0;
                }
                for (std::size_t i = 0; i < dw.size(); ++i) {
                    auto& v = vw[l].data()[i];
                    v = cfg.momentum * v - cfg.learning_rate * (dw.data()[i] + cfg.weight_decay * w[l].data()[i]);
                    w[l].data()[i] += v;
                }
                for (std::size_t i = 0; i < g.rows(); ++i) {
                    double s = 0.0;
                    for (double v : g.row_span(i))
                        s += v;
                    vb[l][i] = cfg.momentum * vb[l][i] - cfg.learning_rate * s;
                    b[l][i] += vb[l][i];
                }
                g = std::move(g_prev);
            }
        }
    }

    std::vector<LinearLayer> layers;
    for (std::size_t l = 0; l < depth; ++l)
        layers.emplace_back(std::move(w[l]), std::move(b[l]));
    return Network(std::move(layers), start.activations());
}

} // namespace dalr::testing
