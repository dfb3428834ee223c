#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "dalr/layer.hpp"
#include "dalr/matrix.hpp"

namespace dalr::testing {

using Rng = std::mt19937_64;

inline DenseMatrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double stddev = 1.0)
{
    std::normal_distribution<double> dist(0.0, stddev);
    DenseMatrix m(rows, cols);
    for (auto& v : m.data())
        v = dist(rng);
    return m;
}

inline DenseMatrix random_uniform(std::size_t rows, std::size_t cols, Rng& rng, double lo, double hi)
{
    std::uniform_real_distribution<double> dist(lo, hi);
    DenseMatrix m(rows, cols);
    for (auto& v : m.data())
        v = dist(rng);
    return m;
}

/// Post-ReLU style inputs: max(0, N(shift, 1)).
inline DenseMatrix random_relu(std::size_t rows, std::size_t cols, Rng& rng, double shift = 0.3)
{
    std::normal_distribution<double> dist(shift, 1.0);
    DenseMatrix m(rows, cols);
    for (auto& v : m.data())
        v = std::max(0.0, dist(rng));
    return m;
}

inline std::vector<double> random_vector(std::size_t n, Rng& rng, double stddev = 1.0)
{
    std::normal_distribution<double> dist(0.0, stddev);
    std::vector<double> v(n);
    for (auto& x : v)
        x = dist(rng);
    return v;
}

inline LinearLayer random_layer(std::size_t m, std::size_t n, Rng& rng)
{
    return LinearLayer(random_matrix(m, n, rng), random_vector(m, rng));
}

inline std::size_t uniform_index(Rng& rng, std::size_t lo, std::size_t hi)
{
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

} // namespace dalr::testing
