#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "drag/nn.hpp"
#include "drag/tensor.hpp"

namespace drag {

/// Exact k-nearest-neighbor graph. neighbors is row-major (P, k), each
/// row sorted by (distance, index) ascending; self-loops excluded.
struct KnnGraph {
    enum class Space { coordinates, features };

    std::int64_t k = 0;
    std::int64_t points = 0;
    std::vector<std::int64_t> neighbors;
    Space space = Space::coordinates;

    std::int64_t at(std::int64_t p, std::int64_t j) const { return neighbors[static_cast<std::size_t>(p * k + j)]; }
};

/// Brute-force Euclidean kNN over the columns of a (D, P) value matrix.
/// Ties break to the lowest index. Throws Error("KTooLarge") if k >= P.
KnnGraph knn_graph(std::span<const double> data, std::int64_t d, std::int64_t p, std::int64_t k,
                   KnnGraph::Space space);
KnnGraph knn_graph(const Tensor& features, std::int64_t k, KnnGraph::Space space);

/// DGCNN edge features: (2C, P, k) where channels [0,C) carry the center
/// point x_i and [C,2C) the offset x_j - x_i.
Tensor edge_features(const Tensor& gamma, const KnnGraph& graph);

/// Shared-MLP edge convolution: linear -> batchnorm -> leaky_relu(slope)
/// on every edge feature, then max over the k neighbors.
struct EdgeConv {
    Linear lin;  // (C_out, 2*C_in), no bias (batchnorm follows)
    BatchNorm bn;
    double slope = 0.2;

    static EdgeConv create(ParamRegistry& reg, const std::string& name, std::int64_t c_in,
                           std::int64_t c_out, std::uint64_t model_seed);
    Tensor apply(const Tensor& gamma, const KnnGraph& graph, bool train, bool update_stats);
};

}  // namespace drag
