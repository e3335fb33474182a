#include "drag/graph.hpp"

#include <algorithm>

#include "drag/error.hpp"

namespace drag {

KnnGraph knn_graph(std::span<const double> data, std::int64_t d, std::int64_t p, std::int64_t k,
                   KnnGraph::Space space) {
    if (k < 1 || k >= p)
        fail("KTooLarge", "k=" + std::to_string(k) + " with P=" + std::to_string(p) +
                              " points (need 1 <= k < P)");

    KnnGraph g;
    g.k = k;
    g.points = p;
    g.space = space;
    g.neighbors.resize(static_cast<std::size_t>(p * k));

    std::vector<std::pair<double, std::int64_t>> dist(static_cast<std::size_t>(p - 1));
    for (std::int64_t i = 0; i < p; ++i) {
        std::size_t m = 0;
        for (std::int64_t j = 0; j < p; ++j) {
            if (j == i) continue;
            double d2 = 0;
            for (std::int64_t c = 0; c < d; ++c) {
                double diff = data[static_cast<std::size_t>(c * p + i)] - data[static_cast<std::size_t>(c * p + j)];
                d2 += diff * diff;
            }
            dist[m++] = {d2, j};
        }
        auto kth = dist.begin() + static_cast<std::ptrdiff_t>(k);
        std::partial_sort(dist.begin(), kth, dist.end());
        for (std::int64_t j = 0; j < k; ++j)
            g.neighbors[static_cast<std::size_t>(i * k + j)] = dist[static_cast<std::size_t>(j)].second;
    }
    return g;
}

KnnGraph knn_graph(const Tensor& features, std::int64_t k, KnnGraph::Space space) {
    if (features.rank() != 2)
        fail("ShapeMismatch", "knn expects (D,P), got " + shape_str(features.shape()));
    return knn_graph(features.values(), features.dim(0), features.dim(1), k, space);
}

Tensor edge_features(const Tensor& gamma, const KnnGraph& graph) {
    if (gamma.rank() != 2 || gamma.dim(1) != graph.points)
        fail("ShapeMismatch", "edge_features: features " + shape_str(gamma.shape()) +
                                  " vs graph over " + std::to_string(graph.points) + " points");
    const std::int64_t c = gamma.dim(0), p = graph.points, k = graph.k;

    std::vector<std::int64_t> flat(graph.neighbors.begin(), graph.neighbors.end());
    Tensor nbr = reshape(gather(gamma, std::move(flat), 1), {c, p, k});
    Tensor ctr = broadcast_to(reshape(gamma, {c, p, 1}), {c, p, k});
    return concat({ctr, sub(nbr, ctr)}, 0);
}

EdgeConv EdgeConv::create(ParamRegistry& reg, const std::string& name, std::int64_t c_in,
                          std::int64_t c_out, std::uint64_t model_seed) {
    EdgeConv ec;
    ec.lin = Linear::create(reg, name + ".lin", 2 * c_in, c_out, /*with_bias=*/false, model_seed);
    ec.bn = BatchNorm::create(reg, name + ".bn", c_out);
    return ec;
}

Tensor EdgeConv::apply(const Tensor& gamma, const KnnGraph& graph, bool train,
                       bool update_stats) {
    const std::int64_t c_in = gamma.dim(0), p = graph.points, k = graph.k;
    const std::int64_t c_out = lin.weight.dim(0);
    Tensor ef = reshape(edge_features(gamma, graph), {2 * c_in, p * k});
    Tensor h = leaky_relu(bn.apply(lin.apply(ef), train, update_stats), slope);
    return max_reduce(reshape(h, {c_out, p, k}), 2);
}

}  // namespace drag
