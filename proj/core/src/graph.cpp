#include "spotrep/graph.hpp"

#include "spotrep/errors.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <utility>

namespace spotrep {

namespace {

/// Undirected pair set -> both directed edges, weight 1, canonical order.
SparseAdjacency pairsToAdjacency(std::size_t nodes,
                                 const std::set<std::pair<std::size_t, std::size_t>>& pairs) {
    std::vector<SparseEdge> edges;
    edges.reserve(pairs.size() * 2);
    for (const auto& [a, b] : pairs) {
        edges.push_back({a, b, 1.0});
        edges.push_back({b, a, 1.0});
    }
    return SparseAdjacency(nodes, std::move(edges), /*symmetric=*/true);
}

std::set<std::pair<std::size_t, std::size_t>> knnPairs(const DenseMatrix& coords, std::size_t k,
                                                       std::size_t offset) {
    const std::size_t n = coords.rows();
    std::set<std::pair<std::size_t, std::size_t>> pairs;
    std::vector<std::pair<double, std::size_t>> dist;
    dist.reserve(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        dist.clear();
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            double d = 0.0;
            auto a = coords.row(i);
            auto b = coords.row(j);
            for (std::size_t c = 0; c < a.size(); ++c) {
                const double diff = a[c] - b[c];
                d += diff * diff;
            }
            dist.emplace_back(d, j);
        }
        // ties break toward the lower spot index
        std::nth_element(dist.begin(), dist.begin() + (k - 1), dist.end());
        std::sort(dist.begin(), dist.begin() + k);
        for (std::size_t s = 0; s < k; ++s) {
            const std::size_t j = dist[s].second;
            pairs.emplace(std::min(i, j) + offset, std::max(i, j) + offset);
        }
    }
    return pairs;
}

} // namespace

SnnGraph buildSnnGraph(const DenseMatrix& coords, std::size_t k) {
    const std::size_t n = coords.rows();
    if (k < 1) throw ParamError("buildSnnGraph: k must be positive");
    if (n < k + 1)
        throw ParamError("buildSnnGraph: need at least k+1=" + std::to_string(k + 1) +
                         " spots, got " + std::to_string(n));
    SnnGraph graph;
    graph.adjacency = pairsToAdjacency(n, knnPairs(coords, k, 0));
    graph.sliceMembership.assign(n, 0);
    graph.normalized = gcnNormalize(graph.adjacency);
    return graph;
}

SnnGraph buildMultiSliceGraph(const MultiSliceDataset& dataset, std::size_t k) {
    if (dataset.slices.empty()) throw ParamError("buildMultiSliceGraph: empty dataset");
    std::set<std::pair<std::size_t, std::size_t>> pairs;
    std::size_t offset = 0;
    for (const auto& slice : dataset.slices) {
        if (slice.spotCount() < k + 1)
            throw ParamError("buildMultiSliceGraph: slice '" + slice.sliceId +
                             "' has fewer than k+1 spots");
        auto local = knnPairs(slice.coords, k, offset);
        pairs.insert(local.begin(), local.end());
        offset += slice.spotCount();
    }
    SnnGraph graph;
    graph.adjacency = pairsToAdjacency(offset, pairs);
    graph.sliceMembership = dataset.sliceMembership();
    graph.normalized = gcnNormalize(graph.adjacency);
    return graph;
}

SparseAdjacency gcnNormalize(const SparseAdjacency& adjacency) {
    if (!adjacency.markedSymmetric() && !adjacency.isSymmetric())
        throw ParamError("gcnNormalize: adjacency must be symmetric");
    const std::size_t n = adjacency.nodeCount();
    std::vector<double> degree(n, 1.0); // self-loop contributes 1
    for (const auto& e : adjacency.edges()) degree[e.src] += e.weight;

    std::vector<SparseEdge> edges;
    edges.reserve(adjacency.edgeCount() + n);
    for (const auto& e : adjacency.edges())
        edges.push_back({e.src, e.dst, e.weight / std::sqrt(degree[e.src] * degree[e.dst])});
    for (std::size_t i = 0; i < n; ++i) edges.push_back({i, i, 1.0 / degree[i]});
    return SparseAdjacency(n, std::move(edges), /*symmetric=*/true);
}

AugmentedView augment(const SnnGraph& graph, const DenseMatrix& features,
                      double featureMaskRate, double edgeMaskRate, SeededRng& rng,
                      MaskMode mode) {
    if (featureMaskRate < 0.0 || featureMaskRate > 1.0 || edgeMaskRate < 0.0 || edgeMaskRate > 1.0)
        throw ParamError("augment: mask rates must lie in [0,1]");
    if (features.rows() != graph.spotCount())
        throw ShapeError("augment: " + std::to_string(features.rows()) + " feature rows vs " +
                         std::to_string(graph.spotCount()) + " spots");

    AugmentedView view;
    view.featureMaskRate = featureMaskRate;
    view.edgeMaskRate = edgeMaskRate;
    view.rngStream = rng.stream();

    // Feature masking first, then edge masking; the draw order is part of
    // the reproducibility contract.
    view.maskedFeatures = features;
    if (mode == MaskMode::Column) {
        for (std::size_t g = 0; g < features.cols(); ++g) {
            if (rng.nextUniform01() < featureMaskRate)
                for (std::size_t r = 0; r < features.rows(); ++r) view.maskedFeatures(r, g) = 0.0;
        }
    } else {
        for (double& v : view.maskedFeatures.values())
            if (rng.nextUniform01() < featureMaskRate) v = 0.0;
    }

    std::set<std::pair<std::size_t, std::size_t>> kept;
    for (const auto& e : graph.adjacency.edges()) {
        if (e.src >= e.dst) continue; // visit each undirected edge once
        if (rng.nextUniform01() >= edgeMaskRate) kept.emplace(e.src, e.dst);
    }
    view.maskedAdjacency = pairsToAdjacency(graph.spotCount(), kept);
    return view;
}

} // namespace spotrep
