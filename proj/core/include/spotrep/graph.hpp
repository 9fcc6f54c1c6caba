#pragma once

#include "spotrep/data.hpp"
#include "spotrep/matrix.hpp"
#include "spotrep/rng.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace spotrep {

/// Spatial nearest-neighbor graph over one or more slices. The adjacency
/// is symmetric, unweighted and self-loop-free, with no edges between
/// spots of different slices; `normalized` caches the GCN operator
/// D^(-1/2) (A + I) D^(-1/2).
struct SnnGraph {
    SparseAdjacency adjacency;
    std::vector<std::size_t> sliceMembership;
    SparseAdjacency normalized;

    std::size_t spotCount() const noexcept { return adjacency.nodeCount(); }
};

/// Connects each spot to its k nearest neighbors by Euclidean distance and
/// symmetrizes the edge set by union. Distance ties break toward the lower
/// spot index.
SnnGraph buildSnnGraph(const DenseMatrix& coords, std::size_t k = 6);

/// Per-slice SNN graphs assembled block-diagonally with global indices.
SnnGraph buildMultiSliceGraph(const MultiSliceDataset& dataset, std::size_t k = 6);

/// The symmetric GCN operator with self-loops; isolated nodes get weight 1.
SparseAdjacency gcnNormalize(const SparseAdjacency& adjacency);

enum class MaskMode { Column, Entry };

/// One stochastic augmentation of (features, adjacency). Column-mode
/// feature masking zeroes whole gene columns; edge masking removes each
/// undirected edge with the given probability. Re-deriving the GCN
/// operator for the masked adjacency is the caller's duty.
struct AugmentedView {
    DenseMatrix maskedFeatures;
    SparseAdjacency maskedAdjacency;
    double featureMaskRate = 0.0;
    double edgeMaskRate = 0.0;
    std::string rngStream;
};

AugmentedView augment(const SnnGraph& graph, const DenseMatrix& features,
                      double featureMaskRate, double edgeMaskRate, SeededRng& rng,
                      MaskMode mode = MaskMode::Column);

} // namespace spotrep
