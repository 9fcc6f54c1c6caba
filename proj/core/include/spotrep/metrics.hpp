#pragma once

#include "spotrep/matrix.hpp"
#include "spotrep/rng.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace spotrep {

/// Per-spot cluster identifiers. Metrics intern the ids internally, so any
/// nonnegative alphabet works and relabeling cannot change a score.
using Partition = std::vector<std::size_t>;

/// Maps an arbitrary string alphabet to dense ids by first appearance.
Partition internLabels(std::span<const std::string> labels);

/// K-means on embeddings: best of `restarts` seeded runs, Lloyd tolerance
/// 1e-6, at most 300 iterations.
Partition kMeansPartition(const DenseMatrix& embeddings, std::size_t k, const SeededRng& rng,
                          std::size_t restarts = 10);

/// Pair-counting adjusted Rand index.
double adjustedRandIndex(const Partition& truth, const Partition& pred);

/// Mutual information normalized by the arithmetic mean of the entropies;
/// two single-cluster partitions score 1.
double normalizedMutualInfo(const Partition& truth, const Partition& pred);

/// Best label bijection accuracy, solved by optimal assignment on the
/// (square-padded) contingency matrix.
double clusteringAccuracy(const Partition& truth, const Partition& pred);

/// Mean silhouette width with Euclidean distances; singleton-cluster
/// points score 0, as do 0/0 cases from coincident points.
double silhouetteScore(const DenseMatrix& points, const Partition& labels);

/// Batch-mixing score: per domain, 1 - mean |silhouette of slice ids
/// within the domain|, averaged over domains spanning at least two slices.
/// 1 means slices are indistinguishable inside every domain.
struct SilhouetteBatchResult {
    double score = 0.0;
    std::vector<std::size_t> skippedDomains; // present in only one slice
};
SilhouetteBatchResult silhouetteBatch(const DenseMatrix& points, const Partition& domains,
                                      std::span<const std::size_t> sliceMembership);

/// Nearest reference row per query row under cosine distance; ties break
/// toward the lower reference index.
std::vector<std::size_t> nearestReferenceByCosine(const DenseMatrix& reference,
                                                  const DenseMatrix& query);

/// ARI between the query truth and labels transferred from the nearest
/// reference spot by cosine distance.
double labelTransferAri(const DenseMatrix& refEmbeddings, const Partition& refLabels,
                        const DenseMatrix& queryEmbeddings, const Partition& queryTruth);

/// Evaluation scores serialized to metrics.json.
struct MetricsReport {
    std::optional<double> ari;
    std::optional<double> nmi;
    std::optional<double> ca;
    std::optional<double> silhouette;
    std::optional<double> silhouetteBatch;
    std::optional<double> ltari;
    std::size_t k = 0;
    std::uint64_t seed = 0;
};

} // namespace spotrep
