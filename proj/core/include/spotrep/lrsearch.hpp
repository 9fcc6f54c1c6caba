#pragma once

#include "spotrep/metrics.hpp"
#include "spotrep/pipeline.hpp"

#include <span>
#include <vector>

namespace spotrep {

/// The fixed learning-rate grid used when none is configured.
inline constexpr double kLearningRateGrid[] = {0.00001, 0.00005, 0.0001, 0.0005, 0.001};

struct LrSearchEntry {
    double learningRate = 0.0;
    double silhouette = 0.0;
    Partition partition; // k-means clusters of that run's embeddings
};

struct LrSearchResult {
    double bestLearningRate = 0.0;
    std::vector<LrSearchEntry> entries; // grid order
};

/// Trains once per grid value with the base config's seed, clusters the
/// embeddings at kBase, and selects the learning rate with the highest
/// silhouette score (ties go to the smaller rate, i.e. the earlier grid
/// entry). Up to `threads` trainings run concurrently; results are
/// independent of the thread count.
LrSearchResult lrSearchBySilhouette(const MultiSliceDataset& dataset, const SnnGraph& graph,
                                    const TrainConfig& base, std::span<const double> grid,
                                    std::size_t kBase, std::size_t threads = 1);

} // namespace spotrep
