#pragma once

#include "spotrep/matrix.hpp"
#include "spotrep/rng.hpp"

#include <cstddef>
#include <vector>

namespace spotrep {

struct KMeansOptions {
    std::size_t maxIterations = 100;
    double relTolerance = 1e-6; // relative change of the objective
};

struct KMeansResult {
    DenseMatrix centroids; // k x dim
    std::vector<std::size_t> assignment;
    double objective = 0.0;              // summed squared distances
    std::vector<double> objectiveTrace;  // one entry per Lloyd iteration
};

/// Lloyd's algorithm with k-means++ seeding. Assignment ties and seeding
/// ties break toward the lower index. A cluster left empty after an update
/// is re-seeded at the point farthest from its assigned centroid.
KMeansResult kMeansLloyd(const DenseMatrix& points, std::size_t k, SeededRng& rng,
                         const KMeansOptions& options = {});

/// Best of `restarts` independent runs by final objective (first minimum
/// wins). Each restart forks its own stream off `rng`.
KMeansResult kMeansBest(const DenseMatrix& points, std::size_t k, const SeededRng& rng,
                        std::size_t restarts, const KMeansOptions& options = {});

} // namespace spotrep
