#include "spotrep/kmeans.hpp"

#include "spotrep/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace spotrep {

namespace {

double squaredDistance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

} // namespace

KMeansResult kMeansLloyd(const DenseMatrix& points, std::size_t k, SeededRng& rng,
                         const KMeansOptions& options) {
    const std::size_t n = points.rows(), dim = points.cols();
    if (k < 1 || k > n)
        throw ParamError("kMeans: k=" + std::to_string(k) + " out of range for " +
                         std::to_string(n) + " points");

    // k-means++ seeding.
    DenseMatrix centroids(k, dim);
    std::vector<double> minDist(n, std::numeric_limits<double>::infinity());
    {
        const std::size_t first = static_cast<std::size_t>(rng.nextBelow(n));
        std::copy(points.row(first).begin(), points.row(first).end(), centroids.row(0).begin());
        for (std::size_t c = 1; c < k; ++c) {
            for (std::size_t i = 0; i < n; ++i)
                minDist[i] = std::min(minDist[i], squaredDistance(points.row(i), centroids.row(c - 1)));
            const std::size_t pick = rng.nextIndexWeighted(minDist);
            std::copy(points.row(pick).begin(), points.row(pick).end(), centroids.row(c).begin());
        }
    }

    KMeansResult result;
    result.assignment.assign(n, 0);
    std::vector<std::size_t> counts(k, 0);
    double prevObjective = std::numeric_limits<double>::infinity();

    for (std::size_t iter = 0; iter < options.maxIterations; ++iter) {
        // Assignment step; ties go to the lower centroid index.
        double objective = 0.0;
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t best = 0;
            double bestDist = squaredDistance(points.row(i), centroids.row(0));
            for (std::size_t c = 1; c < k; ++c) {
                const double d = squaredDistance(points.row(i), centroids.row(c));
                if (d < bestDist) {
                    bestDist = d;
                    best = c;
                }
            }
            if (result.assignment[i] != best) {
                result.assignment[i] = best;
                changed = true;
            }
            objective += bestDist;
        }
        result.objectiveTrace.push_back(objective);
        result.objective = objective;

        const bool converged =
            !changed ||
            (std::isfinite(prevObjective) &&
             prevObjective - objective <= options.relTolerance * std::max(prevObjective, 1e-300));
        prevObjective = objective;

        // Update step.
        centroids.fill(0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            auto c = centroids.row(result.assignment[i]);
            auto p = points.row(i);
            for (std::size_t j = 0; j < dim; ++j) c[j] += p[j];
            ++counts[result.assignment[i]];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) continue;
            auto row = centroids.row(c);
            for (std::size_t j = 0; j < dim; ++j) row[j] /= static_cast<double>(counts[c]);
        }
        // Empty clusters: re-seed at the point farthest from its centroid.
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] != 0) continue;
            std::size_t farthest = 0;
            double worst = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (counts[result.assignment[i]] <= 1) continue; // keep donor clusters nonempty
                const double d = squaredDistance(points.row(i), centroids.row(result.assignment[i]));
                if (d > worst) {
                    worst = d;
                    farthest = i;
                }
            }
            std::copy(points.row(farthest).begin(), points.row(farthest).end(),
                      centroids.row(c).begin());
            --counts[result.assignment[farthest]];
            result.assignment[farthest] = c;
            counts[c] = 1;
        }

        if (converged) break;
    }

    result.centroids = std::move(centroids);
    return result;
}

KMeansResult kMeansBest(const DenseMatrix& points, std::size_t k, const SeededRng& rng,
                        std::size_t restarts, const KMeansOptions& options) {
    if (restarts == 0) throw ParamError("kMeans: restarts must be positive");
    KMeansResult best;
    bool haveBest = false;
    for (std::size_t r = 0; r < restarts; ++r) {
        SeededRng local = rng.fork("restart" + std::to_string(r));
        KMeansResult run = kMeansLloyd(points, k, local, options);
        if (!haveBest || run.objective < best.objective) {
            best = std::move(run);
            haveBest = true;
        }
    }
    return best;
}

} // namespace spotrep
