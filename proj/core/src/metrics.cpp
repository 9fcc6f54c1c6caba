#include "spotrep/metrics.hpp"

#include "spotrep/errors.hpp"
#include "spotrep/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

namespace spotrep {

namespace {

Partition internIds(const Partition& raw) {
    Partition dense(raw.size());
    std::unordered_map<std::size_t, std::size_t> map;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        auto [it, inserted] = map.try_emplace(raw[i], map.size());
        dense[i] = it->second;
    }
    return dense;
}

std::size_t clusterCount(const Partition& interned) {
    std::size_t k = 0;
    for (std::size_t id : interned) k = std::max(k, id + 1);
    return k;
}

/// Contingency table between two interned partitions, plus marginals.
struct Contingency {
    std::size_t rows = 0, cols = 0, n = 0;
    std::vector<double> counts;    // rows x cols
    std::vector<double> rowSums;
    std::vector<double> colSums;

    double at(std::size_t r, std::size_t c) const { return counts[r * cols + c]; }
};

Contingency contingency(const Partition& a, const Partition& b) {
    if (a.size() != b.size())
        throw ShapeError("partition lengths differ: " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
    if (a.empty()) throw ParamError("empty partitions");
    Contingency t;
    t.n = a.size();
    t.rows = clusterCount(a);
    t.cols = clusterCount(b);
    t.counts.assign(t.rows * t.cols, 0.0);
    t.rowSums.assign(t.rows, 0.0);
    t.colSums.assign(t.cols, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        t.counts[a[i] * t.cols + b[i]] += 1.0;
        t.rowSums[a[i]] += 1.0;
        t.colSums[b[i]] += 1.0;
    }
    return t;
}

double choose2(double n) { return n * (n - 1.0) / 2.0; }

/// Hungarian algorithm (potentials formulation) on a square cost matrix;
/// returns the minimum-cost assignment value.
double hungarianMinCost(const std::vector<double>& cost, std::size_t n) {
    const double kInf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(n + 1, kInf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = p[j0];
            double delta = kInf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    double total = 0.0;
    for (std::size_t j = 1; j <= n; ++j)
        if (p[j]) total += cost[(p[j] - 1) * n + (j - 1)];
    return total;
}

double euclidean(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

/// Silhouette widths for a set of row indices under the given labels.
std::vector<double> silhouetteWidths(const DenseMatrix& points,
                                     std::span<const std::size_t> rows,
                                     const Partition& labels) {
    const std::size_t m = rows.size();
    const std::size_t k = clusterCount(labels);
    std::vector<std::size_t> sizes(k, 0);
    for (std::size_t id : labels) ++sizes[id];

    std::vector<double> widths(m, 0.0);
    std::vector<double> meanDist(k);
    for (std::size_t a = 0; a < m; ++a) {
        std::fill(meanDist.begin(), meanDist.end(), 0.0);
        for (std::size_t b = 0; b < m; ++b) {
            if (a == b) continue;
            meanDist[labels[b]] += euclidean(points.row(rows[a]), points.row(rows[b]));
        }
        const std::size_t own = labels[a];
        if (sizes[own] <= 1) {
            widths[a] = 0.0; // singleton cluster
            continue;
        }
        const double aDist = meanDist[own] / static_cast<double>(sizes[own] - 1);
        double bDist = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < k; ++c) {
            if (c == own || sizes[c] == 0) continue;
            bDist = std::min(bDist, meanDist[c] / static_cast<double>(sizes[c]));
        }
        const double denom = std::max(aDist, bDist);
        widths[a] = denom > 0.0 ? (bDist - aDist) / denom : 0.0;
    }
    return widths;
}

} // namespace

Partition internLabels(std::span<const std::string> labels) {
    Partition out(labels.size());
    std::unordered_map<std::string, std::size_t> map;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto [it, inserted] = map.try_emplace(labels[i], map.size());
        out[i] = it->second;
    }
    return out;
}

Partition kMeansPartition(const DenseMatrix& embeddings, std::size_t k, const SeededRng& rng,
                          std::size_t restarts) {
    if (k < 2 || k > embeddings.rows())
        throw ParamError("kMeansPartition: k=" + std::to_string(k) + " out of range for " +
                         std::to_string(embeddings.rows()) + " points");
    KMeansResult result = kMeansBest(embeddings, k, rng, restarts, KMeansOptions{300, 1e-6});
    return result.assignment;
}

double adjustedRandIndex(const Partition& truth, const Partition& pred) {
    const Contingency t = contingency(internIds(truth), internIds(pred));
    double sumCells = 0.0;
    for (double c : t.counts) sumCells += choose2(c);
    double sumRows = 0.0, sumCols = 0.0;
    for (double r : t.rowSums) sumRows += choose2(r);
    for (double c : t.colSums) sumCols += choose2(c);
    const double pairs = choose2(static_cast<double>(t.n));
    const double expected = sumRows * sumCols / pairs;
    const double maxIndex = 0.5 * (sumRows + sumCols);
    if (maxIndex == expected) return 1.0; // both partitions trivial
    return (sumCells - expected) / (maxIndex - expected);
}

double normalizedMutualInfo(const Partition& truth, const Partition& pred) {
    const Contingency t = contingency(internIds(truth), internIds(pred));
    const double n = static_cast<double>(t.n);
    double mi = 0.0;
    for (std::size_t r = 0; r < t.rows; ++r)
        for (std::size_t c = 0; c < t.cols; ++c) {
            const double cell = t.at(r, c);
            if (cell == 0.0) continue;
            mi += (cell / n) * std::log(cell * n / (t.rowSums[r] * t.colSums[c]));
        }
    double hT = 0.0, hP = 0.0;
    for (double r : t.rowSums) hT -= (r / n) * std::log(r / n);
    for (double c : t.colSums) hP -= (c / n) * std::log(c / n);
    if (hT == 0.0 && hP == 0.0) return 1.0; // both single-cluster
    const double denom = 0.5 * (hT + hP);
    if (denom == 0.0) return 0.0;
    return std::clamp(mi / denom, 0.0, 1.0);
}

double clusteringAccuracy(const Partition& truth, const Partition& pred) {
    const Contingency t = contingency(internIds(truth), internIds(pred));
    const std::size_t n = std::max(t.rows, t.cols);
    // Pad to square and minimize negated counts.
    std::vector<double> cost(n * n, 0.0);
    for (std::size_t r = 0; r < t.rows; ++r)
        for (std::size_t c = 0; c < t.cols; ++c) cost[r * n + c] = -t.at(r, c);
    const double matched = -hungarianMinCost(cost, n);
    return matched / static_cast<double>(t.n);
}

double silhouetteScore(const DenseMatrix& points, const Partition& labels) {
    if (points.rows() != labels.size())
        throw ShapeError("silhouette: " + std::to_string(points.rows()) + " points vs " +
                         std::to_string(labels.size()) + " labels");
    if (points.rows() == 0) throw ParamError("silhouette: no points");
    const Partition ids = internIds(labels);
    if (clusterCount(ids) < 2)
        throw MetricError("silhouette undefined for a single cluster");

    std::vector<std::size_t> rows(points.rows());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    const std::vector<double> widths = silhouetteWidths(points, rows, ids);
    double mean = 0.0;
    for (double w : widths) mean += w;
    return mean / static_cast<double>(widths.size());
}

SilhouetteBatchResult silhouetteBatch(const DenseMatrix& points, const Partition& domains,
                                      std::span<const std::size_t> sliceMembership) {
    if (points.rows() != domains.size() || points.rows() != sliceMembership.size())
        throw ShapeError("silhouetteBatch: points, domains and slices must align");
    const Partition ids = internIds(domains);
    const std::size_t domainCount = clusterCount(ids);

    SilhouetteBatchResult result;
    double total = 0.0;
    std::size_t counted = 0;
    for (std::size_t d = 0; d < domainCount; ++d) {
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < ids.size(); ++i)
            if (ids[i] == d) rows.push_back(i);

        Partition slices(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) slices[i] = sliceMembership[rows[i]];
        slices = internIds(slices);
        if (clusterCount(slices) < 2) {
            result.skippedDomains.push_back(d);
            continue;
        }
        const std::vector<double> widths = silhouetteWidths(points, rows, slices);
        double meanAbs = 0.0;
        for (double w : widths) meanAbs += std::abs(w);
        meanAbs /= static_cast<double>(widths.size());
        total += 1.0 - meanAbs;
        ++counted;
    }
    if (counted == 0)
        throw MetricError("silhouetteBatch: no domain spans more than one slice");
    result.score = total / static_cast<double>(counted);
    return result;
}

std::vector<std::size_t> nearestReferenceByCosine(const DenseMatrix& reference,
                                                  const DenseMatrix& query) {
    if (reference.rows() == 0) throw ParamError("nearestReferenceByCosine: empty reference");
    if (reference.cols() != query.cols())
        throw ShapeError("nearestReferenceByCosine: embedding dims differ (" +
                         std::to_string(reference.cols()) + " vs " + std::to_string(query.cols()) +
                         ")");

    auto norms = [](const DenseMatrix& m) {
        std::vector<double> out(m.rows());
        for (std::size_t r = 0; r < m.rows(); ++r) {
            double s = 0.0;
            for (double v : m.row(r)) s += v * v;
            out[r] = std::sqrt(s);
        }
        return out;
    };
    const std::vector<double> refNorm = norms(reference);
    const std::vector<double> qNorm = norms(query);

    std::vector<std::size_t> nearest(query.rows(), 0);
    for (std::size_t q = 0; q < query.rows(); ++q) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t bestIdx = 0;
        for (std::size_t r = 0; r < reference.rows(); ++r) {
            double dot = 0.0;
            auto a = query.row(q);
            auto b = reference.row(r);
            for (std::size_t c = 0; c < a.size(); ++c) dot += a[c] * b[c];
            const double denom = qNorm[q] * refNorm[r];
            const double sim = denom > 0.0 ? dot / denom : 0.0; // zero rows match nothing well
            if (sim > best) {
                best = sim;
                bestIdx = r;
            }
        }
        nearest[q] = bestIdx;
    }
    return nearest;
}

double labelTransferAri(const DenseMatrix& refEmbeddings, const Partition& refLabels,
                        const DenseMatrix& queryEmbeddings, const Partition& queryTruth) {
    if (refLabels.size() != refEmbeddings.rows())
        throw ShapeError("labelTransferAri: reference labels vs embeddings mismatch");
    if (queryTruth.size() != queryEmbeddings.rows())
        throw ShapeError("labelTransferAri: query truth vs embeddings mismatch");
    const std::vector<std::size_t> nearest = nearestReferenceByCosine(refEmbeddings, queryEmbeddings);
    Partition transferred(queryEmbeddings.rows());
    for (std::size_t q = 0; q < transferred.size(); ++q) transferred[q] = refLabels[nearest[q]];
    return adjustedRandIndex(queryTruth, transferred);
}

} // namespace spotrep
