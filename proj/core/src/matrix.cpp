#include "spotrep/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

namespace spotrep {

namespace {

std::string shapeString(std::size_t r, std::size_t c) {
    return std::to_string(r) + "x" + std::to_string(c);
}

} // namespace

DenseMatrix DenseMatrix::fromRows(std::initializer_list<std::initializer_list<double>> rows) {
    DenseMatrix m(rows.size(), rows.size() ? rows.begin()->size() : 0);
    std::size_t r = 0;
    for (const auto& row : rows) {
        if (row.size() != m.cols())
            throw ShapeError("fromRows: ragged row " + std::to_string(r));
        std::copy(row.begin(), row.end(), m.row(r).begin());
        ++r;
    }
    return m;
}

bool DenseMatrix::allFinite() const noexcept {
    for (double v : values_)
        if (!std::isfinite(v)) return false;
    return true;
}

void DenseMatrix::fill(double v) {
    std::fill(values_.begin(), values_.end(), v);
}

DenseMatrix DenseMatrix::transposed() const {
    DenseMatrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c)
            t(c, r) = (*this)(r, c);
    return t;
}

double DenseMatrix::maxAbsDiff(const DenseMatrix& other) const {
    if (!sameShape(other))
        throw ShapeError("maxAbsDiff: " + shapeString(rows_, cols_) + " vs " +
                         shapeString(other.rows_, other.cols_));
    double worst = 0.0;
    for (std::size_t i = 0; i < values_.size(); ++i)
        worst = std::max(worst, std::abs(values_[i] - other.values_[i]));
    return worst;
}

SparseAdjacency::SparseAdjacency(std::size_t nodeCount, std::vector<SparseEdge> edges, bool symmetric)
    : nodeCount_(nodeCount), edges_(std::move(edges)), symmetric_(symmetric) {
    for (const auto& e : edges_) {
        if (e.src >= nodeCount_ || e.dst >= nodeCount_)
            throw ParamError("sparse edge (" + std::to_string(e.src) + "," + std::to_string(e.dst) +
                             ") out of range for " + std::to_string(nodeCount_) + " nodes");
    }
    std::sort(edges_.begin(), edges_.end(), [](const SparseEdge& a, const SparseEdge& b) {
        return a.src != b.src ? a.src < b.src : a.dst < b.dst;
    });
    for (std::size_t i = 1; i < edges_.size(); ++i) {
        if (edges_[i].src == edges_[i - 1].src && edges_[i].dst == edges_[i - 1].dst)
            throw ParamError("duplicate sparse edge (" + std::to_string(edges_[i].src) + "," +
                             std::to_string(edges_[i].dst) + ")");
    }
    if (symmetric_ && !isSymmetric())
        throw ParamError("adjacency flagged symmetric but the edge-pair set is not");
}

bool SparseAdjacency::isSymmetric() const {
    // Edges are sorted; binary-search the reversed pair.
    for (const auto& e : edges_) {
        SparseEdge probe{e.dst, e.src, 0.0};
        auto it = std::lower_bound(edges_.begin(), edges_.end(), probe,
                                   [](const SparseEdge& a, const SparseEdge& b) {
                                       return a.src != b.src ? a.src < b.src : a.dst < b.dst;
                                   });
        if (it == edges_.end() || it->src != e.dst || it->dst != e.src || it->weight != e.weight)
            return false;
    }
    return true;
}

bool SparseAdjacency::hasSelfLoops() const {
    return std::any_of(edges_.begin(), edges_.end(),
                       [](const SparseEdge& e) { return e.src == e.dst; });
}

DenseMatrix SparseAdjacency::toDense() const {
    DenseMatrix d(nodeCount_, nodeCount_);
    for (const auto& e : edges_) d(e.src, e.dst) += e.weight;
    return d;
}

void matmulAccumulate(DenseMatrix& acc, const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.rows())
        throw ShapeError("matmul: inner dimensions disagree, " + shapeString(a.rows(), a.cols()) +
                         " * " + shapeString(b.rows(), b.cols()));
    if (acc.rows() != a.rows() || acc.cols() != b.cols())
        throw ShapeError("matmul: accumulator shape " + shapeString(acc.rows(), acc.cols()) +
                         " does not fit " + shapeString(a.rows(), b.cols()));
    const std::size_t m = a.rows(), kk = a.cols(), n = b.cols();
    const double* ap = a.data();
    const double* bp = b.data();
    double* cp = acc.data();
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = ap + i * kk;
        double* crow = cp + i * n;
        for (std::size_t k = 0; k < kk; ++k) {
            const double av = arow[k];
            const double* brow = bp + k * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.rows())
        throw ShapeError("matmul: inner dimensions disagree, " + shapeString(a.rows(), a.cols()) +
                         " * " + shapeString(b.rows(), b.cols()));
    DenseMatrix c(a.rows(), b.cols());
    matmulAccumulate(c, a, b);
    return c;
}

DenseMatrix matmul(const SparseAdjacency& a, const DenseMatrix& b) {
    if (a.nodeCount() != b.rows())
        throw ShapeError("sparse matmul: " + std::to_string(a.nodeCount()) + " nodes vs " +
                         shapeString(b.rows(), b.cols()));
    DenseMatrix c(a.nodeCount(), b.cols());
    const std::size_t n = b.cols();
    for (const auto& e : a.edges()) {
        const double w = e.weight;
        const double* brow = b.data() + e.dst * n;
        double* crow = c.data() + e.src * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += w * brow[j];
    }
    return c;
}

void matmulTransposedAccumulate(DenseMatrix& acc, const SparseAdjacency& a, const DenseMatrix& b) {
    if (a.nodeCount() != b.rows() || acc.rows() != a.nodeCount() || acc.cols() != b.cols())
        throw ShapeError("sparse transposed matmul: shape mismatch");
    const std::size_t n = b.cols();
    for (const auto& e : a.edges()) {
        const double w = e.weight;
        const double* brow = b.data() + e.src * n;
        double* crow = acc.data() + e.dst * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += w * brow[j];
    }
}

DenseMatrix rowL2Normalized(const DenseMatrix& m, double epsilon) {
    DenseMatrix out(m.rows(), m.cols());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        double sq = 0.0;
        for (double v : m.row(r)) sq += v * v;
        const double norm = std::sqrt(sq);
        if (norm < epsilon)
            throw DegenerateError("rowL2Normalize: row " + std::to_string(r) +
                                  " has norm below epsilon");
        auto src = m.row(r);
        auto dst = out.row(r);
        for (std::size_t c = 0; c < src.size(); ++c) dst[c] = src[c] / norm;
    }
    return out;
}

} // namespace spotrep
