#pragma once

#include "spotrep/errors.hpp"

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace spotrep {

/// Dense row-major matrix of doubles: the value type for expression
/// matrices, embeddings, parameters, gradients and similarity matrices.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

    static DenseMatrix fromRows(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }

    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }
    double* data() noexcept { return values_.data(); }
    const double* data() const noexcept { return values_.data(); }

    bool sameShape(const DenseMatrix& other) const noexcept {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }
    bool allFinite() const noexcept;

    void fill(double v);
    DenseMatrix transposed() const;

    /// Largest |a-b| over entries; shapes must match.
    double maxAbsDiff(const DenseMatrix& other) const;

    friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> values_;
};

/// One directed entry of a sparse adjacency.
struct SparseEdge {
    std::size_t src = 0;
    std::size_t dst = 0;
    double weight = 1.0;
};

/// Sparse adjacency stored as an explicit, canonically sorted edge list.
/// Symmetric graphs store both (i,j) and (j,i); the `symmetric` flag is a
/// promise checked at construction.
class SparseAdjacency {
public:
    SparseAdjacency() = default;
    SparseAdjacency(std::size_t nodeCount, std::vector<SparseEdge> edges, bool symmetric = false);

    std::size_t nodeCount() const noexcept { return nodeCount_; }
    std::size_t edgeCount() const noexcept { return edges_.size(); }
    std::span<const SparseEdge> edges() const noexcept { return edges_; }
    bool markedSymmetric() const noexcept { return symmetric_; }

    /// True when the stored (src,dst) pair set equals its transpose.
    bool isSymmetric() const;
    bool hasSelfLoops() const;

    DenseMatrix toDense() const;

private:
    std::size_t nodeCount_ = 0;
    std::vector<SparseEdge> edges_;
    bool symmetric_ = false;
};

/// C = A * B with per-entry accumulation strictly in ascending inner index.
/// The pinned order makes runs reproducible and keeps products of the form
/// Z * Z^T bitwise symmetric.
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);

/// acc += A * B, same accumulation order as matmul.
void matmulAccumulate(DenseMatrix& acc, const DenseMatrix& a, const DenseMatrix& b);

/// Sparse-dense product touching only stored edges.
DenseMatrix matmul(const SparseAdjacency& a, const DenseMatrix& b);

/// acc += A^T * B for a sparse left operand (the adjoint of the product above).
void matmulTransposedAccumulate(DenseMatrix& acc, const SparseAdjacency& a, const DenseMatrix& b);

/// Rows rescaled to unit Euclidean norm. A row with norm below `epsilon`
/// raises DegenerateError naming the row.
DenseMatrix rowL2Normalized(const DenseMatrix& m, double epsilon = 1e-12);

inline constexpr double kRowNormEpsilon = 1e-12;

} // namespace spotrep
