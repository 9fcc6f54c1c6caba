#pragma once

#include "spotrep/errors.hpp"
#include "spotrep/matrix.hpp"

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace spotrep::ad {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid until the
/// owning tape is cleared or destroyed.
class Var {
public:
    Var() = default;

    const DenseMatrix& value() const;
    /// The value of a 1x1 node.
    double scalar() const;

    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }

    Tape* tape() const noexcept { return tape_; }
    std::size_t node() const noexcept { return node_; }
    bool valid() const noexcept { return tape_ != nullptr; }

private:
    friend class Tape;
    Var(Tape* tape, std::size_t node) : tape_(tape), node_(node) {}

    Tape* tape_ = nullptr;
    std::size_t node_ = 0;
};

/// Column-wise batch-norm running statistics. Empty until the first
/// train-mode batch initializes them; later batches blend in with the
/// fixed momentum used by batchNormColumns.
struct BatchNormStats {
    std::vector<double> mean;
    std::vector<double> var;
    bool initialized = false;
};

enum class BnMode { Train, Eval };

inline constexpr double kBatchNormEpsilon = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

/// Eager reverse-mode gradient tape over dense-matrix primitives.
///
/// Ops execute immediately and record their output plus a backward closure.
/// Creation order is a topological order, so gradients() is a single
/// reverse sweep accumulating adjoints. Nodes that no tracked leaf feeds
/// into carry no backward work at all.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// A differentiable input; gradients() can report its adjoint.
    Var leaf(DenseMatrix value);
    /// A non-differentiable input.
    Var constant(DenseMatrix value);
    Var scalarConstant(double value);

    /// Reverse sweep from a 1x1 loss node. Returns one gradient per
    /// requested leaf, in order; leaves the loss does not depend on get
    /// zero matrices of the leaf's shape.
    std::vector<DenseMatrix> gradients(const Var& loss, std::span<const Var> leaves);

    void clear();
    std::size_t nodeCount() const noexcept { return nodes_.size(); }

    // --- plumbing used by primitive implementations ---
    using Backward = std::function<void(Tape&, std::size_t node)>;
    Var record(DenseMatrix value, std::span<const Var> parents, Backward backward);
    const DenseMatrix& value(std::size_t node) const { return nodes_[node].value; }
    bool tracked(std::size_t node) const { return nodes_[node].tracked; }
    /// Adjoint buffer, allocated as zeros on first touch during a sweep.
    DenseMatrix& adjoint(std::size_t node);
    bool adjointAllocated(std::size_t node) const;
    void checkSameTape(const Var& v, const char* what) const;

private:
    struct Node {
        DenseMatrix value;
        Backward backward;
        bool tracked = false;
    };

    std::vector<Node> nodes_;
    std::vector<DenseMatrix> adjoints_;
};

// ---- differentiable primitives ----

Var matmul(const Var& a, const Var& b);
/// Sparse-dense product; the sparse operand is a constant.
Var matmul(const SparseAdjacency& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var hadamard(const Var& a, const Var& b);
Var scale(const Var& a, double s);
/// m + row broadcast over every row of m (bias add); row is 1 x cols.
Var addRowVector(const Var& m, const Var& row);
Var transpose(const Var& a);
Var relu(const Var& a);

/// Per-row unit normalization. Rows with norm below kRowNormEpsilon raise
/// DegenerateError naming the row.
Var rowL2Normalize(const Var& a);

Var sumAll(const Var& a);
Var meanAll(const Var& a);
/// Mean of squared entries (the MSE of a against zero).
Var meanSquare(const Var& a);
/// Mean squared error over all entries of two same-shape matrices.
Var mseLoss(const Var& a, const Var& b);

/// Mean of the k largest entries of a vector-shaped node (1xN or Nx1).
/// Ties break toward the lower index; the selected set is a constant of
/// the forward pass, so the subgradient flows only to those entries.
/// Selected entries are summed in ascending index order, which makes
/// topKMean(v, len(v)) bitwise equal to meanAll(v).
Var topKMean(const Var& v, std::size_t k);

/// Column-wise batch normalization with scale gamma and shift beta (both
/// 1 x C). Train mode normalizes by biased batch statistics and folds them
/// into `stats` (momentum 0.1; the first batch initializes the buffers).
/// Eval mode normalizes by `stats` and leaves them untouched.
Var batchNormColumns(const Var& x, const Var& gamma, const Var& beta,
                     BatchNormStats& stats, BnMode mode);

/// Mean over rows of (logsumexp(row) - row[target]); the softmax
/// cross-entropy used by the prototypical loss.
Var crossEntropyRows(const Var& logits, std::span<const std::size_t> targets);

/// Similarity-scale matching over a square similarity matrix. For each row
/// i (a spot in slice c) the mean of its top-k entries among own-slice
/// columns is compared against the top-k mean among each other slice's
/// columns; squared gaps are averaged over the N*(sliceCount-1) pairs.
/// Top-k sets are constants of the forward pass. Selected values are
/// summed in descending value order, so the loss is exactly invariant
/// under spot permutations within a slice.
Var similarityScaling(const Var& similarity, std::span<const std::size_t> sliceOf,
                      std::size_t sliceCount, std::size_t k, bool includeSelf = true);

} // namespace spotrep::ad
