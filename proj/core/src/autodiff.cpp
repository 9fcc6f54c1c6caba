#include "spotrep/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>

namespace spotrep::ad {

namespace {

void addInto(DenseMatrix& acc, const DenseMatrix& g) {
    auto a = acc.values();
    auto b = g.values();
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

void requireSameShape(const Var& a, const Var& b, const char* op) {
    if (!a.value().sameShape(b.value()))
        throw ShapeError(std::string(op) + ": shapes " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " and " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()) + " differ");
}

bool isVectorShaped(const DenseMatrix& m) {
    return m.rows() == 1 || m.cols() == 1;
}

} // namespace

const DenseMatrix& Var::value() const {
    if (!tape_) throw TapeError("value() on an empty Var");
    return tape_->value(node_);
}

double Var::scalar() const {
    const DenseMatrix& v = value();
    if (v.size() != 1) throw TapeError("scalar() on a non-scalar node");
    return v.values()[0];
}

Var Tape::leaf(DenseMatrix value) {
    nodes_.push_back(Node{std::move(value), {}, true});
    return Var(this, nodes_.size() - 1);
}

Var Tape::constant(DenseMatrix value) {
    nodes_.push_back(Node{std::move(value), {}, false});
    return Var(this, nodes_.size() - 1);
}

Var Tape::scalarConstant(double value) {
    return constant(DenseMatrix(1, 1, value));
}

void Tape::checkSameTape(const Var& v, const char* what) const {
    if (v.tape() != this)
        throw TapeError(std::string(what) + " was not recorded on this tape");
}

Var Tape::record(DenseMatrix value, std::span<const Var> parents, Backward backward) {
    bool tracked = false;
    for (const Var& p : parents) {
        checkSameTape(p, "operand");
        tracked = tracked || nodes_[p.node()].tracked;
    }
    nodes_.push_back(Node{std::move(value), tracked ? std::move(backward) : Backward{}, tracked});
    return Var(this, nodes_.size() - 1);
}

DenseMatrix& Tape::adjoint(std::size_t node) {
    DenseMatrix& a = adjoints_[node];
    if (a.empty() && !nodes_[node].value.empty())
        a = DenseMatrix(nodes_[node].value.rows(), nodes_[node].value.cols());
    return a;
}

bool Tape::adjointAllocated(std::size_t node) const {
    return !adjoints_[node].empty();
}

std::vector<DenseMatrix> Tape::gradients(const Var& loss, std::span<const Var> leaves) {
    checkSameTape(loss, "loss");
    if (loss.value().size() != 1)
        throw TapeError("gradients: loss must be a 1x1 scalar node");
    for (const Var& l : leaves) checkSameTape(l, "leaf");

    adjoints_.assign(nodes_.size(), DenseMatrix{});
    adjoint(loss.node())(0, 0) = 1.0;

    for (std::size_t i = loss.node() + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (n.tracked && n.backward && adjointAllocated(i)) n.backward(*this, i);
    }

    std::vector<DenseMatrix> out;
    out.reserve(leaves.size());
    for (const Var& l : leaves) {
        if (adjointAllocated(l.node()))
            out.push_back(std::move(adjoints_[l.node()]));
        else
            out.push_back(DenseMatrix(l.rows(), l.cols()));
    }
    adjoints_.clear();
    return out;
}

void Tape::clear() {
    nodes_.clear();
    adjoints_.clear();
}

// ---------------- primitives ----------------

Var matmul(const Var& a, const Var& b) {
    Tape& t = *a.tape();
    t.checkSameTape(b, "matmul operand");
    DenseMatrix c = spotrep::matmul(a.value(), b.value());
    const Var parents[] = {a, b};
    return t.record(std::move(c), parents, [a, b](Tape& tp, std::size_t self) {
        const DenseMatrix& g = tp.adjoint(self);
        if (tp.tracked(a.node()))
            matmulAccumulate(tp.adjoint(a.node()), g, b.value().transposed());
        if (tp.tracked(b.node()))
            matmulAccumulate(tp.adjoint(b.node()), a.value().transposed(), g);
    });
}

Var matmul(const SparseAdjacency& a, const Var& b) {
    Tape& t = *b.tape();
    DenseMatrix c = spotrep::matmul(a, b.value());
    const Var parents[] = {b};
    // The sparse operand is held by the caller for the tape's lifetime;
    // copy the edges we need into the closure to stay self-contained.
    SparseAdjacency edges = a;
    return t.record(std::move(c), parents, [b, edges = std::move(edges)](Tape& tp, std::size_t self) {
        if (tp.tracked(b.node()))
            matmulTransposedAccumulate(tp.adjoint(b.node()), edges, tp.adjoint(self));
    });
}

Var add(const Var& a, const Var& b) {
    Tape& t = *a.tape();
    t.checkSameTape(b, "add operand");
    requireSameShape(a, b, "add");
    DenseMatrix c = a.value();
    addInto(c, b.value());
    const Var parents[] = {a, b};
    return t.record(std::move(c), parents, [a, b](Tape& tp, std::size_t self) {
        const DenseMatrix& g = tp.adjoint(self);
        if (tp.tracked(a.node())) addInto(tp.adjoint(a.node()), g);
        if (tp.tracked(b.node())) addInto(tp.adjoint(b.node()), g);
    });
}

Var sub(const Var& a, const Var& b) {
    Tape& t = *a.tape();
    t.checkSameTape(b, "sub operand");
    requireSameShape(a, b, "sub");
    DenseMatrix c = a.value();
    {
        auto cv = c.values();
        auto bv = b.value().values();
        for (std::size_t i = 0; i < cv.size(); ++i) cv[i] -= bv[i];
    }
    const Var parents[] = {a, b};
    return t.record(std::move(c), parents, [a, b](Tape& tp, std::size_t self) {
        const DenseMatrix& g = tp.adjoint(self);
        if (tp.tracked(a.node())) addInto(tp.adjoint(a.node()), g);
        if (tp.tracked(b.node())) {
            auto acc = tp.adjoint(b.node()).values();
            auto gv = g.values();
            for (std::size_t i = 0; i < acc.size(); ++i) acc[i] -= gv[i];
        }
    });
}

Var hadamard(const Var& a, const Var& b) {
    Tape& t = *a.tape();
    t.checkSameTape(b, "hadamard operand");
    requireSameShape(a, b, "hadamard");
    DenseMatrix c(a.rows(), a.cols());
    {
        auto cv = c.values();
        auto av = a.value().values();
        auto bv = b.value().values();
        for (std::size_t i = 0; i < cv.size(); ++i) cv[i] = av[i] * bv[i];
    }
    const Var parents[] = {a, b};
    return t.record(std::move(c), parents, [a, b](Tape& tp, std::size_t self) {
        const DenseMatrix& g = tp.adjoint(self);
        if (tp.tracked(a.node())) {
            auto acc = tp.adjoint(a.node()).values();
            auto gv = g.values();
            auto bv = b.value().values();
            for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += gv[i] * bv[i];
        }
        if (tp.tracked(b.node())) {
            auto acc = tp.adjoint(b.node()).values();
            auto gv = g.values();
            auto av = a.value().values();
            for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += gv[i] * av[i];
        }
    });
}

Var scale(const Var& a, double s) {
    Tape& t = *a.tape();
    DenseMatrix c = a.value();
    for (double& v : c.values()) v *= s;
    const Var parents[] = {a};
    return t.record(std::move(c), parents, [a, s](Tape& tp, std::size_t self) {
        if (!tp.tracked(a.node())) return;
        auto acc = tp.adjoint(a.node()).values();
        auto gv = tp.adjoint(self).values();
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += s * gv[i];
    });
}

Var addRowVector(const Var& m, const Var& row) {
    Tape& t = *m.tape();
    t.checkSameTape(row, "addRowVector operand");
    if (row.rows() != 1 || row.cols() != m.cols())
        throw ShapeError("addRowVector: bias must be 1x" + std::to_string(m.cols()));
    DenseMatrix c = m.value();
    for (std::size_t r = 0; r < c.rows(); ++r) {
        auto dst = c.row(r);
        auto b = row.value().row(0);
        for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += b[j];
    }
    const Var parents[] = {m, row};
    return t.record(std::move(c), parents, [m, row](Tape& tp, std::size_t self) {
        const DenseMatrix& g = tp.adjoint(self);
        if (tp.tracked(m.node())) addInto(tp.adjoint(m.node()), g);
        if (tp.tracked(row.node())) {
            auto acc = tp.adjoint(row.node()).row(0);
            for (std::size_t r = 0; r < g.rows(); ++r) {
                auto gr = g.row(r);
                for (std::size_t j = 0; j < gr.size(); ++j) acc[j] += gr[j];
            }
        }
    });
}

Var transpose(const Var& a) {
    Tape& t = *a.tape();
    const Var parents[] = {a};
    return t.record(a.value().transposed(), parents, [a](Tape& tp, std::size_t self) {
        if (tp.tracked(a.node()))
            addInto(tp.adjoint(a.node()), tp.adjoint(self).transposed());
    });
}

Var relu(const Var& a) {
    Tape& t = *a.tape();
    DenseMatrix c = a.value();
    for (double& v : c.values()) v = v > 0.0 ? v : 0.0;
    const Var parents[] = {a};
    return t.record(std::move(c), parents, [a](Tape& tp, std::size_t self) {
        if (!tp.tracked(a.node())) return;
        auto acc = tp.adjoint(a.node()).values();
        auto gv = tp.adjoint(self).values();
        auto xv = a.value().values();
        for (std::size_t i = 0; i < acc.size(); ++i)
            if (xv[i] > 0.0) acc[i] += gv[i];
    });
}

Var rowL2Normalize(const Var& a) {
    Tape& t = *a.tape();
    const DenseMatrix& x = a.value();
    DenseMatrix y(x.rows(), x.cols());
    std::vector<double> norms(x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        double sq = 0.0;
        for (double v : x.row(r)) sq += v * v;
        const double norm = std::sqrt(sq);
        if (norm < kRowNormEpsilon)
            throw DegenerateError("rowL2Normalize: row " + std::to_string(r) +
                                  " has norm below epsilon");
        norms[r] = norm;
        auto src = x.row(r);
        auto dst = y.row(r);
        for (std::size_t c = 0; c < src.size(); ++c) dst[c] = src[c] / norm;
    }
    const Var parents[] = {a};
    return t.record(std::move(y), parents,
                    [a, norms = std::move(norms)](Tape& tp, std::size_t self) {
        if (!tp.tracked(a.node())) return;
        const DenseMatrix& g = tp.adjoint(self);
        const DenseMatrix& yv = tp.value(self);
        DenseMatrix& acc = tp.adjoint(a.node());
        for (std::size_t r = 0; r < g.rows(); ++r) {
            auto gr = g.row(r);
            auto yr = yv.row(r);
            double dot = 0.0;
            for (std::size_t c = 0; c < gr.size(); ++c) dot += yr[c] * gr[c];
            auto ar = acc.row(r);
            for (std::size_t c = 0; c < gr.size(); ++c)
                ar[c] += (gr[c] - yr[c] * dot) / norms[r];
        }
    });
}

Var sumAll(const Var& a) {
    Tape& t = *a.tape();
    double s = 0.0;
    for (double v : a.value().values()) s += v;
    const Var parents[] = {a};
    return t.record(DenseMatrix(1, 1, s), parents, [a](Tape& tp, std::size_t self) {
        if (!tp.tracked(a.node())) return;
        const double g = tp.adjoint(self)(0, 0);
        for (double& v : tp.adjoint(a.node()).values()) v += g;
    });
}

Var meanAll(const Var& a) {
    Tape& t = *a.tape();
    if (a.value().empty()) throw ShapeError("meanAll: empty matrix");
    double s = 0.0;
    for (double v : a.value().values()) s += v;
    const double inv = 1.0 / static_cast<double>(a.value().size());
    const Var parents[] = {a};
    return t.record(DenseMatrix(1, 1, s * inv), parents, [a, inv](Tape& tp, std::size_t self) {
        if (!tp.tracked(a.node())) return;
        const double g = tp.adjoint(self)(0, 0) * inv;
        for (double& v : tp.adjoint(a.node()).values()) v += g;
    });
}

Var meanSquare(const Var& a) {
    Tape& t = *a.tape();
    if (a.value().empty()) throw ShapeError("meanSquare: empty matrix");
    double s = 0.0;
    for (double v : a.value().values()) s += v * v;
    const double inv = 1.0 / static_cast<double>(a.value().size());
    const Var parents[] = {a};
    return t.record(DenseMatrix(1, 1, s * inv), parents, [a, inv](Tape& tp, std::size_t self) {
        if (!tp.tracked(a.node())) return;
        const double g = tp.adjoint(self)(0, 0);
        auto acc = tp.adjoint(a.node()).values();
        auto xv = a.value().values();
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g * 2.0 * xv[i] * inv;
    });
}

Var mseLoss(const Var& a, const Var& b) {
    return meanSquare(sub(a, b));
}

Var topKMean(const Var& v, std::size_t k) {
    Tape& t = *v.tape();
    const DenseMatrix& x = v.value();
    if (!isVectorShaped(x)) throw ShapeError("topKMean: expected a vector-shaped node");
    const std::size_t n = x.size();
    if (k < 1 || k > n)
        throw ParamError("topKMean: k=" + std::to_string(k) + " out of range for length " +
                         std::to_string(n));
    auto xv = x.values();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        return xv[i] != xv[j] ? xv[i] > xv[j] : i < j;
    });
    std::vector<std::size_t> selected(order.begin(), order.begin() + k);
    std::sort(selected.begin(), selected.end());
    double sum = 0.0;
    for (std::size_t i : selected) sum += xv[i];
    const double mean = sum / static_cast<double>(k);
    const Var parents[] = {v};
    return t.record(DenseMatrix(1, 1, mean), parents,
                    [v, k, selected = std::move(selected)](Tape& tp, std::size_t self) {
        if (!tp.tracked(v.node())) return;
        const double g = tp.adjoint(self)(0, 0) / static_cast<double>(k);
        auto acc = tp.adjoint(v.node()).values();
        for (std::size_t i : selected) acc[i] += g;
    });
}

Var batchNormColumns(const Var& x, const Var& gamma, const Var& beta,
                     BatchNormStats& stats, BnMode mode) {
    Tape& t = *x.tape();
    t.checkSameTape(gamma, "batchNorm gamma");
    t.checkSameTape(beta, "batchNorm beta");
    const DenseMatrix& xv = x.value();
    const std::size_t n = xv.rows(), c = xv.cols();
    if (n == 0) throw ShapeError("batchNorm: empty batch");
    if (gamma.rows() != 1 || gamma.cols() != c || beta.rows() != 1 || beta.cols() != c)
        throw ShapeError("batchNorm: gamma/beta must be 1x" + std::to_string(c));

    std::vector<double> invStd(c);
    DenseMatrix xhat(n, c);

    if (mode == BnMode::Train) {
        std::vector<double> mean(c, 0.0), var(c, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            auto r = xv.row(i);
            for (std::size_t j = 0; j < c; ++j) mean[j] += r[j];
        }
        for (std::size_t j = 0; j < c; ++j) mean[j] /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            auto r = xv.row(i);
            for (std::size_t j = 0; j < c; ++j) {
                const double d = r[j] - mean[j];
                var[j] += d * d;
            }
        }
        for (std::size_t j = 0; j < c; ++j) var[j] /= static_cast<double>(n); // biased
        for (std::size_t j = 0; j < c; ++j) invStd[j] = 1.0 / std::sqrt(var[j] + kBatchNormEpsilon);
        for (std::size_t i = 0; i < n; ++i) {
            auto r = xv.row(i);
            auto h = xhat.row(i);
            for (std::size_t j = 0; j < c; ++j) h[j] = (r[j] - mean[j]) * invStd[j];
        }
        if (!stats.initialized) {
            stats.mean = mean;
            stats.var = var;
            stats.initialized = true;
        } else {
            if (stats.mean.size() != c)
                throw StateError("batchNorm: running stats sized for " +
                                 std::to_string(stats.mean.size()) + " columns, got " +
                                 std::to_string(c));
            for (std::size_t j = 0; j < c; ++j) {
                stats.mean[j] = (1.0 - kBatchNormMomentum) * stats.mean[j] + kBatchNormMomentum * mean[j];
                stats.var[j] = (1.0 - kBatchNormMomentum) * stats.var[j] + kBatchNormMomentum * var[j];
            }
        }
    } else {
        if (!stats.initialized)
            throw StateError("batchNorm: eval mode requested before any training batch");
        if (stats.mean.size() != c)
            throw StateError("batchNorm: running stats sized for " +
                             std::to_string(stats.mean.size()) + " columns, got " +
                             std::to_string(c));
        for (std::size_t j = 0; j < c; ++j)
            invStd[j] = 1.0 / std::sqrt(stats.var[j] + kBatchNormEpsilon);
        for (std::size_t i = 0; i < n; ++i) {
            auto r = xv.row(i);
            auto h = xhat.row(i);
            for (std::size_t j = 0; j < c; ++j) h[j] = (r[j] - stats.mean[j]) * invStd[j];
        }
    }

    DenseMatrix y(n, c);
    {
        auto g = gamma.value().row(0);
        auto b = beta.value().row(0);
        for (std::size_t i = 0; i < n; ++i) {
            auto h = xhat.row(i);
            auto dst = y.row(i);
            for (std::size_t j = 0; j < c; ++j) dst[j] = g[j] * h[j] + b[j];
        }
    }

    const Var parents[] = {x, gamma, beta};
    return t.record(std::move(y), parents,
                    [x, gamma, beta, mode, invStd = std::move(invStd),
                     xhat = std::move(xhat)](Tape& tp, std::size_t self) {
        const DenseMatrix& g = tp.adjoint(self);
        const std::size_t n = g.rows(), c = g.cols();
        auto gam = gamma.value().row(0);

        if (tp.tracked(beta.node())) {
            auto acc = tp.adjoint(beta.node()).row(0);
            for (std::size_t i = 0; i < n; ++i) {
                auto gr = g.row(i);
                for (std::size_t j = 0; j < c; ++j) acc[j] += gr[j];
            }
        }
        if (tp.tracked(gamma.node())) {
            auto acc = tp.adjoint(gamma.node()).row(0);
            for (std::size_t i = 0; i < n; ++i) {
                auto gr = g.row(i);
                auto h = xhat.row(i);
                for (std::size_t j = 0; j < c; ++j) acc[j] += gr[j] * h[j];
            }
        }
        if (!tp.tracked(x.node())) return;

        DenseMatrix& acc = tp.adjoint(x.node());
        if (mode == BnMode::Eval) {
            // y depends on x only through the fixed affine map.
            for (std::size_t i = 0; i < n; ++i) {
                auto gr = g.row(i);
                auto ar = acc.row(i);
                for (std::size_t j = 0; j < c; ++j) ar[j] += gr[j] * gam[j] * invStd[j];
            }
            return;
        }
        // Train mode: batch statistics are functions of x.
        std::vector<double> sumDh(c, 0.0), sumDhH(c, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            auto gr = g.row(i);
            auto h = xhat.row(i);
            for (std::size_t j = 0; j < c; ++j) {
                const double dh = gr[j] * gam[j];
                sumDh[j] += dh;
                sumDhH[j] += dh * h[j];
            }
        }
        const double invN = 1.0 / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            auto gr = g.row(i);
            auto h = xhat.row(i);
            auto ar = acc.row(i);
            for (std::size_t j = 0; j < c; ++j) {
                const double dh = gr[j] * gam[j];
                ar[j] += invStd[j] * (dh - invN * sumDh[j] - invN * h[j] * sumDhH[j]);
            }
        }
    });
}

Var crossEntropyRows(const Var& logits, std::span<const std::size_t> targets) {
    Tape& t = *logits.tape();
    const DenseMatrix& l = logits.value();
    const std::size_t n = l.rows(), k = l.cols();
    if (targets.size() != n)
        throw ShapeError("crossEntropyRows: " + std::to_string(targets.size()) +
                         " targets for " + std::to_string(n) + " rows");
    for (std::size_t i = 0; i < n; ++i)
        if (targets[i] >= k)
            throw ParamError("crossEntropyRows: target " + std::to_string(targets[i]) +
                             " out of range at row " + std::to_string(i));

    DenseMatrix probs(n, k);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        auto row = l.row(i);
        const double m = *std::max_element(row.begin(), row.end());
        double z = 0.0;
        for (std::size_t j = 0; j < k; ++j) z += std::exp(row[j] - m);
        const double lse = m + std::log(z);
        auto p = probs.row(i);
        for (std::size_t j = 0; j < k; ++j) p[j] = std::exp(row[j] - lse);
        total += lse - row[targets[i]];
    }
    const double invN = 1.0 / static_cast<double>(n);
    std::vector<std::size_t> targ(targets.begin(), targets.end());
    const Var parents[] = {logits};
    return t.record(DenseMatrix(1, 1, total * invN), parents,
                    [logits, invN, probs = std::move(probs),
                     targ = std::move(targ)](Tape& tp, std::size_t self) {
        if (!tp.tracked(logits.node())) return;
        const double g = tp.adjoint(self)(0, 0) * invN;
        DenseMatrix& acc = tp.adjoint(logits.node());
        for (std::size_t i = 0; i < acc.rows(); ++i) {
            auto p = probs.row(i);
            auto ar = acc.row(i);
            for (std::size_t j = 0; j < ar.size(); ++j)
                ar[j] += g * (p[j] - (j == targ[i] ? 1.0 : 0.0));
        }
    });
}

Var similarityScaling(const Var& similarity, std::span<const std::size_t> sliceOf,
                      std::size_t sliceCount, std::size_t k, bool includeSelf) {
    Tape& t = *similarity.tape();
    const DenseMatrix& h = similarity.value();
    const std::size_t n = h.rows();
    if (h.cols() != n) throw ShapeError("similarityScaling: similarity matrix must be square");
    if (sliceOf.size() != n)
        throw ShapeError("similarityScaling: slice membership length " +
                         std::to_string(sliceOf.size()) + " vs " + std::to_string(n) + " spots");
    if (sliceCount < 2) throw ParamError("similarityScaling: needs at least two slices");
    if (k < 1) throw ParamError("similarityScaling: k must be positive");

    std::vector<std::vector<std::size_t>> columnsOf(sliceCount);
    for (std::size_t i = 0; i < n; ++i) {
        if (sliceOf[i] >= sliceCount)
            throw ParamError("similarityScaling: slice id " + std::to_string(sliceOf[i]) +
                             " out of range");
        columnsOf[sliceOf[i]].push_back(i);
    }
    for (std::size_t d = 0; d < sliceCount; ++d) {
        const std::size_t avail = columnsOf[d].size() - (includeSelf ? 0 : 1);
        if (columnsOf[d].size() < k || avail < k)
            throw ParamError("similarityScaling: slice " + std::to_string(d) + " has " +
                             std::to_string(columnsOf[d].size()) + " spots, fewer than k=" +
                             std::to_string(k));
    }

    // Per (row, slice): the top-k column set and its mean. Selection breaks
    // ties toward the lower column index; summation runs in descending
    // value order so within-slice spot permutations cannot change the sum.
    std::vector<std::uint32_t> selected(n * sliceCount * k);
    DenseMatrix means(n, sliceCount);
    std::vector<std::pair<double, std::size_t>> scratch;
    for (std::size_t i = 0; i < n; ++i) {
        auto row = h.row(i);
        for (std::size_t d = 0; d < sliceCount; ++d) {
            scratch.clear();
            for (std::size_t col : columnsOf[d]) {
                if (!includeSelf && d == sliceOf[i] && col == i) continue;
                scratch.emplace_back(row[col], col);
            }
            auto better = [](const auto& a, const auto& b) {
                return a.first != b.first ? a.first > b.first : a.second < b.second;
            };
            std::nth_element(scratch.begin(), scratch.begin() + (k - 1), scratch.end(), better);
            std::sort(scratch.begin(), scratch.begin() + k, better);
            double sum = 0.0;
            for (std::size_t s = 0; s < k; ++s) {
                sum += scratch[s].first;
                selected[(i * sliceCount + d) * k + s] = static_cast<std::uint32_t>(scratch[s].second);
            }
            means(i, d) = sum / static_cast<double>(k);
        }
    }

    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t own = sliceOf[i];
        for (std::size_t d = 0; d < sliceCount; ++d) {
            if (d == own) continue;
            const double diff = means(i, own) - means(i, d);
            total += diff * diff;
        }
    }
    const double norm = 1.0 / (static_cast<double>(n) * static_cast<double>(sliceCount - 1));
    std::vector<std::size_t> sliceCopy(sliceOf.begin(), sliceOf.end());
    const Var parents[] = {similarity};
    return t.record(DenseMatrix(1, 1, total * norm), parents,
                    [similarity, sliceCount, k, norm, means = std::move(means),
                     selected = std::move(selected),
                     sliceCopy = std::move(sliceCopy)](Tape& tp, std::size_t self) {
        if (!tp.tracked(similarity.node())) return;
        const double g = tp.adjoint(self)(0, 0);
        DenseMatrix& acc = tp.adjoint(similarity.node());
        const std::size_t n = acc.rows();
        const double invK = 1.0 / static_cast<double>(k);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t own = sliceCopy[i];
            auto ar = acc.row(i);
            for (std::size_t d = 0; d < sliceCount; ++d) {
                if (d == own) continue;
                const double coef = 2.0 * g * norm * (means(i, own) - means(i, d));
                const std::uint32_t* ownSel = selected.data() + (i * sliceCount + own) * k;
                const std::uint32_t* othSel = selected.data() + (i * sliceCount + d) * k;
                for (std::size_t s = 0; s < k; ++s) {
                    ar[ownSel[s]] += coef * invK;
                    ar[othSel[s]] -= coef * invK;
                }
            }
        }
    });
}

} // namespace spotrep::ad
