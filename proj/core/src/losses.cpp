#include "spotrep/losses.hpp"

#include "spotrep/errors.hpp"
#include "spotrep/kmeans.hpp"

#include <cmath>
#include <string>

namespace spotrep {

SimilarityTelescope similarityTelescopeLoss(ad::Tape& tape, const ad::Var& z1, const ad::Var& z2) {
    tape.checkSameTape(z1, "similarityTelescope z1");
    tape.checkSameTape(z2, "similarityTelescope z2");
    if (z1.rows() != z2.rows() || z1.cols() != z2.cols())
        throw ShapeError("similarityTelescope: view shapes differ");

    ad::Var n1 = ad::rowL2Normalize(z1);
    ad::Var n2 = ad::rowL2Normalize(z2);
    ad::Var h = ad::matmul(n1, ad::transpose(n2));
    ad::Var loss = ad::meanSquare(ad::sub(h, ad::transpose(h)));
    return {loss, h};
}

ad::Var reconstructionLoss(ad::Tape& tape, const ad::Var& x, const ad::Var& xhat1,
                           const ad::Var& xhat2) {
    tape.checkSameTape(x, "reconstruction target");
    return ad::add(ad::mseLoss(x, xhat1), ad::mseLoss(x, xhat2));
}

PrototypeSet computePrototypes(const DenseMatrix& embeddings, std::size_t kBase,
                               std::span<const double> multipliers, const SeededRng& rng) {
    if (kBase < 2) throw ParamError("computePrototypes: kBase must be >= 2");
    if (multipliers.empty()) throw ParamError("computePrototypes: no granularities");
    const std::size_t n = embeddings.rows();

    const DenseMatrix normalized = rowL2Normalized(embeddings);

    PrototypeSet set;
    set.levels.reserve(multipliers.size());
    for (std::size_t t = 0; t < multipliers.size(); ++t) {
        // round half up
        const auto kt = static_cast<std::size_t>(
            std::floor(multipliers[t] * static_cast<double>(kBase) + 0.5));
        if (kt < 1 || kt > n)
            throw ParamError("computePrototypes: granularity " + std::to_string(t) +
                             " asks for K=" + std::to_string(kt) + " clusters over " +
                             std::to_string(n) + " spots");
        SeededRng levelRng = rng.fork("level" + std::to_string(t));
        KMeansResult km = kMeansLloyd(normalized, kt, levelRng, KMeansOptions{100, 1e-6});

        // Unit-length centroids; a centroid that cancels to zero falls back
        // to its lowest-index member's direction.
        for (std::size_t c = 0; c < kt; ++c) {
            auto row = km.centroids.row(c);
            double sq = 0.0;
            for (double v : row) sq += v * v;
            double norm = std::sqrt(sq);
            if (norm < kRowNormEpsilon) {
                for (std::size_t i = 0; i < n; ++i) {
                    if (km.assignment[i] != c) continue;
                    std::copy(normalized.row(i).begin(), normalized.row(i).end(), row.begin());
                    break;
                }
                norm = 1.0;
            }
            for (double& v : row) v /= norm;
        }
        set.levels.push_back({std::move(km.centroids), std::move(km.assignment)});
    }
    return set;
}

ad::Var prototypicalLoss(ad::Tape& tape, const ad::Var& embeddings, const PrototypeSet& prototypes,
                         double tau) {
    if (!(tau > 0.0)) throw ParamError("prototypicalLoss: tau must be positive");
    if (prototypes.levels.empty()) throw ParamError("prototypicalLoss: empty prototype set");
    for (const auto& level : prototypes.levels) {
        if (level.centroids.cols() != embeddings.cols())
            throw ShapeError("prototypicalLoss: prototype dim " +
                             std::to_string(level.centroids.cols()) + " vs embedding dim " +
                             std::to_string(embeddings.cols()));
        if (level.assignment.size() != embeddings.rows())
            throw ShapeError("prototypicalLoss: assignment length mismatch");
    }

    ad::Var zn = ad::rowL2Normalize(embeddings);
    std::optional<ad::Var> acc;
    for (const auto& level : prototypes.levels) {
        ad::Var logits = ad::scale(ad::matmul(zn, tape.constant(level.centroids.transposed())),
                                   1.0 / tau);
        ad::Var ce = ad::crossEntropyRows(logits, level.assignment);
        acc = acc ? ad::add(*acc, ce) : ce;
    }
    return ad::scale(*acc, 1.0 / static_cast<double>(prototypes.levels.size()));
}

ad::Var similarityScalingLoss(ad::Tape& tape, const ad::Var& similarity,
                              std::span<const std::size_t> sliceMembership, std::size_t sliceCount,
                              std::size_t k, bool includeSelf) {
    tape.checkSameTape(similarity, "similarityScaling input");
    return ad::similarityScaling(similarity, sliceMembership, sliceCount, k, includeSelf);
}

ad::Var combinedSingleLoss(ad::Tape& tape, const ad::Var& sc, const ad::Var& recon,
                           const LossWeights& weights) {
    tape.checkSameTape(sc, "combinedSingleLoss sc");
    return ad::add(ad::scale(sc, weights.sc), ad::scale(recon, weights.recon));
}

ad::Var combinedMultiLoss(ad::Tape& tape, const MultiLossParts& parts, const LossWeights& weights,
                          std::size_t epoch) {
    tape.checkSameTape(parts.sc, "combinedMultiLoss sc");
    ad::Var total = ad::add(ad::scale(parts.sc, weights.sc), ad::scale(parts.recon, weights.recon));
    if (parts.pcl && epoch >= weights.warmupEpochs)
        total = ad::add(total, ad::scale(*parts.pcl, weights.pcl));
    if (parts.ss) total = ad::add(total, ad::scale(*parts.ss, weights.ss));
    return total;
}

} // namespace spotrep
