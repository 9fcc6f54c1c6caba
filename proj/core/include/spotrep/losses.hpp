#pragma once

#include "spotrep/autodiff.hpp"
#include "spotrep/matrix.hpp"
#include "spotrep/rng.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace spotrep {

/// Loss balancing weights and the constants they travel with. Defaults are
/// the fixed training settings; only the learning rate is searched.
struct LossWeights {
    double sc = 1.0;
    double recon = 0.1;
    double pcl = 0.01;
    double ss = 1.0;
    double tau = 0.75;          // softmax temperature of the prototypical loss
    std::size_t topK = 5;       // top-k size of the similarity-scaling loss
    std::size_t warmupEpochs = 500; // epochs before the prototypical loss joins

    friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

/// Multi-granularity K-means centroids over unit-normalized embeddings,
/// with the spot-to-centroid assignment at each granularity. Prototypes
/// are constants: no gradient flows into them.
struct PrototypeSet {
    struct Level {
        DenseMatrix centroids; // K_t x dim, unit rows
        std::vector<std::size_t> assignment;
    };
    std::vector<Level> levels;

    std::size_t granularities() const noexcept { return levels.size(); }
};

/// Relation-consistency loss between two augmented views: the mean squared
/// gap between the cross-view cosine-similarity matrix and its transpose.
/// The similarity matrix is returned for reuse by the scaling loss.
struct SimilarityTelescope {
    ad::Var loss;
    ad::Var similarity; // H = normalize(Z) * normalize(Z')^T
};
SimilarityTelescope similarityTelescopeLoss(ad::Tape& tape, const ad::Var& z1, const ad::Var& z2);

/// MSE(X, X1) + MSE(X, X2), both means over all entries.
ad::Var reconstructionLoss(ad::Tape& tape, const ad::Var& x, const ad::Var& xhat1,
                           const ad::Var& xhat2);

/// K-means on the unit-normalized embeddings at granularities
/// round(multiplier * kBase), ties rounding up. Centroids are re-normalized
/// to unit length afterwards.
PrototypeSet computePrototypes(const DenseMatrix& embeddings, std::size_t kBase,
                               std::span<const double> multipliers, const SeededRng& rng);

/// Softmax contrast of each spot against the prototypes at every
/// granularity, averaged over spots and granularities.
ad::Var prototypicalLoss(ad::Tape& tape, const ad::Var& embeddings, const PrototypeSet& prototypes,
                         double tau);

/// Eq-style wrapper over ad::similarityScaling; see autodiff.hpp.
ad::Var similarityScalingLoss(ad::Tape& tape, const ad::Var& similarity,
                              std::span<const std::size_t> sliceMembership, std::size_t sliceCount,
                              std::size_t k, bool includeSelf = true);

ad::Var combinedSingleLoss(ad::Tape& tape, const ad::Var& sc, const ad::Var& recon,
                           const LossWeights& weights);

struct MultiLossParts {
    ad::Var sc;
    ad::Var recon;
    std::optional<ad::Var> pcl;
    std::optional<ad::Var> ss;
};

/// Weighted sum of the four losses. The prototypical term participates only
/// from the warm-up epoch on; the scaling term participates from epoch 0.
ad::Var combinedMultiLoss(ad::Tape& tape, const MultiLossParts& parts, const LossWeights& weights,
                          std::size_t epoch);

} // namespace spotrep
