#pragma once

#include "spotrep/matrix.hpp"
#include "spotrep/rng.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace spotrep {

/// One SRT sample: expression counts, spatial coordinates and optional
/// per-spot domain labels.
struct Slice {
    DenseMatrix expression; // spots x genes
    DenseMatrix coords;     // spots x 2
    std::vector<std::string> geneNames;
    std::optional<std::vector<std::string>> labels;
    std::string sliceId;

    std::size_t spotCount() const noexcept { return expression.rows(); }
    std::size_t geneCount() const noexcept { return expression.cols(); }

    /// Enforces the shape invariants; throws IngestError on violation.
    void validate() const;
};

/// An ordered list of slices sharing one gene vocabulary.
struct MultiSliceDataset {
    std::vector<Slice> slices;

    std::size_t sliceCount() const noexcept { return slices.size(); }
    std::size_t totalSpots() const;
    std::size_t geneCount() const { return slices.empty() ? 0 : slices.front().geneCount(); }
    const std::vector<std::string>& geneNames() const { return slices.front().geneNames; }
    bool hasLabels() const;

    /// Expression stacked by slice; global spot index = slice offset + row.
    DenseMatrix concatenatedExpression() const;
    DenseMatrix concatenatedCoords() const;
    std::vector<std::size_t> sliceMembership() const;
    std::vector<std::string> concatenatedLabels() const;
};

/// Loads one slice directory: `expression.csv` (header = gene names) or
/// `expression.mtx` + `genes.txt`, plus `coords.csv` and optional
/// `labels.csv`. Errors carry file and line context.
Slice loadSlice(const std::filesystem::path& directory);

/// Writes a slice in the directory layout loadSlice reads (CSV form).
void saveSlice(const Slice& slice, const std::filesystem::path& directory);

/// Keeps the n genes with the highest variance of log1p(counts) across all
/// spots of all slices. Kept genes stay in their original order.
MultiSliceDataset selectHvg(const MultiSliceDataset& dataset, std::size_t n);

/// Scales every spot to `targetSum` total counts, then applies log(1+x).
Slice normalizeCpmLog1p(const Slice& slice, double targetSum = 10000.0);
MultiSliceDataset normalizeCpmLog1p(const MultiSliceDataset& dataset, double targetSum = 10000.0);

/// Assembles slices into one dataset. Gene vocabularies are intersected
/// and reordered to the first slice's order when they differ.
MultiSliceDataset concatenateSlices(std::vector<Slice> slices);

enum class NoiseModel { Poisson, None };

/// Desk-scale synthetic tissue: horizontal band domains on a jittered unit
/// grid, Poisson counts from per-domain gene rates, and an optional
/// per-slice log-normal batch shift.
struct SyntheticSpec {
    std::size_t spotsPerSlice = 900;
    std::size_t geneCount = 200;
    std::size_t domainCount = 3; // at least 2
    std::size_t sliceCount = 1;
    double rateLow = 1.0;   // background expression rate
    double rateHigh = 8.0;  // marker-block expression rate
    DenseMatrix rates;      // optional explicit domainCount x geneCount rates
    NoiseModel noise = NoiseModel::Poisson;
    double batchShift = 0.0; // sigma_b; slices beyond the first scale each
                             // gene's rate by exp(batchShift * N(0,1))
    double jitter = 0.25;    // grid-cell fraction
    std::uint64_t seed = 0;
};

/// Marker-block rate matrix: gene g is elevated in domain g mod domains.
DenseMatrix defaultDomainRates(std::size_t domains, std::size_t genes,
                               double low, double high);

MultiSliceDataset generateSynthetic(const SyntheticSpec& spec);

} // namespace spotrep
