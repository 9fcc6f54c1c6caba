#pragma once

#include "spotrep/data.hpp"
#include "spotrep/graph.hpp"
#include "spotrep/losses.hpp"
#include "spotrep/model.hpp"
#include "spotrep/optim.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace spotrep {

enum class TrainMode { Single, Multi };

struct AugmentSettings {
    double featureMaskRate1 = 0.2;
    double featureMaskRate2 = 0.2;
    double edgeMaskRate1 = 0.2;
    double edgeMaskRate2 = 0.2;
    MaskMode maskMode = MaskMode::Column;

    friend bool operator==(const AugmentSettings&, const AugmentSettings&) = default;
};

struct TrainConfig {
    TrainMode mode = TrainMode::Single;
    std::size_t epochs = 1000;
    double learningRate = 5e-4;
    double weightDecay = 1e-4;
    std::uint64_t seed = 0;
    LossWeights weights;
    AugmentSettings augment;
    std::size_t snnK = 6;
    std::size_t kBase = 0; // expected domain count, used by the prototypical loss
    std::vector<double> pclGranularities{1.0, 1.5, 2.0};
    std::size_t pclRefreshEvery = 1;
    bool ssIncludeSelf = true;
    std::size_t hiddenDim = 256;
    std::size_t latentDim = 64;
    FinalActivation finalActivation = FinalActivation::Relu;
    std::size_t checkpointEvery = 100;
    /// When set, periodic and final checkpoints are written here.
    std::filesystem::path checkpointDir;
};

/// Stable fingerprint of everything that shapes training; checkpoints
/// carry it so stale ones are refused.
std::string trainConfigHash(const TrainConfig& config, std::size_t geneCount);

/// Unweighted loss components of one epoch; weights are recorded in the
/// config echo. The prototypical component is exactly 0 before warm-up.
struct EpochRecord {
    std::size_t epoch = 0;
    double sc = 0.0;
    double recon = 0.0;
    double pcl = 0.0;
    double ss = 0.0;
    double total = 0.0;
};

struct TrainingReport {
    std::vector<EpochRecord> epochs;
    std::uint64_t seed = 0;
    TrainConfig config;
    /// Wall time is reported separately from the serialized report so two
    /// identical runs produce byte-identical report files.
    double wallSeconds = 0.0;
};

struct Checkpoint {
    std::uint32_t version = 1;
    std::string configHash;
    std::uint64_t seed = 0;
    std::size_t epochsCompleted = 0;
    ModelParams params;
    std::vector<AdamSlot> adamSlots;
    std::size_t adamSteps = 0;
    std::optional<PrototypeSet> prototypes;
};

void saveCheckpoint(const Checkpoint& checkpoint, const std::filesystem::path& file);
Checkpoint loadCheckpoint(const std::filesystem::path& file);

struct TrainResult {
    ModelParams params;
    TrainingReport report;
    Checkpoint finalCheckpoint;
    std::vector<std::filesystem::path> checkpointFiles; // periodic checkpoints written
};

/// Full-batch training of the two-view objective: one optimizer step per
/// epoch, deterministic per (config, seed).
TrainResult trainSingle(const MultiSliceDataset& dataset, const SnnGraph& graph,
                        const TrainConfig& config);

/// As trainSingle, plus the similarity-scaling loss every epoch and the
/// prototypical loss from the warm-up epoch on (prototypes recomputed per
/// refresh cadence).
TrainResult trainMulti(const MultiSliceDataset& dataset, const SnnGraph& graph,
                       const TrainConfig& config);

/// Continues a checkpointed run up to config.epochs; the report covers the
/// resumed epochs only. Refuses checkpoints whose config hash differs.
TrainResult resumeTraining(const MultiSliceDataset& dataset, const SnnGraph& graph,
                           const TrainConfig& config, const Checkpoint& checkpoint);

/// Eval-mode embeddings of the full dataset on the unaugmented graph.
DenseMatrix embedDataset(const ModelParams& params, const MultiSliceDataset& dataset,
                         const SnnGraph& graph);

/// Decoded reconstruction of the eval-mode embeddings: the imputed
/// expression matrix (spots x genes).
DenseMatrix imputeExpression(const ModelParams& params, const MultiSliceDataset& dataset,
                             const SnnGraph& graph);

} // namespace spotrep
