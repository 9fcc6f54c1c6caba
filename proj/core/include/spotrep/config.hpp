#pragma once

#include "spotrep/pipeline.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace spotrep {

/// A run configuration: the flat key/value document consumed by the CLI.
/// Defaults are the fixed training settings; unknown keys are rejected.
struct RunConfig {
    // training
    TrainMode mode = TrainMode::Single;
    std::size_t epochs = 1000;
    std::optional<double> learningRate; // absent => --lr-search required
    double weightDecay = 0.0001;
    std::uint64_t seed = 0;
    std::size_t kBase = 0;

    // losses
    double lambdaSc = 1.0;
    double lambdaRecon = 0.1;
    double lambdaPcl = 0.01;
    double lambdaSs = 1.0;
    double tau = 0.75;
    std::size_t topK = 5;
    std::size_t warmupEpochs = 500;
    std::vector<double> pclGranularities{1.0, 1.5, 2.0};
    std::size_t pclRefreshEvery = 1;
    bool ssIncludeSelf = true;

    // graph / augmentation
    std::size_t snnK = 6;
    double featureMaskRate1 = 0.2;
    double featureMaskRate2 = 0.2;
    double edgeMaskRate1 = 0.2;
    double edgeMaskRate2 = 0.2;
    MaskMode maskMode = MaskMode::Column;

    // model
    std::size_t hiddenDim = 256;
    std::size_t latentDim = 64;
    FinalActivation finalActivation = FinalActivation::Relu;

    // preprocessing
    bool preprocess = true;
    std::size_t hvgN = 5000;
    double targetSum = 10000.0;

    // bookkeeping
    std::size_t checkpointEvery = 100;
    std::size_t threads = 1;

    // paths (flags override)
    std::vector<std::filesystem::path> dataDirs;
    std::filesystem::path outDir;
};

/// Parses a flat `key = value` document (strings quoted or bare, numbers,
/// booleans, [..] arrays of numbers; # starts a comment) into `config`.
/// Throws ConfigError naming the offending key.
void applyConfigFile(RunConfig& config, const std::filesystem::path& file);

/// The same parser over in-memory text; `origin` labels error messages.
void applyConfigText(RunConfig& config, const std::string& text, const std::string& origin);

/// The training-relevant part of the run configuration.
TrainConfig makeTrainConfig(const RunConfig& config);

} // namespace spotrep
