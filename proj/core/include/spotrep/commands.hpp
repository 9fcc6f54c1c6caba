#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

/// The CLI commands as plain functions over typed argument structs. The
/// binary in tools/ only parses argv into these. Exit codes: 0 success,
/// 1 usage/validation failure, 2 runtime/numeric failure.
namespace spotrep::cli {

struct SynthArgs {
    std::filesystem::path out;
    std::size_t spots = 900;
    std::size_t genes = 200;
    std::size_t domains = 3;
    std::size_t slices = 1;
    double batchShift = 0.0;
    double rateLow = 1.0;
    double rateHigh = 8.0;
    std::uint64_t seed = 0;
};
int cmdSynth(const SynthArgs& args);

struct PreprocessArgs {
    std::vector<std::filesystem::path> data;
    std::filesystem::path out;
    std::size_t hvgN = 5000;
    double targetSum = 10000.0;
};
int cmdPreprocess(const PreprocessArgs& args);

struct TrainArgs {
    std::vector<std::filesystem::path> data; // overrides config `data`
    std::filesystem::path out;               // overrides config `out`
    std::optional<std::filesystem::path> config;
    std::optional<std::string> mode;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> threads;
    bool lrSearch = false;
    std::optional<std::filesystem::path> resume;
};
int cmdTrain(const TrainArgs& args);

struct EvaluateArgs {
    std::filesystem::path embeddings;
    std::filesystem::path labels;
    std::optional<std::filesystem::path> slices;
    std::size_t k = 0;
    std::uint64_t seed = 0;
    std::filesystem::path out;
};
int cmdEvaluate(const EvaluateArgs& args);

struct AlignArgs {
    std::filesystem::path refEmbeddings;
    std::filesystem::path refLabels;
    std::filesystem::path queryEmbeddings;
    std::optional<std::filesystem::path> queryLabels;
    std::filesystem::path out;
};
int cmdAlign(const AlignArgs& args);

struct ImputeArgs {
    std::filesystem::path checkpoint;
    std::optional<std::filesystem::path> config;
    std::vector<std::filesystem::path> data;
    std::filesystem::path out;
};
int cmdImpute(const ImputeArgs& args);

} // namespace spotrep::cli
