#include "spotrep/commands.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <optional>
#include <string>

namespace {

using namespace spotrep::cli;

int runParsed(CLI::App& app, int argc, char** argv, const std::function<int()>& dispatch) {
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1; // --help exits cleanly, everything else is usage
    }
    return dispatch();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Self-supervised representation learning for spatially resolved transcriptomics"};
    app.require_subcommand(1);

    // shared option storage
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    std::string out;

    SynthArgs synth;
    auto* synthCmd = app.add_subcommand("synth", "Generate a synthetic SRT dataset");
    synthCmd->add_option("--out", out, "Output directory")->required();
    synthCmd->add_option("--spots", synth.spots, "Spots per slice");
    synthCmd->add_option("--genes", synth.genes, "Gene count");
    synthCmd->add_option("--domains", synth.domains, "Spatial domain count");
    synthCmd->add_option("--slices", synth.slices, "Slice count");
    synthCmd->add_option("--batch-shift", synth.batchShift, "Per-slice batch shift sigma");
    synthCmd->add_option("--rate-low", synth.rateLow, "Background expression rate");
    synthCmd->add_option("--rate-high", synth.rateHigh, "Marker expression rate");
    synthCmd->add_option("--seed", seed, "Random seed");

    PreprocessArgs preprocess;
    auto* preCmd = app.add_subcommand("preprocess", "Select HVGs and normalize slices");
    preCmd->add_option("--data", preprocess.data, "Slice directories")->required();
    preCmd->add_option("--out", out, "Output directory")->required();
    preCmd->add_option("--hvg", preprocess.hvgN, "Number of highly variable genes to keep");
    preCmd->add_option("--target-sum", preprocess.targetSum, "Per-spot normalization target");

    TrainArgs train;
    std::string trainMode;
    std::string trainConfig, trainResume;
    auto* trainCmd = app.add_subcommand("train", "Train the representation model");
    trainCmd->add_option("--data", train.data, "Slice directories (overrides config)");
    trainCmd->add_option("--out", out, "Output directory (overrides config)");
    trainCmd->add_option("--config", trainConfig, "Run configuration file");
    trainCmd->add_option("--mode", trainMode, "single or multi (overrides config)");
    trainCmd->add_option("--seed", seed, "Random seed (overrides config)");
    trainCmd->add_option("--threads", threads, "Concurrent trainings during --lr-search");
    trainCmd->add_flag("--lr-search", train.lrSearch,
                       "Search the learning-rate grid by silhouette score");
    trainCmd->add_option("--resume", trainResume, "Continue from a checkpoint file");

    EvaluateArgs evaluate;
    std::string evalSlices;
    auto* evalCmd = app.add_subcommand("evaluate", "Cluster embeddings and score them");
    evalCmd->add_option("--embeddings", evaluate.embeddings, "Embeddings CSV")->required();
    evalCmd->add_option("--labels", evaluate.labels, "Ground-truth labels CSV")->required();
    evalCmd->add_option("--slices", evalSlices, "Slice membership CSV (enables silhouette_batch)");
    evalCmd->add_option("--k", evaluate.k, "Number of clusters")->required();
    evalCmd->add_option("--seed", seed, "Random seed");
    evalCmd->add_option("--out", out, "Output directory")->required();

    AlignArgs align;
    std::string alignQueryLabels;
    auto* alignCmd = app.add_subcommand("align", "Transfer labels from a reference slice");
    alignCmd->add_option("--ref-embeddings", align.refEmbeddings, "Reference embeddings CSV")
        ->required();
    alignCmd->add_option("--ref-labels", align.refLabels, "Reference labels CSV")->required();
    alignCmd->add_option("--query-embeddings", align.queryEmbeddings, "Query embeddings CSV")
        ->required();
    alignCmd->add_option("--query-labels", alignQueryLabels,
                         "Query ground-truth labels CSV (enables LTARI)");
    alignCmd->add_option("--out", out, "Output directory")->required();

    ImputeArgs impute;
    std::string imputeConfig;
    auto* imputeCmd = app.add_subcommand("impute", "Reconstruct expression from a checkpoint");
    imputeCmd->add_option("--checkpoint", impute.checkpoint, "Checkpoint file")->required();
    imputeCmd->add_option("--config", imputeConfig, "Run configuration used for training");
    imputeCmd->add_option("--data", impute.data, "Slice directories")->required();
    imputeCmd->add_option("--out", out, "Output directory")->required();

    return runParsed(app, argc, argv, [&]() -> int {
        if (synthCmd->parsed()) {
            synth.out = out;
            synth.seed = seed;
            return cmdSynth(synth);
        }
        if (preCmd->parsed()) {
            preprocess.out = out;
            return cmdPreprocess(preprocess);
        }
        if (trainCmd->parsed()) {
            if (!out.empty()) train.out = out;
            if (!trainConfig.empty()) train.config = trainConfig;
            if (!trainMode.empty()) train.mode = trainMode;
            if (trainCmd->count("--seed") > 0) train.seed = seed;
            if (trainCmd->count("--threads") > 0) train.threads = threads;
            if (!trainResume.empty()) train.resume = trainResume;
            return cmdTrain(train);
        }
        if (evalCmd->parsed()) {
            evaluate.out = out;
            evaluate.seed = seed;
            if (!evalSlices.empty()) evaluate.slices = evalSlices;
            return cmdEvaluate(evaluate);
        }
        if (alignCmd->parsed()) {
            align.out = out;
            if (!alignQueryLabels.empty()) align.queryLabels = alignQueryLabels;
            return cmdAlign(align);
        }
        if (imputeCmd->parsed()) {
            impute.out = out;
            if (!imputeConfig.empty()) impute.config = imputeConfig;
            return cmdImpute(impute);
        }
        return 1;
    });
}
