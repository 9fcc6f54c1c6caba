#include "spotrep/pipeline.hpp"

#include "spotrep/artifacts.hpp"
#include "spotrep/errors.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>

namespace spotrep {

namespace {

using Json = nlohmann::ordered_json;

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

const char* maskModeName(MaskMode m) { return m == MaskMode::Column ? "column" : "entry"; }
const char* activationName(FinalActivation a) {
    return a == FinalActivation::Relu ? "relu" : "none";
}
const char* modeName(TrainMode m) { return m == TrainMode::Single ? "single" : "multi"; }

std::string canonicalTrainConfig(const TrainConfig& c, std::size_t geneCount) {
    std::string s;
    s += "mode=" + std::string(modeName(c.mode)) + "\n";
    s += "epochs=" + std::to_string(c.epochs) + "\n";
    s += "learning_rate=" + fmt(c.learningRate) + "\n";
    s += "weight_decay=" + fmt(c.weightDecay) + "\n";
    s += "seed=" + std::to_string(c.seed) + "\n";
    s += "lambda_sc=" + fmt(c.weights.sc) + "\n";
    s += "lambda_recon=" + fmt(c.weights.recon) + "\n";
    s += "lambda_pcl=" + fmt(c.weights.pcl) + "\n";
    s += "lambda_ss=" + fmt(c.weights.ss) + "\n";
    s += "tau=" + fmt(c.weights.tau) + "\n";
    s += "top_k=" + std::to_string(c.weights.topK) + "\n";
    s += "warmup_epochs=" + std::to_string(c.weights.warmupEpochs) + "\n";
    s += "feature_mask_rate_1=" + fmt(c.augment.featureMaskRate1) + "\n";
    s += "feature_mask_rate_2=" + fmt(c.augment.featureMaskRate2) + "\n";
    s += "edge_mask_rate_1=" + fmt(c.augment.edgeMaskRate1) + "\n";
    s += "edge_mask_rate_2=" + fmt(c.augment.edgeMaskRate2) + "\n";
    s += "mask_mode=" + std::string(maskModeName(c.augment.maskMode)) + "\n";
    s += "snn_k=" + std::to_string(c.snnK) + "\n";
    s += "k_base=" + std::to_string(c.kBase) + "\n";
    s += "pcl_granularities=";
    for (std::size_t i = 0; i < c.pclGranularities.size(); ++i) {
        if (i) s += ',';
        s += fmt(c.pclGranularities[i]);
    }
    s += "\n";
    s += "pcl_refresh_every=" + std::to_string(c.pclRefreshEvery) + "\n";
    s += "ss_include_self=" + std::string(c.ssIncludeSelf ? "true" : "false") + "\n";
    s += "hidden_dim=" + std::to_string(c.hiddenDim) + "\n";
    s += "latent_dim=" + std::to_string(c.latentDim) + "\n";
    s += "final_activation=" + std::string(activationName(c.finalActivation)) + "\n";
    s += "gene_count=" + std::to_string(geneCount) + "\n";
    return s;
}

// ---- checkpoint JSON codec ----

Json matrixToJson(const DenseMatrix& m) {
    Json j;
    j["rows"] = m.rows();
    j["cols"] = m.cols();
    j["values"] = std::vector<double>(m.values().begin(), m.values().end());
    return j;
}

DenseMatrix matrixFromJson(const Json& j) {
    DenseMatrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
    const auto values = j.at("values").get<std::vector<double>>();
    if (values.size() != m.size()) throw IngestError("checkpoint: tensor size mismatch");
    std::copy(values.begin(), values.end(), m.values().begin());
    return m;
}

Json statsToJson(const ad::BatchNormStats& s) {
    Json j;
    j["initialized"] = s.initialized;
    j["mean"] = s.mean;
    j["var"] = s.var;
    return j;
}

ad::BatchNormStats statsFromJson(const Json& j) {
    ad::BatchNormStats s;
    s.initialized = j.at("initialized").get<bool>();
    s.mean = j.at("mean").get<std::vector<double>>();
    s.var = j.at("var").get<std::vector<double>>();
    return s;
}

struct TrainState {
    ModelParams params;
    AdamOptimizer optimizer;
    std::optional<PrototypeSet> prototypes;
    std::size_t startEpoch = 0;
};

/// Validation shared by both modes; throws before any work happens.
void validateConfig(const MultiSliceDataset& dataset, const SnnGraph& graph,
                    const TrainConfig& config) {
    if (config.epochs < 1) throw ParamError("train: epochs must be >= 1");
    if (!(config.learningRate > 0.0)) throw ParamError("train: learning rate must be positive");
    if (config.weightDecay < 0.0) throw ParamError("train: weight decay must be >= 0");
    if (graph.spotCount() != dataset.totalSpots())
        throw ShapeError("train: graph has " + std::to_string(graph.spotCount()) +
                         " spots but dataset has " + std::to_string(dataset.totalSpots()));

    if (config.mode == TrainMode::Multi) {
        if (dataset.sliceCount() < 2)
            throw ParamError("train: multi mode requires at least two slices");
        if (config.weights.ss != 0.0) {
            for (const auto& s : dataset.slices)
                if (s.spotCount() < config.weights.topK)
                    throw ParamError("train: slice '" + s.sliceId + "' has fewer than top_k=" +
                                     std::to_string(config.weights.topK) + " spots");
        }
        const bool pclActive = config.weights.pcl != 0.0 && config.epochs > config.weights.warmupEpochs;
        if (pclActive) {
            if (config.kBase < 2)
                throw ParamError("train: k_base must be >= 2 when the prototypical loss is active");
            if (config.pclGranularities.empty())
                throw ParamError("train: pcl_granularities must not be empty");
            for (double mult : config.pclGranularities) {
                const auto kt = static_cast<std::size_t>(
                    std::floor(mult * static_cast<double>(config.kBase) + 0.5));
                if (kt < 1 || kt > dataset.totalSpots())
                    throw ParamError("train: granularity " + fmt(mult) + " yields K=" +
                                     std::to_string(kt) + " clusters over " +
                                     std::to_string(dataset.totalSpots()) + " spots");
            }
            if (config.pclRefreshEvery < 1)
                throw ParamError("train: pcl_refresh_every must be >= 1");
        }
    }
}

TrainResult runTraining(const MultiSliceDataset& dataset, const SnnGraph& graph,
                        const TrainConfig& config, std::optional<TrainState> resumed) {
    validateConfig(dataset, graph, config);

    const DenseMatrix features = dataset.concatenatedExpression();
    if (!features.allFinite()) throw NumericError("train: non-finite expression values");
    const std::vector<std::size_t> membership = graph.sliceMembership;
    const std::string configHash = trainConfigHash(config, dataset.geneCount());

    TrainState state;
    if (resumed) {
        state = std::move(*resumed);
    } else {
        ModelConfig mc{dataset.geneCount(), config.hiddenDim, config.latentDim,
                       config.finalActivation};
        state.params = initParams(mc, config.seed);
        state.optimizer = AdamOptimizer(AdamConfig{config.learningRate, config.weightDecay});
    }

    TrainResult result;
    result.report.seed = config.seed;
    result.report.config = config;

    const auto t0 = std::chrono::steady_clock::now();
    const bool multi = config.mode == TrainMode::Multi;

    for (std::size_t epoch = state.startEpoch; epoch < config.epochs; ++epoch) {
        SeededRng rng1(config.seed, "augment/view1/epoch" + std::to_string(epoch));
        SeededRng rng2(config.seed, "augment/view2/epoch" + std::to_string(epoch));
        AugmentedView v1 = augment(graph, features, config.augment.featureMaskRate1,
                                   config.augment.edgeMaskRate1, rng1, config.augment.maskMode);
        AugmentedView v2 = augment(graph, features, config.augment.featureMaskRate2,
                                   config.augment.edgeMaskRate2, rng2, config.augment.maskMode);
        const SparseAdjacency op1 = gcnNormalize(v1.maskedAdjacency);
        const SparseAdjacency op2 = gcnNormalize(v2.maskedAdjacency);

        ad::Tape tape;
        ModelVars mv = liftParams(tape, state.params, /*trainable=*/true);
        ad::Var x1 = tape.constant(std::move(v1.maskedFeatures));
        ad::Var x2 = tape.constant(std::move(v2.maskedFeatures));

        ad::Var z1 = encode(tape, mv.encoder, x1, op1, ad::BnMode::Train);
        ad::Var z2 = encode(tape, mv.encoder, x2, op2, ad::BnMode::Train);

        SimilarityTelescope telescope = similarityTelescopeLoss(tape, z1, z2);

        ad::Var target = tape.constant(features);
        ad::Var xhat1 = decode(tape, mv.decoder, z1, ad::BnMode::Train);
        ad::Var xhat2 = decode(tape, mv.decoder, z2, ad::BnMode::Train);
        ad::Var recon = reconstructionLoss(tape, target, xhat1, xhat2);

        MultiLossParts parts{telescope.loss, recon, std::nullopt, std::nullopt};
        if (multi && config.weights.ss != 0.0)
            parts.ss = similarityScalingLoss(tape, telescope.similarity, membership,
                                             dataset.sliceCount(), config.weights.topK,
                                             config.ssIncludeSelf);
        if (multi && config.weights.pcl != 0.0 && epoch >= config.weights.warmupEpochs) {
            const std::size_t sinceWarmup = epoch - config.weights.warmupEpochs;
            if (!state.prototypes || sinceWarmup % config.pclRefreshEvery == 0) {
                SeededRng protoRng(config.seed, "prototypes/epoch" + std::to_string(epoch));
                state.prototypes = computePrototypes(z2.value(), config.kBase,
                                                     config.pclGranularities, protoRng);
            }
            parts.pcl = prototypicalLoss(tape, z1, *state.prototypes, config.weights.tau);
        }

        ad::Var total = multi ? combinedMultiLoss(tape, parts, config.weights, epoch)
                              : combinedSingleLoss(tape, parts.sc, parts.recon, config.weights);

        EpochRecord record;
        record.epoch = epoch;
        record.sc = parts.sc.scalar();
        record.recon = parts.recon.scalar();
        record.pcl = parts.pcl ? parts.pcl->scalar() : 0.0;
        record.ss = parts.ss ? parts.ss->scalar() : 0.0;
        record.total = total.scalar();
        if (!std::isfinite(record.total))
            throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch));
        result.report.epochs.push_back(record);

        std::vector<DenseMatrix> grads = tape.gradients(total, mv.leaves);
        std::vector<DenseMatrix*> tensors;
        tensors.reserve(grads.size());
        state.params.forEachTensor(
            [&](const std::string&, DenseMatrix& t) { tensors.push_back(&t); });
        state.optimizer.step(tensors, grads);

        const bool lastEpoch = epoch + 1 == config.epochs;
        if (!config.checkpointDir.empty() && config.checkpointEvery > 0 && !lastEpoch &&
            (epoch + 1) % config.checkpointEvery == 0) {
            Checkpoint ck{1,
                          configHash,
                          config.seed,
                          epoch + 1,
                          state.params,
                          state.optimizer.slots(),
                          state.optimizer.stepCount(),
                          state.prototypes};
            char name[40];
            std::snprintf(name, sizeof name, "checkpoint_%06zu.json", epoch + 1);
            const std::filesystem::path file = config.checkpointDir / name;
            std::filesystem::create_directories(config.checkpointDir);
            saveCheckpoint(ck, file);
            result.checkpointFiles.push_back(file);
        }
    }

    result.report.wallSeconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.finalCheckpoint = Checkpoint{1,
                                        configHash,
                                        config.seed,
                                        config.epochs,
                                        state.params,
                                        state.optimizer.slots(),
                                        state.optimizer.stepCount(),
                                        state.prototypes};
    result.params = std::move(state.params);
    return result;
}

} // namespace

std::string trainConfigHash(const TrainConfig& config, std::size_t geneCount) {
    return artifacts::fnv1a64Hex(canonicalTrainConfig(config, geneCount));
}

void saveCheckpoint(const Checkpoint& checkpoint, const std::filesystem::path& file) {
    Json j;
    j["format_version"] = checkpoint.version;
    j["config_hash"] = checkpoint.configHash;
    j["seed"] = checkpoint.seed;
    j["epochs_completed"] = checkpoint.epochsCompleted;

    Json model;
    model["gene_count"] = checkpoint.params.config.geneCount;
    model["hidden_dim"] = checkpoint.params.config.hiddenDim;
    model["latent_dim"] = checkpoint.params.config.latentDim;
    model["final_activation"] = activationName(checkpoint.params.config.finalActivation);
    Json tensors;
    checkpoint.params.forEachTensor([&](const std::string& name, const DenseMatrix& m) {
        tensors[name] = matrixToJson(m);
    });
    model["tensors"] = std::move(tensors);
    Json bn;
    bn["encoder.bn1"] = statsToJson(checkpoint.params.encoder.bn1.stats);
    bn["encoder.bn2"] = statsToJson(checkpoint.params.encoder.bn2.stats);
    bn["decoder.bn1"] = statsToJson(checkpoint.params.decoder.bn1.stats);
    model["batch_norm"] = std::move(bn);
    j["model"] = std::move(model);

    Json opt;
    opt["steps"] = checkpoint.adamSteps;
    opt["slots"] = Json::array();
    for (const auto& slot : checkpoint.adamSlots) {
        Json s;
        s["m"] = matrixToJson(slot.m);
        s["v"] = matrixToJson(slot.v);
        opt["slots"].push_back(std::move(s));
    }
    j["optimizer"] = std::move(opt);

    if (checkpoint.prototypes) {
        Json levels = Json::array();
        for (const auto& level : checkpoint.prototypes->levels) {
            Json l;
            l["centroids"] = matrixToJson(level.centroids);
            l["assignment"] = level.assignment;
            levels.push_back(std::move(l));
        }
        j["prototypes"] = std::move(levels);
    } else {
        j["prototypes"] = nullptr;
    }

    artifacts::writeFileAtomic(file, j.dump() + "\n");
}

Checkpoint loadCheckpoint(const std::filesystem::path& file) {
    Json j;
    try {
        j = Json::parse(artifacts::readFile(file));
    } catch (const nlohmann::json::exception& e) {
        throw IngestError("checkpoint parse failed: " + file.string() + ": " + e.what());
    }
    try {
        Checkpoint ck;
        ck.version = j.at("format_version").get<std::uint32_t>();
        if (ck.version != 1)
            throw IngestError("unsupported checkpoint version " + std::to_string(ck.version));
        ck.configHash = j.at("config_hash").get<std::string>();
        ck.seed = j.at("seed").get<std::uint64_t>();
        ck.epochsCompleted = j.at("epochs_completed").get<std::size_t>();

        const Json& model = j.at("model");
        ModelConfig mc;
        mc.geneCount = model.at("gene_count").get<std::size_t>();
        mc.hiddenDim = model.at("hidden_dim").get<std::size_t>();
        mc.latentDim = model.at("latent_dim").get<std::size_t>();
        mc.finalActivation = model.at("final_activation").get<std::string>() == "relu"
                                 ? FinalActivation::Relu
                                 : FinalActivation::None;
        ck.params.config = mc;
        const Json& tensors = model.at("tensors");
        ck.params.forEachTensor([&](const std::string& name, DenseMatrix& m) {
            m = matrixFromJson(tensors.at(name));
        });
        const Json& bn = model.at("batch_norm");
        ck.params.encoder.bn1.stats = statsFromJson(bn.at("encoder.bn1"));
        ck.params.encoder.bn2.stats = statsFromJson(bn.at("encoder.bn2"));
        ck.params.decoder.bn1.stats = statsFromJson(bn.at("decoder.bn1"));

        const Json& opt = j.at("optimizer");
        ck.adamSteps = opt.at("steps").get<std::size_t>();
        for (const Json& s : opt.at("slots"))
            ck.adamSlots.push_back({matrixFromJson(s.at("m")), matrixFromJson(s.at("v"))});

        const Json& protos = j.at("prototypes");
        if (!protos.is_null()) {
            PrototypeSet set;
            for (const Json& l : protos) {
                PrototypeSet::Level level;
                level.centroids = matrixFromJson(l.at("centroids"));
                level.assignment = l.at("assignment").get<std::vector<std::size_t>>();
                set.levels.push_back(std::move(level));
            }
            ck.prototypes = std::move(set);
        }
        return ck;
    } catch (const nlohmann::json::exception& e) {
        throw IngestError("malformed checkpoint " + file.string() + ": " + e.what());
    }
}

TrainResult trainSingle(const MultiSliceDataset& dataset, const SnnGraph& graph,
                        const TrainConfig& config) {
    if (config.mode != TrainMode::Single)
        throw ParamError("trainSingle: config.mode must be single");
    if (dataset.sliceCount() != 1)
        throw ParamError("trainSingle: expected a single-slice dataset, got " +
                         std::to_string(dataset.sliceCount()) + " slices");
    return runTraining(dataset, graph, config, std::nullopt);
}

TrainResult trainMulti(const MultiSliceDataset& dataset, const SnnGraph& graph,
                       const TrainConfig& config) {
    if (config.mode != TrainMode::Multi)
        throw ParamError("trainMulti: config.mode must be multi");
    return runTraining(dataset, graph, config, std::nullopt);
}

TrainResult resumeTraining(const MultiSliceDataset& dataset, const SnnGraph& graph,
                           const TrainConfig& config, const Checkpoint& checkpoint) {
    const std::string expected = trainConfigHash(config, dataset.geneCount());
    if (checkpoint.configHash != expected)
        throw StateError("resume: checkpoint was trained under a different configuration");
    if (checkpoint.epochsCompleted > config.epochs)
        throw ParamError("resume: checkpoint already has " +
                         std::to_string(checkpoint.epochsCompleted) + " epochs, config asks for " +
                         std::to_string(config.epochs));
    TrainState state;
    state.params = checkpoint.params;
    state.optimizer = AdamOptimizer(AdamConfig{config.learningRate, config.weightDecay});
    state.optimizer.restore(checkpoint.adamSlots, checkpoint.adamSteps);
    state.prototypes = checkpoint.prototypes;
    state.startEpoch = checkpoint.epochsCompleted;
    return runTraining(dataset, graph, config, std::move(state));
}

DenseMatrix embedDataset(const ModelParams& params, const MultiSliceDataset& dataset,
                         const SnnGraph& graph) {
    return inferEmbeddings(params, dataset.concatenatedExpression(), graph.normalized);
}

DenseMatrix imputeExpression(const ModelParams& params, const MultiSliceDataset& dataset,
                             const SnnGraph& graph) {
    ModelParams frozen = params;
    ad::Tape tape;
    ModelVars vars = liftParams(tape, frozen, /*trainable=*/false);
    ad::Var x = tape.constant(dataset.concatenatedExpression());
    ad::Var z = encode(tape, vars.encoder, x, graph.normalized, ad::BnMode::Eval);
    return decode(tape, vars.decoder, z, ad::BnMode::Eval).value();
}

} // namespace spotrep
