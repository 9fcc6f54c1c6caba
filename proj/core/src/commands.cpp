#include "spotrep/commands.hpp"

#include "spotrep/artifacts.hpp"
#include "spotrep/config.hpp"
#include "spotrep/errors.hpp"
#include "spotrep/lrsearch.hpp"
#include "spotrep/metrics.hpp"
#include "spotrep/pipeline.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <functional>
#include <iostream>

namespace spotrep::cli {

namespace {

using Json = nlohmann::ordered_json;

/// Runs `validate` (failures exit 1), then `work` (failures exit 2).
template <typename Loaded>
int phased(const std::function<Loaded()>& validate,
           const std::function<void(Loaded&)>& work) {
    std::optional<Loaded> loaded;
    try {
        loaded.emplace(validate());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    try {
        work(*loaded);
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

MultiSliceDataset loadDataset(const std::vector<std::filesystem::path>& dirs) {
    if (dirs.empty()) throw ParamError("no input data directories given");
    std::vector<Slice> slices;
    slices.reserve(dirs.size());
    for (const auto& dir : dirs) slices.push_back(loadSlice(dir));
    return concatenateSlices(std::move(slices));
}

MultiSliceDataset preprocessDataset(MultiSliceDataset dataset, const RunConfig& cfg) {
    if (!cfg.preprocess) return dataset;
    dataset = selectHvg(dataset, cfg.hvgN);
    return normalizeCpmLog1p(dataset, cfg.targetSum);
}

Json configEcho(const RunConfig& c) {
    Json j;
    j["mode"] = c.mode == TrainMode::Single ? "single" : "multi";
    j["epochs"] = c.epochs;
    if (c.learningRate)
        j["learning_rate"] = *c.learningRate;
    else
        j["learning_rate"] = nullptr;
    j["weight_decay"] = c.weightDecay;
    j["seed"] = c.seed;
    j["k_base"] = c.kBase;
    j["lambda_sc"] = c.lambdaSc;
    j["lambda_recon"] = c.lambdaRecon;
    j["lambda_pcl"] = c.lambdaPcl;
    j["lambda_ss"] = c.lambdaSs;
    j["tau"] = c.tau;
    j["top_k"] = c.topK;
    j["warmup_epochs"] = c.warmupEpochs;
    j["pcl_granularities"] = c.pclGranularities;
    j["pcl_refresh_every"] = c.pclRefreshEvery;
    j["ss_include_self"] = c.ssIncludeSelf;
    j["snn_k"] = c.snnK;
    j["feature_mask_rate_1"] = c.featureMaskRate1;
    j["feature_mask_rate_2"] = c.featureMaskRate2;
    j["edge_mask_rate_1"] = c.edgeMaskRate1;
    j["edge_mask_rate_2"] = c.edgeMaskRate2;
    j["mask_mode"] = c.maskMode == MaskMode::Column ? "column" : "entry";
    j["hidden_dim"] = c.hiddenDim;
    j["latent_dim"] = c.latentDim;
    j["final_activation"] = c.finalActivation == FinalActivation::Relu ? "relu" : "none";
    j["preprocess"] = c.preprocess;
    j["hvg_n"] = c.hvgN;
    j["target_sum"] = c.targetSum;
    j["checkpoint_every"] = c.checkpointEvery;
    return j;
}

std::string reportJson(const TrainingReport& report, const RunConfig& cfg,
                       const std::optional<LrSearchResult>& lrSearch) {
    Json j;
    j["seed"] = report.seed;
    j["config"] = configEcho(cfg);
    if (lrSearch) {
        Json s;
        s["grid"] = Json::array();
        for (const auto& e : lrSearch->entries) {
            Json entry;
            entry["learning_rate"] = e.learningRate;
            entry["silhouette"] = e.silhouette;
            s["grid"].push_back(std::move(entry));
        }
        s["selected"] = lrSearch->bestLearningRate;
        j["lr_search"] = std::move(s);
    } else {
        j["lr_search"] = nullptr;
    }
    j["epochs"] = Json::array();
    for (const auto& e : report.epochs) {
        Json r;
        r["epoch"] = e.epoch;
        r["sc"] = e.sc;
        r["recon"] = e.recon;
        r["pcl"] = e.pcl;
        r["ss"] = e.ss;
        r["total"] = e.total;
        j["epochs"].push_back(std::move(r));
    }
    if (!report.epochs.empty()) {
        const auto& e = report.epochs.back();
        Json f;
        f["epoch"] = e.epoch;
        f["sc"] = e.sc;
        f["recon"] = e.recon;
        f["pcl"] = e.pcl;
        f["ss"] = e.ss;
        f["total"] = e.total;
        j["final"] = std::move(f);
    } else {
        j["final"] = nullptr;
    }
    return j.dump(2) + "\n";
}

} // namespace

int cmdSynth(const SynthArgs& args) {
    struct Loaded {
        SyntheticSpec spec;
    };
    return phased<Loaded>(
        [&]() -> Loaded {
            if (args.out.empty()) throw ParamError("synth: --out is required");
            SyntheticSpec spec;
            spec.spotsPerSlice = args.spots;
            spec.geneCount = args.genes;
            spec.domainCount = args.domains;
            spec.sliceCount = args.slices;
            spec.batchShift = args.batchShift;
            spec.rateLow = args.rateLow;
            spec.rateHigh = args.rateHigh;
            spec.seed = args.seed;
            if (spec.domainCount < 2) throw ParamError("synth: --domains must be >= 2");
            if (spec.batchShift < 0.0) throw ParamError("synth: --batch-shift must be >= 0");
            return Loaded{spec};
        },
        [&](Loaded& l) {
            const MultiSliceDataset dataset = generateSynthetic(l.spec);
            artifacts::Bundle bundle(args.out);
            for (const auto& slice : dataset.slices) {
                const auto dir = args.out / slice.sliceId;
                saveSlice(slice, dir);
                bundle.recordExisting(dir / "expression.csv");
                bundle.recordExisting(dir / "coords.csv");
                bundle.recordExisting(dir / "labels.csv");
            }
            bundle.writeManifest();
            std::cout << "wrote " << dataset.sliceCount() << " slice(s), "
                      << dataset.totalSpots() << " spots to " << args.out.string() << "\n";
        });
}

int cmdPreprocess(const PreprocessArgs& args) {
    struct Loaded {
        MultiSliceDataset dataset;
    };
    return phased<Loaded>(
        [&]() -> Loaded {
            if (args.out.empty()) throw ParamError("preprocess: --out is required");
            MultiSliceDataset dataset = loadDataset(args.data);
            dataset = selectHvg(dataset, args.hvgN);
            return Loaded{normalizeCpmLog1p(dataset, args.targetSum)};
        },
        [&](Loaded& l) {
            artifacts::Bundle bundle(args.out);
            for (const auto& slice : l.dataset.slices) {
                const auto dir = args.out / slice.sliceId;
                saveSlice(slice, dir);
                bundle.recordExisting(dir / "expression.csv");
                bundle.recordExisting(dir / "coords.csv");
                if (slice.labels) bundle.recordExisting(dir / "labels.csv");
            }
            bundle.writeManifest();
            std::cout << "preprocessed " << l.dataset.sliceCount() << " slice(s), kept "
                      << l.dataset.geneCount() << " genes\n";
        });
}

int cmdTrain(const TrainArgs& args) {
    struct Loaded {
        RunConfig cfg;
        MultiSliceDataset dataset;
        SnnGraph graph;
        std::optional<Checkpoint> resume;
    };
    return phased<Loaded>(
        [&]() -> Loaded {
            RunConfig cfg;
            if (args.config) applyConfigFile(cfg, *args.config);
            if (!args.data.empty()) cfg.dataDirs = args.data;
            if (!args.out.empty()) cfg.outDir = args.out;
            if (args.seed) cfg.seed = *args.seed;
            if (args.threads) cfg.threads = *args.threads;
            if (args.mode) {
                if (*args.mode == "single")
                    cfg.mode = TrainMode::Single;
                else if (*args.mode == "multi")
                    cfg.mode = TrainMode::Multi;
                else
                    throw ConfigError("--mode must be 'single' or 'multi'");
            }
            if (cfg.outDir.empty()) throw ParamError("train: --out is required");
            if (!cfg.learningRate && !args.lrSearch)
                throw ConfigError("learning_rate is not set; configure it or pass --lr-search");

            MultiSliceDataset dataset = preprocessDataset(loadDataset(cfg.dataDirs), cfg);
            if (cfg.mode == TrainMode::Multi && dataset.sliceCount() < 2)
                throw ParamError("train: --mode multi needs at least two slices, got " +
                                 std::to_string(dataset.sliceCount()));
            if (cfg.mode == TrainMode::Single && dataset.sliceCount() != 1)
                throw ParamError("train: --mode single expects one slice, got " +
                                 std::to_string(dataset.sliceCount()));
            SnnGraph graph = buildMultiSliceGraph(dataset, cfg.snnK);

            std::optional<Checkpoint> resume;
            if (args.resume) resume = loadCheckpoint(*args.resume);
            return Loaded{std::move(cfg), std::move(dataset), std::move(graph), std::move(resume)};
        },
        [&](Loaded& l) {
            const auto t0 = std::chrono::steady_clock::now();
            TrainConfig tc = makeTrainConfig(l.cfg);
            tc.checkpointDir = l.cfg.outDir;

            std::optional<LrSearchResult> search;
            if (args.lrSearch && !l.cfg.learningRate) {
                search = lrSearchBySilhouette(l.dataset, l.graph, tc, kLearningRateGrid,
                                              l.cfg.kBase, std::max<std::size_t>(l.cfg.threads, 1));
                tc.learningRate = search->bestLearningRate;
                l.cfg.learningRate = search->bestLearningRate;
            }

            TrainResult trained;
            if (l.resume)
                trained = resumeTraining(l.dataset, l.graph, tc, *l.resume);
            else if (tc.mode == TrainMode::Single)
                trained = trainSingle(l.dataset, l.graph, tc);
            else
                trained = trainMulti(l.dataset, l.graph, tc);

            const DenseMatrix embeddings = embedDataset(trained.params, l.dataset, l.graph);

            artifacts::Bundle bundle(l.cfg.outDir);
            bundle.write("embeddings.csv", artifacts::embeddingsCsv(embeddings));
            bundle.write("report.json", reportJson(trained.report, l.cfg, search));
            saveCheckpoint(trained.finalCheckpoint, l.cfg.outDir / "checkpoint.json");
            bundle.recordExisting(l.cfg.outDir / "checkpoint.json");
            for (const auto& file : trained.checkpointFiles) bundle.recordExisting(file);
            if (l.dataset.hasLabels())
                bundle.write("labels.csv", artifacts::labelsCsv(l.dataset.concatenatedLabels()));
            if (l.cfg.mode == TrainMode::Multi) {
                const auto membership = l.dataset.sliceMembership();
                bundle.write("slices.csv", artifacts::slicesCsv(membership));
            }
            bundle.setWallSeconds(
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
            bundle.writeManifest();
            std::cout << "trained " << trained.report.epochs.size() << " epoch(s); bundle at "
                      << l.cfg.outDir.string() << "\n";
        });
}

int cmdEvaluate(const EvaluateArgs& args) {
    struct Loaded {
        DenseMatrix embeddings;
        Partition truth;
        std::optional<std::vector<std::size_t>> slices;
    };
    return phased<Loaded>(
        [&]() -> Loaded {
            if (args.out.empty()) throw ParamError("evaluate: --out is required");
            if (args.k < 2) throw ParamError("evaluate: --k must be >= 2");
            Loaded l;
            l.embeddings = artifacts::readMatrixCsv(args.embeddings);
            const auto labels = artifacts::readLabelsCsv(args.labels);
            l.truth = internLabels(labels);
            if (l.truth.size() != l.embeddings.rows())
                throw ShapeError("evaluate: " + std::to_string(l.truth.size()) + " labels vs " +
                                 std::to_string(l.embeddings.rows()) + " embedding rows");
            if (args.slices) {
                l.slices = artifacts::readSlicesCsv(*args.slices);
                if (l.slices->size() != l.embeddings.rows())
                    throw ShapeError("evaluate: slice membership length mismatch");
            }
            if (args.k > l.embeddings.rows())
                throw ParamError("evaluate: --k exceeds the number of spots");
            return l;
        },
        [&](Loaded& l) {
            const Partition predicted =
                kMeansPartition(l.embeddings, args.k, SeededRng(args.seed, "evaluate/kmeans"));
            MetricsReport report;
            report.k = args.k;
            report.seed = args.seed;
            report.ari = adjustedRandIndex(l.truth, predicted);
            report.nmi = normalizedMutualInfo(l.truth, predicted);
            report.ca = clusteringAccuracy(l.truth, predicted);
            report.silhouette = silhouetteScore(l.embeddings, predicted);
            if (l.slices)
                report.silhouetteBatch = silhouetteBatch(l.embeddings, l.truth, *l.slices).score;

            artifacts::Bundle bundle(args.out);
            bundle.write("metrics.json", artifacts::metricsJson(report));
            bundle.write("clusters.csv", artifacts::clustersCsv(predicted));
            bundle.writeManifest();
            std::cout << artifacts::metricsJson(report);
        });
}

int cmdAlign(const AlignArgs& args) {
    struct Loaded {
        DenseMatrix refEmbeddings, queryEmbeddings;
        std::vector<std::string> refLabels;
        std::optional<std::vector<std::string>> queryLabels;
    };
    return phased<Loaded>(
        [&]() -> Loaded {
            if (args.out.empty()) throw ParamError("align: --out is required");
            Loaded l;
            l.refEmbeddings = artifacts::readMatrixCsv(args.refEmbeddings);
            l.queryEmbeddings = artifacts::readMatrixCsv(args.queryEmbeddings);
            if (l.refEmbeddings.cols() != l.queryEmbeddings.cols())
                throw ShapeError("align: embedding dimensions differ (" +
                                 std::to_string(l.refEmbeddings.cols()) + " vs " +
                                 std::to_string(l.queryEmbeddings.cols()) + ")");
            if (l.refEmbeddings.rows() == 0) throw ParamError("align: empty reference");
            l.refLabels = artifacts::readLabelsCsv(args.refLabels);
            if (l.refLabels.size() != l.refEmbeddings.rows())
                throw ShapeError("align: reference labels vs embeddings mismatch");
            if (args.queryLabels) {
                l.queryLabels = artifacts::readLabelsCsv(*args.queryLabels);
                if (l.queryLabels->size() != l.queryEmbeddings.rows())
                    throw ShapeError("align: query labels vs embeddings mismatch");
            }
            return l;
        },
        [&](Loaded& l) {
            const std::vector<std::size_t> nearest =
                nearestReferenceByCosine(l.refEmbeddings, l.queryEmbeddings);

            std::string transferred = "query_index,ref_index,label\n";
            for (std::size_t q = 0; q < nearest.size(); ++q) {
                transferred += std::to_string(q);
                transferred += ',';
                transferred += std::to_string(nearest[q]);
                transferred += ',';
                transferred += l.refLabels[nearest[q]];
                transferred += '\n';
            }

            Json j;
            if (l.queryLabels) {
                const Partition refIds = internLabels(l.refLabels);
                const Partition truth = internLabels(*l.queryLabels);
                Partition moved(nearest.size());
                for (std::size_t q = 0; q < nearest.size(); ++q) moved[q] = refIds[nearest[q]];
                j["ltari"] = adjustedRandIndex(truth, moved);
            } else {
                j["ltari"] = nullptr;
            }
            j["n_reference"] = l.refEmbeddings.rows();
            j["n_query"] = l.queryEmbeddings.rows();

            artifacts::Bundle bundle(args.out);
            bundle.write("transferred_labels.csv", transferred);
            bundle.write("alignment.json", j.dump(2) + "\n");
            bundle.writeManifest();
            std::cout << j.dump(2) << "\n";
        });
}

int cmdImpute(const ImputeArgs& args) {
    struct Loaded {
        RunConfig cfg;
        MultiSliceDataset dataset;
        SnnGraph graph;
        Checkpoint checkpoint;
    };
    return phased<Loaded>(
        [&]() -> Loaded {
            if (args.out.empty()) throw ParamError("impute: --out is required");
            RunConfig cfg;
            if (args.config) applyConfigFile(cfg, *args.config);
            if (!args.data.empty()) cfg.dataDirs = args.data;

            MultiSliceDataset dataset = preprocessDataset(loadDataset(cfg.dataDirs), cfg);
            SnnGraph graph = buildMultiSliceGraph(dataset, cfg.snnK);
            Checkpoint ck = loadCheckpoint(args.checkpoint);

            // Stale-checkpoint guard: the checkpoint must have been trained
            // under this exact configuration and gene set.
            TrainConfig tc = makeTrainConfig(cfg);
            const std::string expected = trainConfigHash(tc, dataset.geneCount());
            if (ck.configHash != expected)
                throw StateError("impute: checkpoint config hash " + ck.configHash +
                                 " does not match the current configuration (" + expected +
                                 "); refusing stale checkpoint");
            if (ck.params.config.geneCount != dataset.geneCount())
                throw StateError("impute: checkpoint gene count mismatch");
            return Loaded{std::move(cfg), std::move(dataset), std::move(graph), std::move(ck)};
        },
        [&](Loaded& l) {
            const DenseMatrix imputed = imputeExpression(l.checkpoint.params, l.dataset, l.graph);
            artifacts::Bundle bundle(args.out);
            bundle.write("imputed.csv", artifacts::matrixCsv(imputed, l.dataset.geneNames()));
            bundle.writeManifest();
            std::cout << "imputed " << imputed.rows() << " x " << imputed.cols()
                      << " expression matrix\n";
        });
}

} // namespace spotrep::cli
