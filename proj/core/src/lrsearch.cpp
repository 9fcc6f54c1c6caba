#include "spotrep/lrsearch.hpp"

#include "spotrep/errors.hpp"

#include <future>
#include <vector>

namespace spotrep {

LrSearchResult lrSearchBySilhouette(const MultiSliceDataset& dataset, const SnnGraph& graph,
                                    const TrainConfig& base, std::span<const double> grid,
                                    std::size_t kBase, std::size_t threads) {
    if (grid.empty()) throw ParamError("lrSearch: empty learning-rate grid");
    if (kBase < 2) throw ParamError("lrSearch: kBase must be >= 2");
    if (threads < 1) threads = 1;

    auto runOne = [&](double lr) {
        TrainConfig cfg = base;
        cfg.learningRate = lr;
        cfg.checkpointDir.clear(); // search runs leave no artifacts
        TrainResult trained = cfg.mode == TrainMode::Single ? trainSingle(dataset, graph, cfg)
                                                            : trainMulti(dataset, graph, cfg);
        const DenseMatrix embeddings = embedDataset(trained.params, dataset, graph);
        LrSearchEntry entry;
        entry.learningRate = lr;
        entry.partition =
            kMeansPartition(embeddings, kBase, SeededRng(cfg.seed, "lrsearch/kmeans"));
        try {
            entry.silhouette = silhouetteScore(embeddings, entry.partition);
        } catch (const MetricError&) {
            entry.silhouette = -1.0; // degenerate single-cluster run: worst score
        }
        return entry;
    };

    LrSearchResult result;
    result.entries.resize(grid.size());
    std::size_t next = 0;
    while (next < grid.size()) {
        const std::size_t batch = std::min(threads, grid.size() - next);
        std::vector<std::future<LrSearchEntry>> futures;
        futures.reserve(batch);
        for (std::size_t i = 0; i < batch; ++i)
            futures.push_back(std::async(std::launch::async, runOne, grid[next + i]));
        for (std::size_t i = 0; i < batch; ++i) result.entries[next + i] = futures[i].get();
        next += batch;
    }

    std::size_t best = 0;
    for (std::size_t i = 1; i < result.entries.size(); ++i)
        if (result.entries[i].silhouette > result.entries[best].silhouette) best = i;
    result.bestLearningRate = result.entries[best].learningRate;
    return result;
}

} // namespace spotrep
