#pragma once

#include "spotrep/matrix.hpp"
#include "spotrep/metrics.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace spotrep::artifacts {

/// FNV-1a 64-bit content hash, hex-encoded.
std::string fnv1a64Hex(std::string_view bytes);

/// Writes via a temp file in the same directory plus rename, so readers
/// never see partial content.
void writeFileAtomic(const std::filesystem::path& file, std::string_view content);

std::string readFile(const std::filesystem::path& file);

/// Matrix to CSV text with a header row; reals at 9 significant digits.
std::string matrixCsv(const DenseMatrix& m, std::span<const std::string> header);

/// Embeddings CSV with header dim_0..dim_{D-1}.
std::string embeddingsCsv(const DenseMatrix& embeddings);

DenseMatrix readMatrixCsv(const std::filesystem::path& file,
                          std::vector<std::string>* header = nullptr);

std::string labelsCsv(std::span<const std::string> labels);
std::vector<std::string> readLabelsCsv(const std::filesystem::path& file);

std::string clustersCsv(std::span<const std::size_t> clusters);

std::string slicesCsv(std::span<const std::size_t> sliceMembership);
std::vector<std::size_t> readSlicesCsv(const std::filesystem::path& file);

std::string metricsJson(const MetricsReport& report);

/// Per-invocation record of the files a command wrote, with content hashes.
class Bundle {
public:
    explicit Bundle(std::filesystem::path directory);

    /// Writes `name` atomically under the bundle directory and records it.
    void write(const std::string& name, std::string_view content);
    /// Records a file some other component already wrote.
    void recordExisting(const std::filesystem::path& file);

    void setWallSeconds(double seconds) { wallSeconds_ = seconds; }

    /// Writes manifest.json listing every recorded artifact.
    void writeManifest() const;

    const std::filesystem::path& directory() const noexcept { return dir_; }

private:
    struct Entry {
        std::string name;
        std::string hash;
    };
    std::filesystem::path dir_;
    std::vector<Entry> entries_;
    double wallSeconds_ = 0.0;
};

} // namespace spotrep::artifacts
