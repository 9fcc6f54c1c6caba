#include "spotrep/data.hpp"

#include "spotrep/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace spotrep {

namespace {

std::string fileContext(const std::filesystem::path& file, std::size_t line) {
    return file.string() + ":" + std::to_string(line);
}

std::vector<std::string> splitCsvLine(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        std::string field = line.substr(start, comma == std::string::npos ? comma : comma - start);
        // trim surrounding whitespace and a trailing CR
        while (!field.empty() && (field.back() == '\r' || field.back() == ' ' || field.back() == '\t'))
            field.pop_back();
        std::size_t lead = 0;
        while (lead < field.size() && (field[lead] == ' ' || field[lead] == '\t')) ++lead;
        out.push_back(field.substr(lead));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

double parseDouble(const std::string& field, const std::filesystem::path& file, std::size_t line) {
    double value = 0.0;
    const char* begin = field.data();
    const char* end = begin + field.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end)
        throw IngestError("not a number: '" + field + "' at " + fileContext(file, line));
    return value;
}

std::ifstream openOrThrow(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IngestError("missing or unreadable file: " + file.string());
    return in;
}

/// Reads a CSV with a header row into a matrix; every data row must have
/// exactly as many fields as the header.
DenseMatrix readCsvMatrix(const std::filesystem::path& file, std::vector<std::string>& header) {
    std::ifstream in = openOrThrow(file);
    std::string line;
    if (!std::getline(in, line)) throw IngestError("empty file: " + file.string());
    header = splitCsvLine(line);
    std::vector<double> values;
    std::size_t rows = 0, lineNo = 1;
    while (std::getline(in, line)) {
        ++lineNo;
        if (line.empty() && in.peek() == std::char_traits<char>::eof()) break;
        const auto fields = splitCsvLine(line);
        if (fields.size() != header.size())
            throw IngestError("ragged row: expected " + std::to_string(header.size()) +
                              " fields, got " + std::to_string(fields.size()) + " at " +
                              fileContext(file, lineNo));
        for (const auto& f : fields) values.push_back(parseDouble(f, file, lineNo));
        ++rows;
    }
    DenseMatrix m(rows, header.size());
    std::copy(values.begin(), values.end(), m.values().begin());
    return m;
}

/// MatrixMarket "coordinate real general" reader (spots x genes).
DenseMatrix readMatrixMarket(const std::filesystem::path& file) {
    std::ifstream in = openOrThrow(file);
    std::string line;
    std::size_t lineNo = 0;
    if (!std::getline(in, line)) throw IngestError("empty file: " + file.string());
    ++lineNo;
    {
        std::istringstream banner(line);
        std::string magic, object, format, field, symmetry;
        banner >> magic >> object >> format >> field >> symmetry;
        if (magic != "%%MatrixMarket" || object != "matrix" || format != "coordinate" ||
            field != "real" || symmetry != "general")
            throw IngestError("unsupported MatrixMarket banner at " + fileContext(file, lineNo) +
                              " (need 'matrix coordinate real general')");
    }
    while (std::getline(in, line)) {
        ++lineNo;
        if (!line.empty() && line[0] != '%') break;
    }
    std::size_t rows = 0, cols = 0, nnz = 0;
    {
        std::istringstream dims(line);
        if (!(dims >> rows >> cols >> nnz))
            throw IngestError("bad size line at " + fileContext(file, lineNo));
    }
    DenseMatrix m(rows, cols);
    for (std::size_t k = 0; k < nnz; ++k) {
        if (!std::getline(in, line))
            throw IngestError("expected " + std::to_string(nnz) + " entries, file ended at " +
                              fileContext(file, lineNo));
        ++lineNo;
        std::istringstream entry(line);
        std::size_t r = 0, c = 0;
        double v = 0.0;
        if (!(entry >> r >> c >> v))
            throw IngestError("bad entry at " + fileContext(file, lineNo));
        if (r < 1 || r > rows || c < 1 || c > cols)
            throw IngestError("index out of range at " + fileContext(file, lineNo));
        m(r - 1, c - 1) = v;
    }
    return m;
}

std::vector<std::string> readLines(const std::filesystem::path& file) {
    std::ifstream in = openOrThrow(file);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    return lines;
}

void formatValue(std::string& out, double v) {
    char buf[32];
    const int len = std::snprintf(buf, sizeof buf, "%.9g", v);
    out.append(buf, static_cast<std::size_t>(len));
}

void writeTextFile(const std::filesystem::path& file, const std::string& content) {
    // temp + rename so readers never see partial files
    const std::filesystem::path tmp = file.string() + ".tmp~";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IngestError("cannot write file: " + tmp.string());
        out << content;
        if (!out) throw IngestError("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, file);
}

} // namespace

void Slice::validate() const {
    if (coords.rows() != expression.rows())
        throw IngestError("slice '" + sliceId + "': " + std::to_string(coords.rows()) +
                          " coordinate rows vs " + std::to_string(expression.rows()) +
                          " expression rows");
    if (coords.cols() != 2)
        throw IngestError("slice '" + sliceId + "': coords must have columns x,y");
    if (geneNames.size() != expression.cols())
        throw IngestError("slice '" + sliceId + "': " + std::to_string(geneNames.size()) +
                          " gene names vs " + std::to_string(expression.cols()) + " columns");
    if (labels && labels->size() != expression.rows())
        throw IngestError("slice '" + sliceId + "': " + std::to_string(labels->size()) +
                          " labels vs " + std::to_string(expression.rows()) + " spots");
    if (!expression.allFinite() || !coords.allFinite())
        throw IngestError("slice '" + sliceId + "': non-finite values");
}

std::size_t MultiSliceDataset::totalSpots() const {
    std::size_t n = 0;
    for (const auto& s : slices) n += s.spotCount();
    return n;
}

bool MultiSliceDataset::hasLabels() const {
    return !slices.empty() &&
           std::all_of(slices.begin(), slices.end(), [](const Slice& s) { return s.labels.has_value(); });
}

DenseMatrix MultiSliceDataset::concatenatedExpression() const {
    DenseMatrix out(totalSpots(), geneCount());
    std::size_t offset = 0;
    for (const auto& s : slices) {
        for (std::size_t r = 0; r < s.spotCount(); ++r)
            std::copy(s.expression.row(r).begin(), s.expression.row(r).end(),
                      out.row(offset + r).begin());
        offset += s.spotCount();
    }
    return out;
}

DenseMatrix MultiSliceDataset::concatenatedCoords() const {
    DenseMatrix out(totalSpots(), 2);
    std::size_t offset = 0;
    for (const auto& s : slices) {
        for (std::size_t r = 0; r < s.spotCount(); ++r)
            std::copy(s.coords.row(r).begin(), s.coords.row(r).end(), out.row(offset + r).begin());
        offset += s.spotCount();
    }
    return out;
}

std::vector<std::size_t> MultiSliceDataset::sliceMembership() const {
    std::vector<std::size_t> membership;
    membership.reserve(totalSpots());
    for (std::size_t s = 0; s < slices.size(); ++s)
        membership.insert(membership.end(), slices[s].spotCount(), s);
    return membership;
}

std::vector<std::string> MultiSliceDataset::concatenatedLabels() const {
    std::vector<std::string> out;
    out.reserve(totalSpots());
    for (const auto& s : slices) {
        if (!s.labels) throw StateError("concatenatedLabels: slice '" + s.sliceId + "' has none");
        out.insert(out.end(), s.labels->begin(), s.labels->end());
    }
    return out;
}

Slice loadSlice(const std::filesystem::path& directory) {
    Slice slice;
    slice.sliceId = directory.filename().string();

    const auto csvPath = directory / "expression.csv";
    const auto mtxPath = directory / "expression.mtx";
    if (std::filesystem::exists(csvPath)) {
        slice.expression = readCsvMatrix(csvPath, slice.geneNames);
    } else if (std::filesystem::exists(mtxPath)) {
        slice.expression = readMatrixMarket(mtxPath);
        slice.geneNames = readLines(directory / "genes.txt");
        if (slice.geneNames.size() != slice.expression.cols())
            throw IngestError("genes.txt lists " + std::to_string(slice.geneNames.size()) +
                              " names but expression.mtx has " +
                              std::to_string(slice.expression.cols()) + " columns in " +
                              directory.string());
    } else {
        throw IngestError("no expression.csv or expression.mtx in " + directory.string());
    }

    {
        std::unordered_set<std::string> seen;
        for (const auto& g : slice.geneNames)
            if (!seen.insert(g).second)
                throw IngestError("duplicate gene name '" + g + "' in " + directory.string());
    }
    for (std::size_t r = 0; r < slice.expression.rows(); ++r)
        for (double v : slice.expression.row(r))
            if (v < 0.0)
                throw IngestError("negative count in row " + std::to_string(r) + " of " +
                                  directory.string());

    std::vector<std::string> coordHeader;
    slice.coords = readCsvMatrix(directory / "coords.csv", coordHeader);
    if (coordHeader.size() != 2 || coordHeader[0] != "x" || coordHeader[1] != "y")
        throw IngestError("coords.csv header must be 'x,y' in " + directory.string());

    const auto labelsPath = directory / "labels.csv";
    if (std::filesystem::exists(labelsPath)) {
        auto lines = readLines(labelsPath);
        if (lines.empty() || lines.front() != "label")
            throw IngestError("labels.csv header must be 'label' in " + directory.string());
        slice.labels = std::vector<std::string>(lines.begin() + 1, lines.end());
    }

    slice.validate();
    return slice;
}

void saveSlice(const Slice& slice, const std::filesystem::path& directory) {
    slice.validate();
    std::filesystem::create_directories(directory);

    std::string expr;
    for (std::size_t g = 0; g < slice.geneNames.size(); ++g) {
        if (g) expr += ',';
        expr += slice.geneNames[g];
    }
    expr += '\n';
    for (std::size_t r = 0; r < slice.expression.rows(); ++r) {
        auto row = slice.expression.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) expr += ',';
            formatValue(expr, row[c]);
        }
        expr += '\n';
    }
    writeTextFile(directory / "expression.csv", expr);

    std::string coords = "x,y\n";
    for (std::size_t r = 0; r < slice.coords.rows(); ++r) {
        formatValue(coords, slice.coords(r, 0));
        coords += ',';
        formatValue(coords, slice.coords(r, 1));
        coords += '\n';
    }
    writeTextFile(directory / "coords.csv", coords);

    if (slice.labels) {
        std::string labels = "label\n";
        for (const auto& l : *slice.labels) {
            labels += l;
            labels += '\n';
        }
        writeTextFile(directory / "labels.csv", labels);
    }
}

MultiSliceDataset selectHvg(const MultiSliceDataset& dataset, std::size_t n) {
    if (dataset.slices.empty()) throw ParamError("selectHvg: empty dataset");
    const std::size_t genes = dataset.geneCount();
    if (n > genes)
        throw ParamError("selectHvg: n=" + std::to_string(n) + " exceeds " +
                         std::to_string(genes) + " genes");
    if (n == genes) return dataset;

    // Variance of log1p(counts) over all spots of all slices (two-pass).
    const std::size_t total = dataset.totalSpots();
    std::vector<double> mean(genes, 0.0), var(genes, 0.0);
    for (const auto& s : dataset.slices)
        for (std::size_t r = 0; r < s.spotCount(); ++r) {
            auto row = s.expression.row(r);
            for (std::size_t g = 0; g < genes; ++g) mean[g] += std::log1p(row[g]);
        }
    for (double& m : mean) m /= static_cast<double>(total);
    for (const auto& s : dataset.slices)
        for (std::size_t r = 0; r < s.spotCount(); ++r) {
            auto row = s.expression.row(r);
            for (std::size_t g = 0; g < genes; ++g) {
                const double d = std::log1p(row[g]) - mean[g];
                var[g] += d * d;
            }
        }

    std::vector<std::size_t> order(genes);
    for (std::size_t g = 0; g < genes; ++g) order[g] = g;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return var[a] != var[b] ? var[a] > var[b] : a < b;
    });
    std::vector<std::size_t> kept(order.begin(), order.begin() + n);
    std::sort(kept.begin(), kept.end()); // stable order by original index

    MultiSliceDataset out;
    out.slices.reserve(dataset.slices.size());
    for (const auto& s : dataset.slices) {
        Slice reduced;
        reduced.sliceId = s.sliceId;
        reduced.coords = s.coords;
        reduced.labels = s.labels;
        reduced.expression = DenseMatrix(s.spotCount(), n);
        reduced.geneNames.reserve(n);
        for (std::size_t g : kept) reduced.geneNames.push_back(s.geneNames[g]);
        for (std::size_t r = 0; r < s.spotCount(); ++r) {
            auto src = s.expression.row(r);
            auto dst = reduced.expression.row(r);
            for (std::size_t j = 0; j < n; ++j) dst[j] = src[kept[j]];
        }
        out.slices.push_back(std::move(reduced));
    }
    return out;
}

Slice normalizeCpmLog1p(const Slice& slice, double targetSum) {
    if (!(targetSum > 0.0)) throw ParamError("normalizeCpmLog1p: targetSum must be positive");
    Slice out = slice;
    for (std::size_t r = 0; r < out.expression.rows(); ++r) {
        auto row = out.expression.row(r);
        double total = 0.0;
        for (double v : row) total += v;
        if (!(total > 0.0))
            throw DegenerateError("normalizeCpmLog1p: spot " + std::to_string(r) + " of slice '" +
                                  slice.sliceId + "' has zero total count");
        const double scale = targetSum / total;
        for (double& v : row) v = std::log1p(v * scale);
    }
    return out;
}

MultiSliceDataset normalizeCpmLog1p(const MultiSliceDataset& dataset, double targetSum) {
    MultiSliceDataset out;
    out.slices.reserve(dataset.slices.size());
    for (const auto& s : dataset.slices) out.slices.push_back(normalizeCpmLog1p(s, targetSum));
    return out;
}

MultiSliceDataset concatenateSlices(std::vector<Slice> slices) {
    if (slices.empty()) throw ParamError("concatenateSlices: no slices");
    for (const auto& s : slices) s.validate();

    // Fast path: identical vocabularies in identical order.
    const auto& reference = slices.front().geneNames;
    const bool aligned = std::all_of(slices.begin(), slices.end(), [&](const Slice& s) {
        return s.geneNames == reference;
    });
    if (aligned) {
        MultiSliceDataset out;
        out.slices = std::move(slices);
        return out;
    }

    // Intersection of all vocabularies, kept in slice-0 order.
    std::vector<std::string> shared;
    for (const auto& gene : reference) {
        bool everywhere = true;
        for (std::size_t s = 1; s < slices.size() && everywhere; ++s) {
            const auto& names = slices[s].geneNames;
            everywhere = std::find(names.begin(), names.end(), gene) != names.end();
        }
        if (everywhere) shared.push_back(gene);
    }
    if (shared.empty())
        throw IngestError("concatenateSlices: slices share no genes");

    MultiSliceDataset out;
    out.slices.reserve(slices.size());
    for (auto& s : slices) {
        std::unordered_map<std::string, std::size_t> position;
        for (std::size_t g = 0; g < s.geneNames.size(); ++g) position[s.geneNames[g]] = g;
        Slice aligned;
        aligned.sliceId = s.sliceId;
        aligned.coords = std::move(s.coords);
        aligned.labels = std::move(s.labels);
        aligned.geneNames = shared;
        aligned.expression = DenseMatrix(s.expression.rows(), shared.size());
        for (std::size_t r = 0; r < s.expression.rows(); ++r) {
            auto src = s.expression.row(r);
            auto dst = aligned.expression.row(r);
            for (std::size_t j = 0; j < shared.size(); ++j) dst[j] = src[position[shared[j]]];
        }
        out.slices.push_back(std::move(aligned));
    }
    return out;
}

DenseMatrix defaultDomainRates(std::size_t domains, std::size_t genes, double low, double high) {
    DenseMatrix rates(domains, genes, low);
    for (std::size_t g = 0; g < genes; ++g) rates(g % domains, g) = high;
    return rates;
}

MultiSliceDataset generateSynthetic(const SyntheticSpec& spec) {
    if (spec.domainCount < 2) throw ParamError("generateSynthetic: domainCount must be >= 2");
    if (spec.sliceCount < 1) throw ParamError("generateSynthetic: sliceCount must be >= 1");
    if (spec.batchShift < 0.0) throw ParamError("generateSynthetic: batchShift must be >= 0");
    if (spec.spotsPerSlice < spec.domainCount)
        throw ParamError("generateSynthetic: fewer spots than domains");
    if (spec.geneCount == 0) throw ParamError("generateSynthetic: geneCount must be positive");

    DenseMatrix rates = spec.rates;
    if (rates.empty())
        rates = defaultDomainRates(spec.domainCount, spec.geneCount, spec.rateLow, spec.rateHigh);
    if (rates.rows() != spec.domainCount || rates.cols() != spec.geneCount)
        throw ParamError("generateSynthetic: rates must be domainCount x geneCount");

    const std::size_t side =
        static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(spec.spotsPerSlice))));

    std::vector<std::string> geneNames(spec.geneCount);
    for (std::size_t g = 0; g < spec.geneCount; ++g) geneNames[g] = "g" + std::to_string(g);

    MultiSliceDataset out;
    out.slices.reserve(spec.sliceCount);
    for (std::size_t s = 0; s < spec.sliceCount; ++s) {
        SeededRng coordRng(spec.seed, "synth/coords/slice" + std::to_string(s));
        SeededRng countRng(spec.seed, "synth/counts/slice" + std::to_string(s));

        // Per-gene multiplicative batch factor for slices beyond the first.
        std::vector<double> factor(spec.geneCount, 1.0);
        if (s != 0 && spec.batchShift > 0.0) {
            SeededRng batchRng(spec.seed, "synth/batch/slice" + std::to_string(s));
            for (std::size_t g = 0; g < spec.geneCount; ++g)
                factor[g] = std::exp(spec.batchShift * batchRng.nextNormal());
        }

        Slice slice;
        slice.sliceId = "slice_" + std::to_string(s);
        slice.geneNames = geneNames;
        slice.coords = DenseMatrix(spec.spotsPerSlice, 2);
        slice.expression = DenseMatrix(spec.spotsPerSlice, spec.geneCount);
        std::vector<std::string> labels(spec.spotsPerSlice);

        for (std::size_t i = 0; i < spec.spotsPerSlice; ++i) {
            const std::size_t gridRow = i / side;
            const std::size_t gridCol = i % side;
            slice.coords(i, 0) = static_cast<double>(gridCol) +
                                 coordRng.nextUniform(-spec.jitter, spec.jitter);
            slice.coords(i, 1) = static_cast<double>(gridRow) +
                                 coordRng.nextUniform(-spec.jitter, spec.jitter);
            const std::size_t domain = gridRow * spec.domainCount / side;
            labels[i] = std::to_string(domain);
            auto row = slice.expression.row(i);
            for (std::size_t g = 0; g < spec.geneCount; ++g) {
                const double rate = rates(domain, g) * factor[g];
                row[g] = spec.noise == NoiseModel::Poisson
                             ? static_cast<double>(countRng.nextPoisson(rate))
                             : rate;
            }
        }
        slice.labels = std::move(labels);
        out.slices.push_back(std::move(slice));
    }
    return out;
}

} // namespace spotrep
