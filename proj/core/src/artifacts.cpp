#include "spotrep/artifacts.hpp"

#include "spotrep/errors.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace spotrep::artifacts {

namespace {

using Json = nlohmann::ordered_json;

void appendFormatted(std::string& out, double v) {
    char buf[32];
    const int len = std::snprintf(buf, sizeof buf, "%.9g", v);
    out.append(buf, static_cast<std::size_t>(len));
}

} // namespace

std::string fnv1a64Hex(std::string_view bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void writeFileAtomic(const std::filesystem::path& file, std::string_view content) {
    const std::filesystem::path tmp = file.string() + ".tmp~";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IngestError("cannot write file: " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw IngestError("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, file);
}

std::string readFile(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw IngestError("missing or unreadable file: " + file.string());
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

std::string matrixCsv(const DenseMatrix& m, std::span<const std::string> header) {
    if (header.size() != m.cols())
        throw ShapeError("matrixCsv: " + std::to_string(header.size()) + " header fields for " +
                         std::to_string(m.cols()) + " columns");
    std::string out;
    out.reserve(m.size() * 12);
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (c) out += ',';
        out += header[c];
    }
    out += '\n';
    for (std::size_t r = 0; r < m.rows(); ++r) {
        auto row = m.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) out += ',';
            appendFormatted(out, row[c]);
        }
        out += '\n';
    }
    return out;
}

std::string embeddingsCsv(const DenseMatrix& embeddings) {
    std::vector<std::string> header(embeddings.cols());
    for (std::size_t c = 0; c < header.size(); ++c) header[c] = "dim_" + std::to_string(c);
    return matrixCsv(embeddings, header);
}

DenseMatrix readMatrixCsv(const std::filesystem::path& file, std::vector<std::string>* header) {
    std::ifstream in(file);
    if (!in) throw IngestError("missing or unreadable file: " + file.string());
    std::string line;
    if (!std::getline(in, line)) throw IngestError("empty file: " + file.string());

    auto split = [](const std::string& s) {
        std::vector<std::string> fields;
        std::size_t start = 0;
        for (;;) {
            const std::size_t comma = s.find(',', start);
            std::string f = s.substr(start, comma == std::string::npos ? comma : comma - start);
            if (!f.empty() && f.back() == '\r') f.pop_back();
            fields.push_back(std::move(f));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        return fields;
    };

    const auto head = split(line);
    if (header) *header = head;

    std::vector<double> values;
    std::size_t rows = 0, lineNo = 1;
    while (std::getline(in, line)) {
        ++lineNo;
        if (line.empty() && in.peek() == std::char_traits<char>::eof()) break;
        const auto fields = split(line);
        if (fields.size() != head.size())
            throw IngestError("ragged row at " + file.string() + ":" + std::to_string(lineNo));
        for (const auto& f : fields) {
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
            if (ec != std::errc{} || ptr != f.data() + f.size())
                throw IngestError("not a number: '" + f + "' at " + file.string() + ":" +
                                  std::to_string(lineNo));
            values.push_back(v);
        }
        ++rows;
    }
    DenseMatrix m(rows, head.size());
    std::copy(values.begin(), values.end(), m.values().begin());
    return m;
}

std::string labelsCsv(std::span<const std::string> labels) {
    std::string out = "label\n";
    for (const auto& l : labels) {
        out += l;
        out += '\n';
    }
    return out;
}

std::vector<std::string> readLabelsCsv(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IngestError("missing or unreadable file: " + file.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    if (lines.empty() || lines.front() != "label")
        throw IngestError("labels file must start with a 'label' header: " + file.string());
    return {lines.begin() + 1, lines.end()};
}

std::string clustersCsv(std::span<const std::size_t> clusters) {
    std::string out = "cluster\n";
    for (std::size_t c : clusters) {
        out += std::to_string(c);
        out += '\n';
    }
    return out;
}

std::string slicesCsv(std::span<const std::size_t> sliceMembership) {
    std::string out = "slice\n";
    for (std::size_t s : sliceMembership) {
        out += std::to_string(s);
        out += '\n';
    }
    return out;
}

std::vector<std::size_t> readSlicesCsv(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IngestError("missing or unreadable file: " + file.string());
    std::vector<std::size_t> out;
    std::string line;
    bool first = true;
    std::size_t lineNo = 0;
    while (std::getline(in, line)) {
        ++lineNo;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (first) {
            if (line != "slice")
                throw IngestError("slices file must start with a 'slice' header: " + file.string());
            first = false;
            continue;
        }
        if (line.empty()) continue;
        std::size_t v = 0;
        auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), v);
        if (ec != std::errc{} || ptr != line.data() + line.size())
            throw IngestError("bad slice id at " + file.string() + ":" + std::to_string(lineNo));
        out.push_back(v);
    }
    if (first) throw IngestError("empty file: " + file.string());
    return out;
}

std::string metricsJson(const MetricsReport& report) {
    Json j;
    auto put = [&](const char* key, const std::optional<double>& v) {
        if (v)
            j[key] = *v;
        else
            j[key] = nullptr;
    };
    put("ari", report.ari);
    put("nmi", report.nmi);
    put("ca", report.ca);
    put("silhouette", report.silhouette);
    put("silhouette_batch", report.silhouetteBatch);
    put("ltari", report.ltari);
    j["k"] = report.k;
    j["seed"] = report.seed;
    return j.dump(2) + "\n";
}

Bundle::Bundle(std::filesystem::path directory) : dir_(std::move(directory)) {
    std::filesystem::create_directories(dir_);
}

void Bundle::write(const std::string& name, std::string_view content) {
    writeFileAtomic(dir_ / name, content);
    entries_.push_back({name, fnv1a64Hex(content)});
}

void Bundle::recordExisting(const std::filesystem::path& file) {
    const std::string content = readFile(file);
    entries_.push_back({std::filesystem::relative(file, dir_).string(), fnv1a64Hex(content)});
}

void Bundle::writeManifest() const {
    Json j;
    j["artifacts"] = Json::array();
    for (const auto& e : entries_) {
        Json item;
        item["name"] = e.name;
        item["fnv1a64"] = e.hash;
        j["artifacts"].push_back(item);
    }
    j["wall_time_seconds"] = wallSeconds_;
    writeFileAtomic(dir_ / "manifest.json", j.dump(2) + "\n");
}

} // namespace spotrep::artifacts
