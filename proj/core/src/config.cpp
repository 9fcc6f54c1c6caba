#include "spotrep/config.hpp"

#include "spotrep/errors.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace spotrep {

namespace {

std::string trim(std::string s) {
    const char* ws = " \t\r";
    const auto begin = s.find_first_not_of(ws);
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(ws);
    return s.substr(begin, end - begin + 1);
}

std::string stripComment(const std::string& line) {
    bool inString = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') inString = !inString;
        if (line[i] == '#' && !inString) return line.substr(0, i);
    }
    return line;
}

class ValueParser {
public:
    ValueParser(std::string key, std::string value, std::string context)
        : key_(std::move(key)), value_(std::move(value)), context_(std::move(context)) {}

    [[noreturn]] void fail(const std::string& expected) const {
        throw ConfigError("key '" + key_ + "' " + context_ + ": expected " + expected +
                          ", got '" + value_ + "'");
    }

    double asDouble() const {
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(value_.data(), value_.data() + value_.size(), v);
        if (ec != std::errc{} || ptr != value_.data() + value_.size()) fail("a number");
        return v;
    }

    std::size_t asSize() const {
        std::size_t v = 0;
        auto [ptr, ec] = std::from_chars(value_.data(), value_.data() + value_.size(), v);
        if (ec != std::errc{} || ptr != value_.data() + value_.size())
            fail("a nonnegative integer");
        return v;
    }

    std::uint64_t asU64() const {
        std::uint64_t v = 0;
        auto [ptr, ec] = std::from_chars(value_.data(), value_.data() + value_.size(), v);
        if (ec != std::errc{} || ptr != value_.data() + value_.size())
            fail("a nonnegative integer");
        return v;
    }

    bool asBool() const {
        if (value_ == "true") return true;
        if (value_ == "false") return false;
        fail("true or false");
    }

    std::string asString() const {
        if (value_.size() >= 2 && value_.front() == '"' && value_.back() == '"')
            return value_.substr(1, value_.size() - 2);
        return value_;
    }

    std::vector<std::string> asArrayItems() const {
        if (value_.size() < 2 || value_.front() != '[' || value_.back() != ']')
            fail("an array like [a, b, c]");
        std::vector<std::string> items;
        std::string body = value_.substr(1, value_.size() - 2);
        std::istringstream in(body);
        std::string item;
        while (std::getline(in, item, ',')) {
            item = trim(item);
            if (!item.empty()) items.push_back(item);
        }
        return items;
    }

    std::vector<double> asDoubleArray() const {
        std::vector<double> out;
        for (const auto& item : asArrayItems()) {
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
            if (ec != std::errc{} || ptr != item.data() + item.size())
                fail("an array of numbers");
            out.push_back(v);
        }
        if (out.empty()) fail("a nonempty array of numbers");
        return out;
    }

    std::vector<std::filesystem::path> asPathArray() const {
        std::vector<std::filesystem::path> out;
        for (auto item : asArrayItems()) {
            if (item.size() >= 2 && item.front() == '"' && item.back() == '"')
                item = item.substr(1, item.size() - 2);
            out.emplace_back(item);
        }
        return out;
    }

private:
    std::string key_;
    std::string value_;
    std::string context_;
};

void applyKey(RunConfig& c, const std::string& key, const ValueParser& v) {
    if (key == "mode") {
        const std::string s = v.asString();
        if (s == "single")
            c.mode = TrainMode::Single;
        else if (s == "multi")
            c.mode = TrainMode::Multi;
        else
            v.fail("'single' or 'multi'");
    } else if (key == "epochs") {
        c.epochs = v.asSize();
    } else if (key == "learning_rate") {
        c.learningRate = v.asDouble();
    } else if (key == "weight_decay") {
        c.weightDecay = v.asDouble();
    } else if (key == "seed") {
        c.seed = v.asU64();
    } else if (key == "k_base") {
        c.kBase = v.asSize();
    } else if (key == "lambda_sc") {
        c.lambdaSc = v.asDouble();
    } else if (key == "lambda_recon") {
        c.lambdaRecon = v.asDouble();
    } else if (key == "lambda_pcl") {
        c.lambdaPcl = v.asDouble();
    } else if (key == "lambda_ss") {
        c.lambdaSs = v.asDouble();
    } else if (key == "tau") {
        c.tau = v.asDouble();
    } else if (key == "top_k") {
        c.topK = v.asSize();
    } else if (key == "warmup_epochs") {
        c.warmupEpochs = v.asSize();
    } else if (key == "pcl_granularities") {
        c.pclGranularities = v.asDoubleArray();
    } else if (key == "pcl_refresh_every") {
        c.pclRefreshEvery = v.asSize();
    } else if (key == "ss_include_self") {
        c.ssIncludeSelf = v.asBool();
    } else if (key == "snn_k") {
        c.snnK = v.asSize();
    } else if (key == "feature_mask_rate_1") {
        c.featureMaskRate1 = v.asDouble();
    } else if (key == "feature_mask_rate_2") {
        c.featureMaskRate2 = v.asDouble();
    } else if (key == "edge_mask_rate_1") {
        c.edgeMaskRate1 = v.asDouble();
    } else if (key == "edge_mask_rate_2") {
        c.edgeMaskRate2 = v.asDouble();
    } else if (key == "mask_mode") {
        const std::string s = v.asString();
        if (s == "column")
            c.maskMode = MaskMode::Column;
        else if (s == "entry")
            c.maskMode = MaskMode::Entry;
        else
            v.fail("'column' or 'entry'");
    } else if (key == "hidden_dim") {
        c.hiddenDim = v.asSize();
    } else if (key == "latent_dim") {
        c.latentDim = v.asSize();
    } else if (key == "final_activation") {
        const std::string s = v.asString();
        if (s == "relu")
            c.finalActivation = FinalActivation::Relu;
        else if (s == "none")
            c.finalActivation = FinalActivation::None;
        else
            v.fail("'relu' or 'none'");
    } else if (key == "preprocess") {
        c.preprocess = v.asBool();
    } else if (key == "hvg_n") {
        c.hvgN = v.asSize();
    } else if (key == "target_sum") {
        c.targetSum = v.asDouble();
    } else if (key == "checkpoint_every") {
        c.checkpointEvery = v.asSize();
    } else if (key == "threads") {
        c.threads = v.asSize();
    } else if (key == "data") {
        c.dataDirs = v.asPathArray();
    } else if (key == "out") {
        c.outDir = v.asString();
    } else {
        throw ConfigError("unknown key '" + key + "'");
    }
}

} // namespace

void applyConfigText(RunConfig& config, const std::string& text, const std::string& origin) {
    std::istringstream in(text);
    std::string line;
    std::size_t lineNo = 0;
    while (std::getline(in, line)) {
        ++lineNo;
        line = trim(stripComment(line));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("expected 'key = value' at " + origin + ":" +
                              std::to_string(lineNo));
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError("missing key at " + origin + ":" + std::to_string(lineNo));
        try {
            applyKey(config, key, ValueParser(key, value,
                                              "at " + origin + ":" + std::to_string(lineNo)));
        } catch (const ConfigError& e) {
            // unknown-key errors from applyKey lack position context
            if (std::string(e.what()).find(" at ") == std::string::npos)
                throw ConfigError(std::string(e.what()) + " at " + origin + ":" +
                                  std::to_string(lineNo));
            throw;
        }
    }
}

void applyConfigFile(RunConfig& config, const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot read config file: " + file.string());
    std::ostringstream text;
    text << in.rdbuf();
    applyConfigText(config, text.str(), file.string());
}

TrainConfig makeTrainConfig(const RunConfig& c) {
    TrainConfig t;
    t.mode = c.mode;
    t.epochs = c.epochs;
    t.learningRate = c.learningRate.value_or(0.0);
    t.weightDecay = c.weightDecay;
    t.seed = c.seed;
    t.weights = LossWeights{c.lambdaSc, c.lambdaRecon, c.lambdaPcl, c.lambdaSs,
                            c.tau,      c.topK,        c.warmupEpochs};
    t.augment = AugmentSettings{c.featureMaskRate1, c.featureMaskRate2, c.edgeMaskRate1,
                                c.edgeMaskRate2, c.maskMode};
    t.snnK = c.snnK;
    t.kBase = c.kBase;
    t.pclGranularities = c.pclGranularities;
    t.pclRefreshEvery = c.pclRefreshEvery;
    t.ssIncludeSelf = c.ssIncludeSelf;
    t.hiddenDim = c.hiddenDim;
    t.latentDim = c.latentDim;
    t.finalActivation = c.finalActivation;
    t.checkpointEvery = c.checkpointEvery;
    return t;
}

} // namespace spotrep
