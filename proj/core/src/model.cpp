#include "spotrep/model.hpp"

#include "spotrep/errors.hpp"
#include "spotrep/rng.hpp"

#include <cmath>
#include <string>

namespace spotrep {

namespace {

DenseMatrix glorotUniform(std::size_t fanIn, std::size_t fanOut, SeededRng rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fanIn + fanOut));
    DenseMatrix w(fanIn, fanOut);
    for (double& v : w.values()) v = rng.nextUniform(-bound, bound);
    return w;
}

LinearParams makeLinear(std::size_t in, std::size_t out, const SeededRng& rng) {
    return LinearParams{glorotUniform(in, out, rng), DenseMatrix(1, out)};
}

BatchNormParams makeBatchNorm(std::size_t dim) {
    return BatchNormParams{DenseMatrix(1, dim, 1.0), DenseMatrix(1, dim, 0.0), {}};
}

} // namespace

void ModelParams::forEachTensor(const std::function<void(const std::string&, DenseMatrix&)>& fn) {
    fn("encoder.lin1.weight", encoder.lin1.weight);
    fn("encoder.lin1.bias", encoder.lin1.bias);
    fn("encoder.bn1.gamma", encoder.bn1.gamma);
    fn("encoder.bn1.beta", encoder.bn1.beta);
    fn("encoder.lin2.weight", encoder.lin2.weight);
    fn("encoder.lin2.bias", encoder.lin2.bias);
    fn("encoder.bn2.gamma", encoder.bn2.gamma);
    fn("encoder.bn2.beta", encoder.bn2.beta);
    fn("decoder.lin1.weight", decoder.lin1.weight);
    fn("decoder.lin1.bias", decoder.lin1.bias);
    fn("decoder.bn1.gamma", decoder.bn1.gamma);
    fn("decoder.bn1.beta", decoder.bn1.beta);
    fn("decoder.lin2.weight", decoder.lin2.weight);
    fn("decoder.lin2.bias", decoder.lin2.bias);
}

void ModelParams::forEachTensor(
    const std::function<void(const std::string&, const DenseMatrix&)>& fn) const {
    const_cast<ModelParams*>(this)->forEachTensor(
        [&](const std::string& name, DenseMatrix& m) { fn(name, m); });
}

std::size_t ModelParams::tensorCount() const {
    std::size_t n = 0;
    forEachTensor([&](const std::string&, const DenseMatrix&) { ++n; });
    return n;
}

ModelParams initParams(const ModelConfig& config, std::uint64_t seed) {
    if (config.geneCount < 1) throw ParamError("initParams: geneCount must be positive");
    if (config.hiddenDim < 1 || config.latentDim < 1)
        throw ParamError("initParams: layer dimensions must be positive");

    ModelParams p;
    p.config = config;
    p.encoder.lin1 = makeLinear(config.geneCount, config.hiddenDim, SeededRng(seed, "init/encoder/lin1"));
    p.encoder.lin2 = makeLinear(config.hiddenDim, config.latentDim, SeededRng(seed, "init/encoder/lin2"));
    p.encoder.bn1 = makeBatchNorm(config.hiddenDim);
    p.encoder.bn2 = makeBatchNorm(config.latentDim);
    p.decoder.lin1 = makeLinear(config.latentDim, config.hiddenDim, SeededRng(seed, "init/decoder/lin1"));
    p.decoder.lin2 = makeLinear(config.hiddenDim, config.geneCount, SeededRng(seed, "init/decoder/lin2"));
    p.decoder.bn1 = makeBatchNorm(config.hiddenDim);
    return p;
}

ModelVars liftParams(ad::Tape& tape, ModelParams& params, bool trainable) {
    ModelVars vars;
    vars.encoder.finalActivation = params.config.finalActivation;

    auto lift = [&](DenseMatrix& tensor) {
        ad::Var v = trainable ? tape.leaf(tensor) : tape.constant(tensor);
        vars.leaves.push_back(v);
        return v;
    };
    params.forEachTensor([&](const std::string&, DenseMatrix& tensor) { lift(tensor); });

    // forEachTensor order, see above
    vars.encoder.lin1 = {vars.leaves[0], vars.leaves[1]};
    vars.encoder.bn1 = {vars.leaves[2], vars.leaves[3], &params.encoder.bn1.stats};
    vars.encoder.lin2 = {vars.leaves[4], vars.leaves[5]};
    vars.encoder.bn2 = {vars.leaves[6], vars.leaves[7], &params.encoder.bn2.stats};
    vars.decoder.lin1 = {vars.leaves[8], vars.leaves[9]};
    vars.decoder.bn1 = {vars.leaves[10], vars.leaves[11], &params.decoder.bn1.stats};
    vars.decoder.lin2 = {vars.leaves[12], vars.leaves[13]};
    return vars;
}

ad::Var encode(ad::Tape& tape, const EncoderVars& encoder, const ad::Var& features,
               const SparseAdjacency& gcnOperator, ad::BnMode mode) {
    tape.checkSameTape(features, "encode features");
    if (features.cols() != encoder.lin1.weight.rows())
        throw ShapeError("encode: " + std::to_string(features.cols()) + " feature columns vs " +
                         std::to_string(encoder.lin1.weight.rows()) + " input weights");

    ad::Var h = ad::matmul(gcnOperator, ad::matmul(features, encoder.lin1.weight));
    h = ad::addRowVector(h, encoder.lin1.bias);
    h = ad::batchNormColumns(h, encoder.bn1.gamma, encoder.bn1.beta, *encoder.bn1.stats, mode);
    h = ad::relu(h);

    h = ad::matmul(gcnOperator, ad::matmul(h, encoder.lin2.weight));
    h = ad::addRowVector(h, encoder.lin2.bias);
    h = ad::batchNormColumns(h, encoder.bn2.gamma, encoder.bn2.beta, *encoder.bn2.stats, mode);
    if (encoder.finalActivation == FinalActivation::Relu) h = ad::relu(h);
    return h;
}

ad::Var decode(ad::Tape& tape, const DecoderVars& decoder, const ad::Var& embeddings,
               ad::BnMode mode) {
    tape.checkSameTape(embeddings, "decode embeddings");
    if (embeddings.cols() != decoder.lin1.weight.rows())
        throw ShapeError("decode: " + std::to_string(embeddings.cols()) + " embedding columns vs " +
                         std::to_string(decoder.lin1.weight.rows()) + " input weights");

    ad::Var h = ad::addRowVector(ad::matmul(embeddings, decoder.lin1.weight), decoder.lin1.bias);
    h = ad::batchNormColumns(h, decoder.bn1.gamma, decoder.bn1.beta, *decoder.bn1.stats, mode);
    h = ad::relu(h);
    return ad::addRowVector(ad::matmul(h, decoder.lin2.weight), decoder.lin2.bias);
}

DenseMatrix inferEmbeddings(const ModelParams& params, const DenseMatrix& features,
                            const SparseAdjacency& gcnOperator) {
    ModelParams frozen = params;
    ad::Tape tape;
    ModelVars vars = liftParams(tape, frozen, /*trainable=*/false);
    ad::Var x = tape.constant(features);
    return encode(tape, vars.encoder, x, gcnOperator, ad::BnMode::Eval).value();
}

} // namespace spotrep
