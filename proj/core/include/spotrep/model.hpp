#pragma once

#include "spotrep/autodiff.hpp"
#include "spotrep/matrix.hpp"

#include <cstdint>
#include <functional>
#include <string>

namespace spotrep {

enum class FinalActivation { Relu, None };

struct ModelConfig {
    std::size_t geneCount = 0;
    std::size_t hiddenDim = 256;
    std::size_t latentDim = 64;
    /// Whether the second encoder layer keeps its ReLU; the documented
    /// default applies batch-norm + ReLU after both layers.
    FinalActivation finalActivation = FinalActivation::Relu;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct LinearParams {
    DenseMatrix weight; // in x out
    DenseMatrix bias;   // 1 x out
};

struct BatchNormParams {
    DenseMatrix gamma; // 1 x dim
    DenseMatrix beta;  // 1 x dim
    ad::BatchNormStats stats;
};

/// Two graph-convolution layers, each followed by batch norm and ReLU
/// (the second ReLU per ModelConfig::finalActivation).
struct EncoderParams {
    LinearParams lin1, lin2;
    BatchNormParams bn1, bn2;
};

/// Two-layer MLP: linear -> batch norm -> ReLU -> linear (no activation on
/// the reconstruction head).
struct DecoderParams {
    LinearParams lin1, lin2;
    BatchNormParams bn1;
};

struct ModelParams {
    ModelConfig config;
    EncoderParams encoder;
    DecoderParams decoder;

    /// Visits every trainable tensor in a fixed order; checkpoints and the
    /// optimizer rely on this ordering.
    void forEachTensor(const std::function<void(const std::string&, DenseMatrix&)>& fn);
    void forEachTensor(const std::function<void(const std::string&, const DenseMatrix&)>& fn) const;
    std::size_t tensorCount() const;
};

/// Glorot-uniform weights, zero biases, unit batch-norm scale, empty
/// running stats; deterministic per seed.
ModelParams initParams(const ModelConfig& config, std::uint64_t seed);

// --- tape-side handles for one differentiable forward pass ---

struct LinearVars {
    ad::Var weight, bias;
};
struct BatchNormVars {
    ad::Var gamma, beta;
    ad::BatchNormStats* stats = nullptr;
};
struct EncoderVars {
    LinearVars lin1, lin2;
    BatchNormVars bn1, bn2;
    FinalActivation finalActivation = FinalActivation::Relu;
};
struct DecoderVars {
    LinearVars lin1, lin2;
    BatchNormVars bn1;
};
struct ModelVars {
    EncoderVars encoder;
    DecoderVars decoder;
    std::vector<ad::Var> leaves; // same order as forEachTensor
};

/// Registers every parameter tensor on the tape (leaves when trainable,
/// constants otherwise) and binds the batch-norm running stats.
ModelVars liftParams(ad::Tape& tape, ModelParams& params, bool trainable);

/// Per layer: operator * (H * W) + b -> batch norm -> ReLU.
ad::Var encode(ad::Tape& tape, const EncoderVars& encoder, const ad::Var& features,
               const SparseAdjacency& gcnOperator, ad::BnMode mode);

ad::Var decode(ad::Tape& tape, const DecoderVars& decoder, const ad::Var& embeddings,
               ad::BnMode mode);

/// Eval-mode embeddings on the original (unaugmented) graph and features.
/// Runs on a frozen copy of the parameters; running stats are not touched.
DenseMatrix inferEmbeddings(const ModelParams& params, const DenseMatrix& features,
                            const SparseAdjacency& gcnOperator);

} // namespace spotrep
