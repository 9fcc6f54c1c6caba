#include "spotrep/optim.hpp"

#include <cmath>
#include <string>

namespace spotrep {

void adamStep(DenseMatrix& param, const DenseMatrix& grad, AdamSlot& slot,
              std::size_t stepNumber, const AdamConfig& cfg) {
    if (!param.sameShape(grad))
        throw ShapeError("adamStep: parameter " + std::to_string(param.rows()) + "x" +
                         std::to_string(param.cols()) + " vs gradient " +
                         std::to_string(grad.rows()) + "x" + std::to_string(grad.cols()));
    if (!grad.allFinite())
        throw NumericError("adamStep: non-finite gradient, step aborted");
    if (stepNumber == 0) throw ParamError("adamStep: stepNumber is 1-based");

    if (slot.m.empty()) slot.m = DenseMatrix(param.rows(), param.cols());
    if (slot.v.empty()) slot.v = DenseMatrix(param.rows(), param.cols());

    const double corr1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(stepNumber));
    const double corr2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(stepNumber));

    auto p = param.values();
    auto g = grad.values();
    auto m = slot.m.values();
    auto v = slot.v.values();
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double gi = g[i] + cfg.weightDecay * p[i];
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
        const double mhat = m[i] / corr1;
        const double vhat = v[i] / corr2;
        p[i] -= cfg.learningRate * mhat / (std::sqrt(vhat) + cfg.epsilon);
    }
}

void AdamOptimizer::step(std::span<DenseMatrix*> params, std::span<const DenseMatrix> grads) {
    if (params.size() != grads.size())
        throw ParamError("AdamOptimizer: " + std::to_string(params.size()) + " params vs " +
                         std::to_string(grads.size()) + " gradients");
    if (slots_.empty()) slots_.resize(params.size());
    if (slots_.size() != params.size())
        throw StateError("AdamOptimizer: slot count does not match parameter count");
    ++steps_;
    for (std::size_t i = 0; i < params.size(); ++i)
        adamStep(*params[i], grads[i], slots_[i], steps_, cfg_);
}

void AdamOptimizer::restore(std::vector<AdamSlot> slots, std::size_t steps) {
    slots_ = std::move(slots);
    steps_ = steps;
}

} // namespace spotrep
