#pragma once

#include "spotrep/errors.hpp"
#include "spotrep/matrix.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace spotrep {

/// First/second-moment buffers for one parameter tensor.
struct AdamSlot {
    DenseMatrix m;
    DenseMatrix v;
};

struct AdamConfig {
    double learningRate = 1e-3;
    double weightDecay = 0.0; // L2 term added to the gradient
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// One Adam update with bias correction; stepNumber is 1-based. Throws
/// NumericError on non-finite gradients before touching the parameter.
void adamStep(DenseMatrix& param, const DenseMatrix& grad, AdamSlot& slot,
              std::size_t stepNumber, const AdamConfig& cfg);

/// Adam over an ordered set of tensors sharing a single step counter.
class AdamOptimizer {
public:
    explicit AdamOptimizer(AdamConfig cfg = {}) : cfg_(cfg) {}

    void step(std::span<DenseMatrix*> params, std::span<const DenseMatrix> grads);

    const AdamConfig& config() const noexcept { return cfg_; }
    std::size_t stepCount() const noexcept { return steps_; }

    // Exposed for checkpointing.
    std::vector<AdamSlot>& slots() noexcept { return slots_; }
    const std::vector<AdamSlot>& slots() const noexcept { return slots_; }
    void restore(std::vector<AdamSlot> slots, std::size_t steps);

private:
    AdamConfig cfg_;
    std::vector<AdamSlot> slots_;
    std::size_t steps_ = 0;
};

} // namespace spotrep
