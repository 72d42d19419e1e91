#pragma once

#include "lhm/chains.hpp"
#include "lhm/errors.hpp"
#include "lhm/flow.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace lhm {

struct TrainingConfig {
    std::size_t epochs = 100;
    // Upper bound; the effective batch is min(batch_size, max(1, N / 10)).
    std::size_t batch_size = 512;
    double learning_rate = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    std::uint64_t seed = 0;
    // Fit the flow's fixed offset/scale to the training samples before the
    // first epoch.
    bool standardize = true;

    void validate() const;
    std::size_t effective_batch_size(std::size_t n_samples) const;
};

// Mean negative log-density at temperature 1. Throws DimensionError on an
// empty batch.
double nll_loss(const RealNvpFlow& flow, const std::vector<Vector>& batch);

// Exact gradient of nll_loss with respect to RealNvpFlow::parameters().
// Throws NonFiniteError if any component is not finite.
Vector grad_nll(const RealNvpFlow& flow, const std::vector<Vector>& batch);

struct AdamState {
    Vector m;
    Vector v;
    std::size_t step = 0;
};

// Bias-corrected Adam update, in place. A default-constructed state is sized
// on first use.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, const TrainingConfig& config);

// Raised by train_flow when a batch loss or gradient is not finite.
class TrainingAborted : public NonFiniteError {
public:
    TrainingAborted(const std::string& what, std::vector<double> trace)
        : NonFiniteError(what), loss_trace(std::move(trace))
    {
    }
    std::vector<double> loss_trace;
};

struct TrainingResult {
    RealNvpFlow flow;
    // mean training loss per epoch
    std::vector<double> loss_trace;
};

// Maximum-likelihood fit by mini-batch Adam. Samples are reshuffled each
// epoch with a stream derived from config.seed. Throws TrainingAborted,
// carrying the per-epoch trace so far, if a batch loss is not finite.
TrainingResult train_flow(RealNvpFlow flow, const Chains& training, const TrainingConfig& config);

} // namespace lhm
