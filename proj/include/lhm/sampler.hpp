#pragma once

#include "lhm/chains.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>

namespace lhm {

using LogDensityFn = std::function<double(std::span<const double>)>;

// Affine-invariant ensemble sampler settings. `n_steps` counts retained
// samples per walker, `burn_in` the steps discarded before them.
struct SamplerConfig {
    std::size_t n_walkers = 100;
    std::size_t n_steps = 1000;
    std::size_t burn_in = 500;
    double stretch_a = 2.0;
    std::uint64_t seed = 0;
    Vector init_center;
    double init_radius = 1.0;
    std::size_t max_init_attempts = 10000;

    // Throws ConfigError. Requires an even walker count of at least 2 * dim.
    void validate(std::size_t dim) const;
};

struct StretchProposal {
    Vector candidate;
    double z = 1.0;
};

// Goodman-Weare stretch move: z = ((a - 1) u + 1)^2 / a, which has density
// proportional to 1/sqrt(z) on [1/a, a].
StretchProposal stretch_proposal(std::span<const double> walker, std::span<const double> partner, double a, double u);

struct SamplerRun {
    Chains chains;
    double acceptance_rate = 0.0;
    // Proposals whose target came back NaN or +inf; rejected and counted.
    std::size_t non_finite_rejections = 0;
};

// One chain per walker. Walkers are updated in two half-ensemble passes per
// step, each walker stretching towards a random member of the other half.
// Every walker owns an RNG stream derived from the seed.
SamplerRun run_sampler(const LogDensityFn& log_target, const SamplerConfig& config);

} // namespace lhm
