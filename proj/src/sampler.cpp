#include "lhm/sampler.hpp"

#include "lhm/errors.hpp"
#include "lhm/random.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <string>

namespace lhm {

void SamplerConfig::validate(std::size_t dim) const
{
    if (dim == 0) {
        throw ConfigError("sampler: dimension must be positive");
    }
    if (n_walkers < 2 * dim) {
        throw ConfigError("sampler: need at least 2*dim = " + std::to_string(2 * dim) + " walkers, got " +
                          std::to_string(n_walkers));
    }
    if (n_walkers % 2 != 0) {
        throw ConfigError("sampler: walker count must be even");
    }
    if (!(stretch_a > 1.0)) {
        throw ConfigError("sampler: stretch scale a must exceed 1");
    }
    if (n_steps == 0) {
        throw ConfigError("sampler: n_steps must be positive");
    }
    if (!(init_radius > 0.0)) {
        throw ConfigError("sampler: init_radius must be positive");
    }
}

StretchProposal stretch_proposal(std::span<const double> walker, std::span<const double> partner, double a, double u)
{
    const double root = (a - 1.0) * u + 1.0;
    StretchProposal p;
    p.z = root * root / a;
    p.candidate.resize(walker.size());
    for (std::size_t j = 0; j < walker.size(); ++j) {
        p.candidate[j] = partner[j] + p.z * (walker[j] - partner[j]);
    }
    return p;
}

namespace {

// Uniform point in the ball of `radius` around `center`.
Vector draw_in_ball(const Vector& center, double radius, Rng& rng)
{
    std::normal_distribution<double> normal;
    const std::size_t dim = center.size();
    Vector dir(dim);
    double norm2 = 0.0;
    do {
        norm2 = 0.0;
        for (auto& d : dir) {
            d = normal(rng);
            norm2 += d * d;
        }
    } while (norm2 == 0.0);
    const double r = radius * std::pow(uniform01(rng), 1.0 / static_cast<double>(dim)) / std::sqrt(norm2);
    Vector x(dim);
    for (std::size_t j = 0; j < dim; ++j) {
        x[j] = center[j] + r * dir[j];
    }
    return x;
}

} // namespace

SamplerRun run_sampler(const LogDensityFn& log_target, const SamplerConfig& config)
{
    const std::size_t dim = config.init_center.size();
    config.validate(dim);
    const std::size_t n_walkers = config.n_walkers;
    const std::size_t half = n_walkers / 2;

    std::vector<Rng> rngs;
    rngs.reserve(n_walkers);
    for (std::size_t w = 0; w < n_walkers; ++w) {
        rngs.push_back(make_rng(config.seed, w + 1));
    }

    std::vector<Vector> pos(n_walkers);
    std::vector<double> logp(n_walkers);
    for (std::size_t w = 0; w < n_walkers; ++w) {
        bool ok = false;
        for (std::size_t attempt = 0; attempt < config.max_init_attempts; ++attempt) {
            pos[w] = draw_in_ball(config.init_center, config.init_radius, rngs[w]);
            logp[w] = log_target(pos[w]);
            if (std::isfinite(logp[w])) {
                ok = true;
                break;
            }
        }
        if (!ok) {
            throw ConvergenceError("sampler: no finite-target starting point for walker " + std::to_string(w) +
                                   " after " + std::to_string(config.max_init_attempts) + " attempts");
        }
    }

    const std::size_t total_steps = config.burn_in + config.n_steps;
    std::vector<std::size_t> lengths(n_walkers, config.n_steps);
    std::vector<double> data(n_walkers * config.n_steps * dim);
    std::vector<double> log_post(n_walkers * config.n_steps);

    std::size_t accepted = 0;
    std::size_t proposed = 0;
    std::size_t non_finite = 0;
    const double exponent = static_cast<double>(dim) - 1.0;

    for (std::size_t step = 0; step < total_steps; ++step) {
        for (std::size_t pass = 0; pass < 2; ++pass) {
            const std::size_t first = pass * half;
            const std::size_t partners = (1 - pass) * half;
            for (std::size_t w = first; w < first + half; ++w) {
                auto& rng = rngs[w];
                auto k = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(half));
                if (k >= half) {
                    k = half - 1;
                }
                const auto& partner = pos[partners + k];
                auto prop = stretch_proposal(pos[w], partner, config.stretch_a, uniform01(rng));
                const double u_accept = uniform01(rng);
                const double cand_logp = log_target(prop.candidate);
                ++proposed;
                if (std::isnan(cand_logp) || cand_logp == std::numeric_limits<double>::infinity()) {
                    ++non_finite;
                    continue;
                }
                if (cand_logp == -std::numeric_limits<double>::infinity()) {
                    continue;
                }
                const double log_ratio = exponent * std::log(prop.z) + cand_logp - logp[w];
                if (log_ratio >= 0.0 || std::log(u_accept) < log_ratio) {
                    pos[w] = std::move(prop.candidate);
                    logp[w] = cand_logp;
                    ++accepted;
                }
            }
        }
        if (step >= config.burn_in) {
            const std::size_t t = step - config.burn_in;
            for (std::size_t w = 0; w < n_walkers; ++w) {
                const std::size_t row = w * config.n_steps + t;
                std::copy(pos[w].begin(), pos[w].end(), data.begin() + static_cast<std::ptrdiff_t>(row * dim));
                log_post[row] = logp[w];
            }
        }
    }

    SamplerRun run;
    run.chains = build_chains_flat(dim, std::move(lengths), std::move(data), std::move(log_post));
    run.acceptance_rate = proposed == 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(proposed);
    run.non_finite_rejections = non_finite;
    return run;
}

} // namespace lhm
