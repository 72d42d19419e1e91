#pragma once

#include "lhm/chains.hpp"
#include "lhm/flow.hpp"
#include "lhm/sampler.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace lhm {

// Estimate of the reciprocal evidence rho = 1/z and its error bars.
// Variances are stored as natural logs; a zero variance is -inf.
struct EvidenceResult {
    double log_rho_hat = 0.0;
    double log_z = 0.0;
    std::size_t n_terms = 0;
    double var_rho_hat_log = 0.0;
    double var_of_var_log = 0.0;
    double sigma_log_z = 0.0;

    // fraction of terms more than 20 nats above the median term
    double tail_fraction = 0.0;
    // share of exp-mass carried by the single largest term
    double top_term_share = 0.0;
    bool flagged = false;

    double var_rho_hat() const;
    double var_of_var() const;
};

// x_i = log phi(theta_i) - log L(theta_i) - log pi(theta_i) for every sample.
// Throws NonFiniteError if any term is not finite.
std::vector<double> log_estimator_terms(const LogDensityFn& log_target, const Chains& inference,
                                        const LogDensityFn& log_likelihood, const LogDensityFn& log_prior);

// The flow, concentrated to `temperature`, as the target phi.
std::vector<double> log_estimator_terms(const RealNvpFlow& flow, double temperature, const Chains& inference,
                                        const LogDensityFn& log_likelihood, const LogDensityFn& log_prior);

// Treats the terms as independent draws:
//   rho_hat = mean(exp(x)), var = s^2 / N with s^2 the unbiased sample
//   variance, var_of_var = (m4 - s^4 (N-3)/(N-1)) / N^3,
//   sigma_log_z = sqrt(var) / rho_hat.
// Throws DimensionError for fewer than two terms, NonFiniteError on
// non-finite input.
EvidenceResult estimate_evidence(std::span<const double> terms);

// Same point estimate; the variance and variance-of-variance come from the
// dispersion of per-chain means (weighted by chain length, with an effective
// count N_eff = N^2 / sum(n_c^2)), which stays honest when samples within a
// chain are autocorrelated. Needs at least two chains.
EvidenceResult estimate_evidence_chainwise(std::span<const double> terms, std::span<const std::size_t> chain_lengths);

struct BayesFactor {
    double log_bf = 0.0;
    double sigma = 0.0;
};

// log z1 - log z2, errors added in quadrature.
BayesFactor log_bayes_factor(const EvidenceResult& first, const EvidenceResult& second);

} // namespace lhm
