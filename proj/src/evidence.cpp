#include "lhm/evidence.hpp"

#include "lhm/errors.hpp"
#include "lhm/log_math.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace lhm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kTailGap = 20.0;
constexpr double kDominanceShare = 0.99;

double safe_log(double v)
{
    return v > 0.0 ? std::log(v) : kNegInf;
}

void check_terms(std::span<const double> terms)
{
    if (terms.size() < 2) {
        throw DimensionError("estimate_evidence: need at least two terms");
    }
    for (std::size_t i = 0; i < terms.size(); ++i) {
        if (!std::isfinite(terms[i])) {
            throw NonFiniteError("estimate_evidence: term " + std::to_string(i) + " is not finite");
        }
    }
}

// Moments of values y_c = exp(log_values[c]) with integer weights n_c. All
// exponentials are taken relative to the largest log value.
void fill_moments(EvidenceResult& r, std::span<const double> log_values, std::span<const std::size_t> weights)
{
    const double shift = *std::max_element(log_values.begin(), log_values.end());
    double n_total = 0.0;
    double n_sq = 0.0;
    double mean = 0.0;
    for (std::size_t c = 0; c < log_values.size(); ++c) {
        const auto w = static_cast<double>(weights[c]);
        n_total += w;
        n_sq += w * w;
        mean += w * std::exp(log_values[c] - shift);
    }
    mean /= n_total;
    double m2 = 0.0;
    double m4 = 0.0;
    for (std::size_t c = 0; c < log_values.size(); ++c) {
        const auto w = static_cast<double>(weights[c]);
        const double dev = std::exp(log_values[c] - shift) - mean;
        const double dev2 = dev * dev;
        m2 += w * dev2;
        m4 += w * dev2 * dev2;
    }
    m2 /= n_total;
    m4 /= n_total;

    const double n_eff = n_total * n_total / n_sq;
    const double s2 = m2 * n_eff / (n_eff - 1.0);
    const double var = s2 / n_eff;
    const double var_of_var = (m4 - s2 * s2 * (n_eff - 3.0) / (n_eff - 1.0)) / (n_eff * n_eff * n_eff);

    r.var_rho_hat_log = safe_log(var) + 2.0 * shift;
    r.var_of_var_log = safe_log(var_of_var) + 4.0 * shift;
    r.sigma_log_z = std::isfinite(r.var_rho_hat_log) ? std::exp(0.5 * r.var_rho_hat_log - r.log_rho_hat) : 0.0;
}

void fill_point_estimate(EvidenceResult& r, std::span<const double> terms)
{
    const double lse = log_sum_exp(terms);
    r.n_terms = terms.size();
    r.log_rho_hat = lse - std::log(static_cast<double>(terms.size()));
    r.log_z = -r.log_rho_hat;

    const double top = *std::max_element(terms.begin(), terms.end());
    r.top_term_share = std::exp(top - lse);
    std::vector<double> sorted(terms.begin(), terms.end());
    const auto mid = sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2);
    std::nth_element(sorted.begin(), mid, sorted.end());
    double median = *mid;
    if (sorted.size() % 2 == 0) {
        median = 0.5 * (median + *std::max_element(sorted.begin(), mid));
    }
    const auto n_tail = std::count_if(terms.begin(), terms.end(), [&](double x) { return x - median > kTailGap; });
    r.tail_fraction = static_cast<double>(n_tail) / static_cast<double>(terms.size());
    r.flagged = r.top_term_share > kDominanceShare;
}

} // namespace

double EvidenceResult::var_rho_hat() const
{
    return std::exp(var_rho_hat_log);
}

double EvidenceResult::var_of_var() const
{
    return std::exp(var_of_var_log);
}

std::vector<double> log_estimator_terms(const LogDensityFn& log_target, const Chains& inference,
                                        const LogDensityFn& log_likelihood, const LogDensityFn& log_prior)
{
    if (inference.n_samples() == 0) {
        throw DimensionError("log_estimator_terms: no inference samples");
    }
    std::vector<double> terms(inference.n_samples());
    for (std::size_t i = 0; i < terms.size(); ++i) {
        const auto theta = inference.sample(i);
        terms[i] = log_target(theta) - log_likelihood(theta) - log_prior(theta);
        if (!std::isfinite(terms[i])) {
            throw NonFiniteError("log_estimator_terms: term " + std::to_string(i) + " is not finite");
        }
    }
    return terms;
}

std::vector<double> log_estimator_terms(const RealNvpFlow& flow, double temperature, const Chains& inference,
                                        const LogDensityFn& log_likelihood, const LogDensityFn& log_prior)
{
    check_temperature(temperature);
    if (inference.dim() != flow.dim()) {
        throw DimensionError("log_estimator_terms: flow and samples differ in dimension");
    }
    return log_estimator_terms([&](std::span<const double> x) { return flow.log_density(x, temperature); },
                               inference, log_likelihood, log_prior);
}

EvidenceResult estimate_evidence(std::span<const double> terms)
{
    check_terms(terms);
    EvidenceResult r;
    fill_point_estimate(r, terms);
    const std::vector<std::size_t> ones(terms.size(), 1);
    fill_moments(r, terms, ones);
    return r;
}

EvidenceResult estimate_evidence_chainwise(std::span<const double> terms, std::span<const std::size_t> chain_lengths)
{
    check_terms(terms);
    if (std::accumulate(chain_lengths.begin(), chain_lengths.end(), std::size_t{0}) != terms.size()) {
        throw DimensionError("estimate_evidence_chainwise: chain lengths do not sum to the term count");
    }
    std::vector<double> chain_log_means;
    std::vector<std::size_t> weights;
    std::size_t pos = 0;
    for (auto n : chain_lengths) {
        if (n == 0) {
            continue;
        }
        const auto chunk = terms.subspan(pos, n);
        chain_log_means.push_back(log_sum_exp(chunk) - std::log(static_cast<double>(n)));
        weights.push_back(n);
        pos += n;
    }
    if (chain_log_means.size() < 2) {
        throw DimensionError("estimate_evidence_chainwise: need at least two non-empty chains");
    }
    EvidenceResult r;
    fill_point_estimate(r, terms);
    fill_moments(r, chain_log_means, weights);
    return r;
}

BayesFactor log_bayes_factor(const EvidenceResult& first, const EvidenceResult& second)
{
    return {first.log_z - second.log_z, std::hypot(first.sigma_log_z, second.sigma_log_z)};
}

} // namespace lhm
