#include "lhm/benchmarks.hpp"

#include "lhm/errors.hpp"
#include "lhm/log_math.hpp"
#include "lhm/random.hpp"
#include "text_format.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <numbers>
#include <random>

namespace lhm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
const double kLog2Pi = std::log(2.0 * std::numbers::pi);

} // namespace

LogDensityFn BenchmarkProblem::log_posterior() const
{
    return [like = log_likelihood, prior = log_prior](std::span<const double> x) {
        const double lp = prior(x);
        if (lp == kNegInf) {
            return kNegInf;
        }
        return like(x) + lp;
    };
}

double rosenbrock_log_likelihood(std::span<const double> x)
{
    const double a = 1.0 - x[0];
    const double b = x[1] - x[0] * x[0];
    return -(a * a + 100.0 * b * b);
}

double uniform_box_log_prior(std::span<const double> x, const Box2& box)
{
    return box.contains(x) ? -std::log(box.area()) : kNegInf;
}

double uniform_log_prior(std::span<const double> x)
{
    return uniform_box_log_prior(x, kRosenbrockBox);
}

void NormalGammaPrior::validate() const
{
    if (!(tau0 > 0.0 && a0 > 0.0 && b0 > 0.0)) {
        throw ConfigError("normal-gamma: tau0, a0 and b0 must be positive");
    }
}

double normal_gamma_log_likelihood(std::span<const double> v, std::span<const double> data)
{
    const double mu = v[0];
    const double ell = v[1];
    const double tau = std::exp(ell);
    double ss = 0.0;
    for (double y : data) {
        ss += (y - mu) * (y - mu);
    }
    const auto n = static_cast<double>(data.size());
    return 0.5 * n * (ell - kLog2Pi) - 0.5 * tau * ss;
}

double normal_gamma_log_prior(std::span<const double> v, const NormalGammaPrior& prior)
{
    const double mu = v[0];
    const double ell = v[1];
    const double tau = std::exp(ell);
    const double prec_mu = prior.tau0 * tau;
    const double log_normal = 0.5 * (std::log(prec_mu) - kLog2Pi) - 0.5 * prec_mu * (mu - prior.mu0) * (mu - prior.mu0);
    // Gamma density of tau in the rate parametrization, times d tau / d ell = tau
    const double log_gamma = prior.a0 * std::log(prior.b0) - std::lgamma(prior.a0) + (prior.a0 - 1.0) * ell -
                             prior.b0 * tau;
    return log_normal + log_gamma + ell;
}

double normal_gamma_log_posterior(std::span<const double> v, std::span<const double> data,
                                  const NormalGammaPrior& prior)
{
    return normal_gamma_log_likelihood(v, data) + normal_gamma_log_prior(v, prior);
}

double normal_gamma_analytic_log_evidence(std::span<const double> data, const NormalGammaPrior& prior)
{
    prior.validate();
    const auto n = static_cast<double>(data.size());
    if (data.empty()) {
        return 0.0;
    }
    double mean = 0.0;
    for (double y : data) {
        mean += y;
    }
    mean /= n;
    double ss = 0.0;
    for (double y : data) {
        ss += (y - mean) * (y - mean);
    }
    const double a_n = prior.a0 + 0.5 * n;
    const double b_n =
        prior.b0 + 0.5 * (ss + prior.tau0 * n * (mean - prior.mu0) * (mean - prior.mu0) / (prior.tau0 + n));
    return -0.5 * n * kLog2Pi + 0.5 * std::log(prior.tau0 / (prior.tau0 + n)) + std::lgamma(a_n) -
           std::lgamma(prior.a0) + prior.a0 * std::log(prior.b0) - a_n * std::log(b_n);
}

std::vector<double> generate_normal_gamma_data(std::size_t n, double mean, double precision, std::uint64_t seed)
{
    if (!(precision > 0.0)) {
        throw ConfigError("normal-gamma data: precision must be positive");
    }
    auto rng = make_rng(seed, 0xda7a);
    std::normal_distribution<double> normal(mean, 1.0 / std::sqrt(precision));
    std::vector<double> out(n);
    for (auto& y : out) {
        y = normal(rng);
    }
    return out;
}

double logistic_log_likelihood(std::span<const double> theta, const Matrix& x, std::span<const int> labels)
{
    if (theta.size() != x.cols || labels.size() != x.rows) {
        throw DimensionError("logistic likelihood: theta, design matrix and labels disagree in shape");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < x.rows; ++i) {
        const auto row = x.row(i);
        double eta = 0.0;
        for (std::size_t j = 0; j < x.cols; ++j) {
            eta += theta[j] * row[j];
        }
        const double sign = labels[i] == 1 ? 1.0 : -1.0;
        total -= softplus(-sign * eta);
    }
    return total;
}

double gaussian_log_prior(std::span<const double> theta, double precision)
{
    if (!(precision > 0.0)) {
        throw ConfigError("gaussian prior: precision must be positive");
    }
    double total = 0.0;
    const double c = 0.5 * (std::log(precision) - kLog2Pi);
    for (double t : theta) {
        total += c - 0.5 * precision * t * t;
    }
    return total;
}

PimaDataset read_pima_data(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line)) {
        throw DataError("pima: file is empty");
    }
    const auto header = split_csv_line(line);
    if (header.size() != kPimaColumns.size() + 1) {
        throw DataError("pima: expected 8 columns in the header");
    }
    for (std::size_t j = 0; j < kPimaColumns.size(); ++j) {
        if (header[j] != kPimaColumns[j]) {
            throw DataError("pima: column " + std::to_string(j) + " should be " + kPimaColumns[j]);
        }
    }
    if (header.back() != "label") {
        throw DataError("pima: last column should be label");
    }

    PimaDataset ds;
    ds.predictors.cols = kPimaColumns.size();
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") {
            continue;
        }
        const auto fields = split_csv_line(line);
        if (fields.size() != header.size()) {
            throw DataError("pima: line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                            " fields, expected 8");
        }
        for (std::size_t j = 0; j < kPimaColumns.size(); ++j) {
            ds.predictors.data.push_back(parse_double(fields[j], line_no));
        }
        const double label = parse_double(fields.back(), line_no);
        if (label != 0.0 && label != 1.0) {
            throw DataError("pima: line " + std::to_string(line_no) + " has label " + std::string(fields.back()) +
                            ", expected 0 or 1");
        }
        ds.labels.push_back(static_cast<int>(label));
    }
    ds.n = ds.labels.size();
    ds.predictors.rows = ds.n;
    if (ds.n != kPimaRows) {
        throw DataError("pima: expected " + std::to_string(kPimaRows) + " rows, found " + std::to_string(ds.n));
    }
    return ds;
}

PimaDataset load_pima_data(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw DataError("pima: cannot open " + path);
    }
    return read_pima_data(in);
}

Matrix pima_design_matrix(const PimaDataset& dataset, PimaModel model, bool standardize)
{
    // indices into kPimaColumns: NP, PGC, BMI, DP [, AGE]
    std::vector<std::size_t> columns{0, 1, 4, 5};
    if (model == PimaModel::M2) {
        columns.push_back(6);
    }
    Matrix x;
    x.rows = dataset.n;
    x.cols = columns.size() + 1;
    x.data.assign(x.rows * x.cols, 1.0);
    for (std::size_t k = 0; k < columns.size(); ++k) {
        double mean = 0.0;
        double var = 0.0;
        if (standardize) {
            for (std::size_t i = 0; i < x.rows; ++i) {
                mean += dataset.predictors(i, columns[k]);
            }
            mean /= static_cast<double>(x.rows);
            for (std::size_t i = 0; i < x.rows; ++i) {
                const double d = dataset.predictors(i, columns[k]) - mean;
                var += d * d;
            }
            var /= static_cast<double>(x.rows);
        }
        const double sd = standardize && var > 0.0 ? std::sqrt(var) : 1.0;
        for (std::size_t i = 0; i < x.rows; ++i) {
            x.data[i * x.cols + k + 1] = (dataset.predictors(i, columns[k]) - mean) / sd;
        }
    }
    return x;
}

namespace {

double trapezoid_log_integral(const LogDensityFn& log_f, const Box2& box, std::size_t n)
{
    const double h0 = (box.hi0 - box.lo0) / static_cast<double>(n);
    const double h1 = (box.hi1 - box.lo1) / static_cast<double>(n);
    const double log_edge = std::log(0.5);
    std::vector<double> row(n + 1);
    double total = kNegInf;
    double x[2];
    for (std::size_t i = 0; i <= n; ++i) {
        // pin the last node to the upper bound so boundary points are exact
        x[0] = i == n ? box.hi0 : box.lo0 + static_cast<double>(i) * h0;
        const double w0 = (i == 0 || i == n) ? log_edge : 0.0;
        for (std::size_t j = 0; j <= n; ++j) {
            x[1] = j == n ? box.hi1 : box.lo1 + static_cast<double>(j) * h1;
            const double w1 = (j == 0 || j == n) ? log_edge : 0.0;
            row[j] = log_f(std::span<const double>(x, 2)) + w0 + w1;
        }
        total = log_add_exp(total, log_sum_exp(row));
    }
    return total + std::log(h0) + std::log(h1);
}

} // namespace

double quadrature_log_evidence(const LogDensityFn& log_likelihood, const LogDensityFn& log_prior, const Box2& box,
                               const QuadratureOptions& options)
{
    if (!(box.hi0 > box.lo0 && box.hi1 > box.lo1)) {
        throw ConfigError("quadrature: empty box");
    }
    auto log_f = [&](std::span<const double> x) {
        const double lp = log_prior(x);
        return lp == kNegInf ? kNegInf : log_likelihood(x) + lp;
    };
    std::size_t n = std::max<std::size_t>(options.initial_intervals, 2);
    double previous = trapezoid_log_integral(log_f, box, n);
    while (n * 2 <= options.max_intervals) {
        n *= 2;
        const double current = trapezoid_log_integral(log_f, box, n);
        if (std::isfinite(current) && std::abs(current - previous) < options.tolerance) {
            return current;
        }
        previous = current;
    }
    throw ConvergenceError("quadrature: no convergence to " + std::to_string(options.tolerance) + " within " +
                           std::to_string(options.max_intervals) + " intervals per axis");
}

BenchmarkProblem rosenbrock_problem()
{
    BenchmarkProblem p;
    p.name = "rosenbrock";
    p.dim = 2;
    p.log_likelihood = rosenbrock_log_likelihood;
    p.log_prior = uniform_log_prior;
    p.init_center = {1.0, 1.0};
    p.init_radius = 0.5;
    p.flow_preset = default_architecture();
    static const double truth = quadrature_log_evidence(rosenbrock_log_likelihood, uniform_log_prior, kRosenbrockBox);
    p.ground_truth = GroundTruth{truth, "quadrature"};
    return p;
}

BenchmarkProblem normal_gamma_problem(std::vector<double> data, const NormalGammaPrior& prior)
{
    prior.validate();
    if (data.empty()) {
        throw ConfigError("normal-gamma: the benchmark needs at least one datum");
    }
    BenchmarkProblem p;
    p.name = "normal_gamma";
    p.dim = 2;
    double mean = 0.0;
    for (double y : data) {
        mean += y;
    }
    mean /= static_cast<double>(data.size());
    double var = 0.0;
    for (double y : data) {
        var += (y - mean) * (y - mean);
    }
    var /= static_cast<double>(data.size());
    p.init_center = {mean, var > 0.0 ? -std::log(var) : 0.0};
    p.init_radius = 0.1;
    p.flow_preset = default_architecture();
    p.ground_truth = GroundTruth{normal_gamma_analytic_log_evidence(data, prior), "analytic"};
    auto shared = std::make_shared<const std::vector<double>>(std::move(data));
    p.log_likelihood = [shared](std::span<const double> v) { return normal_gamma_log_likelihood(v, *shared); };
    p.log_prior = [prior](std::span<const double> v) { return normal_gamma_log_prior(v, prior); };
    return p;
}

BenchmarkProblem pima_problem(const PimaDataset& dataset, PimaModel model, double precision)
{
    if (!(precision > 0.0)) {
        throw ConfigError("pima: prior precision must be positive");
    }
    auto x = std::make_shared<const Matrix>(pima_design_matrix(dataset, model));
    auto labels = std::make_shared<const std::vector<int>>(dataset.labels);
    BenchmarkProblem p;
    p.name = model == PimaModel::M1 ? "pima_m1" : "pima_m2";
    p.dim = x->cols;
    p.log_likelihood = [x, labels](std::span<const double> theta) {
        return logistic_log_likelihood(theta, *x, *labels);
    };
    p.log_prior = [precision](std::span<const double> theta) { return gaussian_log_prior(theta, precision); };
    p.init_center.assign(p.dim, 0.0);
    p.init_radius = 0.1;
    p.flow_preset = pima_architecture();
    p.ground_truth = GroundTruth{std::nullopt, "published"};
    return p;
}

} // namespace lhm
