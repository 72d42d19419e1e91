#pragma once

#include "lhm/chains.hpp"
#include "lhm/flow.hpp"
#include "lhm/sampler.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lhm {

struct GroundTruth {
    // absent when only a derived quantity (a Bayes factor) is published
    std::optional<double> log_z;
    std::string source; // analytic | quadrature | published
};

struct BenchmarkProblem {
    std::string name;
    std::size_t dim = 0;
    LogDensityFn log_likelihood;
    LogDensityFn log_prior;
    Vector init_center;
    double init_radius = 1.0;
    FlowArchitecture flow_preset;
    std::optional<GroundTruth> ground_truth;

    LogDensityFn log_posterior() const;
};

// Closed axis-aligned box in two dimensions.
struct Box2 {
    double lo0 = 0.0;
    double hi0 = 0.0;
    double lo1 = 0.0;
    double hi1 = 0.0;

    double area() const { return (hi0 - lo0) * (hi1 - lo1); }
    bool contains(std::span<const double> x) const
    {
        return x[0] >= lo0 && x[0] <= hi0 && x[1] >= lo1 && x[1] <= hi1;
    }
};

// x0 in [-10, 10], x1 in [-5, 15]
inline constexpr Box2 kRosenbrockBox{-10.0, 10.0, -5.0, 15.0};

// -[(1 - x0)^2 + 100 (x1 - x0^2)^2]
double rosenbrock_log_likelihood(std::span<const double> x);
// -log(area) inside the Rosenbrock box, -inf outside
double uniform_log_prior(std::span<const double> x);
double uniform_box_log_prior(std::span<const double> x, const Box2& box);

// Normal-Gamma model in (mu, ell = log tau):
//   y_i ~ N(mu, 1/tau), mu ~ N(mu0, 1/(tau0 tau)), tau ~ Ga(a0, rate b0)
struct NormalGammaPrior {
    double mu0 = 0.0;
    double tau0 = 1.0;
    double a0 = 1e-3;
    double b0 = 1e-3;

    void validate() const;
};

double normal_gamma_log_likelihood(std::span<const double> v, std::span<const double> data);
// includes the +ell Jacobian of tau -> log tau
double normal_gamma_log_prior(std::span<const double> v, const NormalGammaPrior& prior);
double normal_gamma_log_posterior(std::span<const double> v, std::span<const double> data,
                                  const NormalGammaPrior& prior);
double normal_gamma_analytic_log_evidence(std::span<const double> data, const NormalGammaPrior& prior);
std::vector<double> generate_normal_gamma_data(std::size_t n, double mean, double precision, std::uint64_t seed);

struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data; // row-major

    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

// sum_i -log(1 + exp(-(2 y_i - 1) theta.x_i)); throws DimensionError on shape mismatch
double logistic_log_likelihood(std::span<const double> theta, const Matrix& x, std::span<const int> labels);
// independent N(0, 1/precision) per coordinate
double gaussian_log_prior(std::span<const double> theta, double precision);

inline constexpr std::size_t kPimaRows = 532;
inline constexpr std::array<const char*, 7> kPimaColumns{"NP", "PGC", "BP", "TST", "BMI", "DP", "AGE"};
// log BF12 of the two-model comparison, from a reversible jump reference run
inline constexpr double kPimaPublishedLogBayesFactor = 2.6362;
inline constexpr double kPimaPriorPrecision = 0.01;

struct PimaDataset {
    std::size_t n = 0;
    Matrix predictors; // n x 7 in kPimaColumns order
    std::vector<int> labels;
};

// CSV with header NP,PGC,BP,TST,BMI,DP,AGE,label and exactly 532 rows.
// Throws DataError on any deviation.
PimaDataset load_pima_data(const std::string& path);
PimaDataset read_pima_data(std::istream& in);

enum class PimaModel { M1, M2 };

// Bias column first, then NP, PGC, BMI, DP (and AGE for M2). With
// `standardize`, every covariate column is centred and scaled to unit
// population standard deviation.
Matrix pima_design_matrix(const PimaDataset& dataset, PimaModel model, bool standardize = true);

struct QuadratureOptions {
    std::size_t initial_intervals = 64;
    std::size_t max_intervals = 8192;
    double tolerance = 1e-6;
};

// log of the trapezoid integral of exp(log_likelihood + log_prior) over the
// box, accumulated in log space. The grid is doubled until successive log
// estimates differ by less than the tolerance; throws ConvergenceError at
// the cap.
double quadrature_log_evidence(const LogDensityFn& log_likelihood, const LogDensityFn& log_prior, const Box2& box,
                               const QuadratureOptions& options = {});

BenchmarkProblem rosenbrock_problem();
BenchmarkProblem normal_gamma_problem(std::vector<double> data, const NormalGammaPrior& prior);
BenchmarkProblem pima_problem(const PimaDataset& dataset, PimaModel model, double precision = kPimaPriorPrecision);

} // namespace lhm
