#include "doctest.h"

#include "lhm/benchmarks.hpp"
#include "lhm/errors.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

using namespace lhm;

namespace {

const double kInf = std::numeric_limits<double>::infinity();
const double kLog2Pi = std::log(2.0 * std::numbers::pi);
const std::string kPimaPath = std::string(LHM_SOURCE_DIR) + "/data/pima_indian.csv";

std::string read_file(const std::string& path)
{
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

PimaDataset parse(const std::string& text)
{
    std::istringstream in(text);
    return read_pima_data(in);
}

double zero_likelihood(std::span<const double>)
{
    return 0.0;
}

} // namespace

TEST_CASE("Rosenbrock likelihood and uniform prior")
{
    CHECK(rosenbrock_log_likelihood(Vector{1.0, 1.0}) == 0.0);
    CHECK(rosenbrock_log_likelihood(Vector{0.0, 0.0}) == -1.0);
    CHECK(rosenbrock_log_likelihood(Vector{2.0, 4.0}) == -1.0);
    CHECK(uniform_log_prior(Vector{0.0, 0.0}) == doctest::Approx(-std::log(400.0)).epsilon(1e-15));
    CHECK(uniform_log_prior(Vector{0.0, 0.0}) == doctest::Approx(-5.9915).epsilon(1e-4));
    CHECK(uniform_log_prior(Vector{10.01, 0.0}) == -kInf);
    CHECK(uniform_log_prior(Vector{10.0, 15.0}) == doctest::Approx(-std::log(400.0)));
    CHECK(uniform_log_prior(Vector{0.0, -5.01}) == -kInf);
}

TEST_CASE("quadrature oracle")
{
    SUBCASE("flat likelihood integrates the prior to one")
    {
        CHECK(std::abs(quadrature_log_evidence(zero_likelihood, uniform_log_prior, kRosenbrockBox)) < 1e-12);
    }
    SUBCASE("Gaussian likelihood")
    {
        auto gauss = [](std::span<const double> x) { return -0.5 * (x[0] * x[0] + x[1] * x[1]); };
        const double expected = std::log(2.0 * std::numbers::pi / 400.0);
        CHECK(std::abs(quadrature_log_evidence(gauss, uniform_log_prior, kRosenbrockBox) - expected) < 1e-6);
    }
    SUBCASE("Rosenbrock against a one-dimensional erf oracle")
    {
        // integrating x1 in closed form over [-5, 15] leaves a smooth 1D integral in x0
        auto inner = [](double x0) {
            const double c = x0 * x0;
            return std::exp(-(1.0 - x0) * (1.0 - x0)) * std::sqrt(std::numbers::pi) / 20.0 *
                   (std::erf(10.0 * (15.0 - c)) - std::erf(10.0 * (-5.0 - c)));
        };
        const std::size_t n = 200000;
        const double h = 20.0 / n;
        double simpson = inner(-10.0) + inner(10.0);
        for (std::size_t i = 1; i < n; ++i) {
            simpson += (i % 2 ? 4.0 : 2.0) * inner(-10.0 + i * h);
        }
        const double oracle = std::log(simpson * h / 3.0 / 400.0);
        const double q = quadrature_log_evidence(rosenbrock_log_likelihood, uniform_log_prior, kRosenbrockBox);
        CHECK(std::abs(q - oracle) < 1e-7);
        // the unbounded factorization pi/4000 differs only by the mass the x1 <= 15 edge cuts off
        CHECK(std::abs(q - std::log(std::numbers::pi / 4000.0)) < 3e-5);
        CHECK(q == doctest::Approx(-7.149344002096591).epsilon(1e-12));
        CHECK(rosenbrock_problem().ground_truth->log_z.value() == doctest::Approx(q).epsilon(1e-15));
    }
    SUBCASE("grid cap")
    {
        QuadratureOptions opts;
        opts.max_intervals = 64;
        CHECK_THROWS_AS(quadrature_log_evidence(rosenbrock_log_likelihood, uniform_log_prior, kRosenbrockBox, opts),
                        ConvergenceError);
    }
}

TEST_CASE("Normal-Gamma densities")
{
    const NormalGammaPrior unit{0.0, 1.0, 1.0, 1.0};
    SUBCASE("single datum by hand")
    {
        // N(0; 0, 1) likelihood, N(0; 0, 1) prior on mu, Ga(1; 1, 1) = e^-1, Jacobian e^0
        const std::vector<double> data{0.0};
        const double expected = -0.5 * kLog2Pi - 0.5 * kLog2Pi - 1.0;
        CHECK(normal_gamma_log_posterior(Vector{0.0, 0.0}, data, unit) == doctest::Approx(expected).epsilon(1e-12));
    }
    SUBCASE("no data: the posterior is the prior and integrates to one")
    {
        const std::vector<double> none;
        auto like = [&](std::span<const double> v) { return normal_gamma_log_likelihood(v, none); };
        const NormalGammaPrior p5{0.0, 1.0, 5.0, 5.0};
        auto prior = [&](std::span<const double> v) { return normal_gamma_log_prior(v, p5); };
        CHECK(std::abs(quadrature_log_evidence(like, prior, Box2{-20.0, 20.0, -8.0, 4.0})) < 1e-3);
        CHECK(normal_gamma_analytic_log_evidence(none, unit) == 0.0);
    }
    SUBCASE("analytic evidence matches quadrature for one datum")
    {
        const std::vector<double> data{0.0};
        auto like = [&](std::span<const double> v) { return normal_gamma_log_likelihood(v, data); };
        auto prior = [&](std::span<const double> v) { return normal_gamma_log_prior(v, unit); };
        QuadratureOptions opts;
        opts.initial_intervals = 4096;
        opts.max_intervals = 16384;
        const double q = quadrature_log_evidence(like, prior, Box2{-1000.0, 1000.0, -30.0, 6.0}, opts);
        const double a = normal_gamma_analytic_log_evidence(data, unit);
        CHECK(std::abs(std::expm1(q - a)) < 1e-6);
    }
    SUBCASE("analytic evidence matches quadrature for small n")
    {
        const std::vector<double> data{0.3, -1.1, 0.8};
        const NormalGammaPrior p{0.5, 2.0, 2.0, 1.5};
        auto like = [&](std::span<const double> v) { return normal_gamma_log_likelihood(v, data); };
        auto prior = [&](std::span<const double> v) { return normal_gamma_log_prior(v, p); };
        const double q = quadrature_log_evidence(like, prior, Box2{-60.0, 60.0, -30.0, 6.0});
        CHECK(std::abs(std::expm1(q - normal_gamma_analytic_log_evidence(data, p))) < 1e-6);
    }
    SUBCASE("the log-precision Jacobian: same evidence in (mu, tau)")
    {
        const std::vector<double> data{0.4, -0.2};
        const NormalGammaPrior p{0.0, 1.0, 5.0, 5.0};
        auto like = [&](std::span<const double> v) { return normal_gamma_log_likelihood(v, data); };
        auto prior = [&](std::span<const double> v) { return normal_gamma_log_prior(v, p); };
        const double in_log_tau = quadrature_log_evidence(like, prior, Box2{-30.0, 30.0, -12.0, 4.0});
        // the untransformed density: drop the +ell and evaluate at ell = log tau
        auto like_tau = [&](std::span<const double> w) {
            if (w[1] <= 0.0) {
                return -kInf;
            }
            const Vector v{w[0], std::log(w[1])};
            return normal_gamma_log_likelihood(v, data);
        };
        auto prior_tau = [&](std::span<const double> w) {
            if (w[1] <= 0.0) {
                return -kInf;
            }
            const Vector v{w[0], std::log(w[1])};
            return normal_gamma_log_prior(v, p) - v[1];
        };
        const double in_tau = quadrature_log_evidence(like_tau, prior_tau, Box2{-30.0, 30.0, 0.0, 25.0});
        CHECK(std::abs(std::expm1(in_log_tau - in_tau)) < 1e-6);
        CHECK(std::abs(std::expm1(in_tau - normal_gamma_analytic_log_evidence(data, p))) < 1e-6);
    }
    SUBCASE("evidence moves monotonically with tau0")
    {
        const auto data = generate_normal_gamma_data(100, 0.0, 1.0, 2023);
        double prev = -kInf;
        for (double tau0 : {1e-4, 1e-3, 1e-2, 1e-1, 1.0}) {
            const double lz = normal_gamma_analytic_log_evidence(data, NormalGammaPrior{0.0, tau0, 1e-3, 1e-3});
            CHECK(lz > prev);
            prev = lz;
        }
    }
    SUBCASE("invalid hyperparameters")
    {
        CHECK_THROWS_AS(normal_gamma_analytic_log_evidence(std::vector<double>{1.0}, NormalGammaPrior{0.0, 0.0, 1.0, 1.0}),
                        ConfigError);
    }
}

TEST_CASE("Normal-Gamma data generation")
{
    const auto ys = generate_normal_gamma_data(100000, 0.0, 1.0, 1);
    double m = 0.0;
    for (double y : ys) {
        m += y;
    }
    m /= ys.size();
    double v = 0.0;
    for (double y : ys) {
        v += (y - m) * (y - m);
    }
    v /= ys.size();
    CHECK(std::abs(m) < 0.02);
    CHECK(std::abs(v - 1.0) < 0.02);
    CHECK(generate_normal_gamma_data(0, 0.0, 1.0, 1).empty());
    CHECK(generate_normal_gamma_data(5, 0.0, 1.0, 9) == generate_normal_gamma_data(5, 0.0, 1.0, 9));
    CHECK_THROWS_AS(generate_normal_gamma_data(5, 0.0, 0.0, 9), ConfigError);
}

TEST_CASE("logistic likelihood and Gaussian prior")
{
    SUBCASE("theta = 0 on the Pima design")
    {
        const auto data = load_pima_data(kPimaPath);
        const auto x = pima_design_matrix(data, PimaModel::M1);
        const Vector zero(5, 0.0);
        CHECK(logistic_log_likelihood(zero, x, data.labels) == doctest::Approx(532 * std::log(0.5)).epsilon(1e-12));
        CHECK(logistic_log_likelihood(zero, x, data.labels) == doctest::Approx(-368.7543).epsilon(1e-6));
    }
    SUBCASE("saturation without overflow")
    {
        const Matrix x{1, 1, {1.0}};
        const std::vector<int> yes{1};
        const std::vector<int> no{0};
        CHECK(std::abs(logistic_log_likelihood(Vector{50.0}, x, yes)) < 1e-20);
        CHECK(logistic_log_likelihood(Vector{50.0}, x, no) == doctest::Approx(-50.0).epsilon(1e-15));
        CHECK(logistic_log_likelihood(Vector{800.0}, x, no) == doctest::Approx(-800.0));
    }
    SUBCASE("shape mismatch")
    {
        const Matrix x{1, 2, {1.0, 2.0}};
        CHECK_THROWS_AS(logistic_log_likelihood(Vector{1.0}, x, std::vector<int>{1}), DimensionError);
    }
    SUBCASE("Gaussian prior")
    {
        CHECK(gaussian_log_prior(Vector(5, 0.0), 0.01) == doctest::Approx(-16.1076).epsilon(1e-5));
        CHECK(gaussian_log_prior(Vector(5, 0.0), 0.01) - gaussian_log_prior(Vector(4, 0.0), 0.01) ==
              doctest::Approx(0.5 * std::log(0.01) - 0.5 * kLog2Pi));
        CHECK(gaussian_log_prior(Vector{1.0}, 1.0) == doctest::Approx(-0.5 - 0.5 * kLog2Pi).epsilon(1e-15));
        // each coordinate is a normalized density
        double total = 0.0;
        const double h = 0.01;
        for (int i = -20000; i <= 20000; ++i) {
            total += std::exp(gaussian_log_prior(Vector{i * h}, 0.01)) * h;
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("Pima data loading")
{
    const std::string text = read_file(kPimaPath);
    REQUIRE_FALSE(text.empty());
    SUBCASE("bundled file")
    {
        const auto d = load_pima_data(kPimaPath);
        CHECK(d.n == 532);
        CHECK(d.predictors.rows == 532);
        CHECK(d.predictors.cols == 7);
        CHECK(d.labels.size() == 532);
        for (int y : d.labels) {
            CHECK((y == 0 || y == 1));
        }
    }
    SUBCASE("531 rows")
    {
        const auto last = text.find_last_of('\n', text.size() - 2);
        CHECK_THROWS_AS(parse(text.substr(0, last + 1)), DataError);
    }
    SUBCASE("label 2")
    {
        std::string bad = text;
        const auto first_row_end = bad.find('\n', bad.find('\n') + 1);
        bad[first_row_end - 1] = '2';
        CHECK_THROWS_AS(parse(bad), DataError);
    }
    SUBCASE("malformed row")
    {
        std::string bad = text;
        const auto header_end = bad.find('\n');
        bad.insert(header_end + 1, "1,2,3\n");
        CHECK_THROWS_AS(parse(bad), DataError);
    }
    SUBCASE("wrong header")
    {
        std::string bad = text;
        bad.replace(0, 2, "XX");
        CHECK_THROWS_AS(parse(bad), DataError);
    }
    SUBCASE("missing file")
    {
        CHECK_THROWS_AS(load_pima_data("/nonexistent/pima.csv"), DataError);
    }
}

TEST_CASE("Pima design matrices")
{
    const auto d = load_pima_data(kPimaPath);
    const auto m1 = pima_design_matrix(d, PimaModel::M1);
    const auto m2 = pima_design_matrix(d, PimaModel::M2);
    CHECK(m1.cols == 5);
    CHECK(m2.cols == 6);
    CHECK(m1.rows == 532);
    for (std::size_t r = 0; r < m1.rows; ++r) {
        CHECK(m1(r, 0) == 1.0);
        CHECK(m2(r, 0) == 1.0);
    }
    for (std::size_t c = 1; c < m2.cols; ++c) {
        double m = 0.0;
        double v = 0.0;
        for (std::size_t r = 0; r < m2.rows; ++r) {
            m += m2(r, c);
        }
        m /= m2.rows;
        for (std::size_t r = 0; r < m2.rows; ++r) {
            v += (m2(r, c) - m) * (m2(r, c) - m);
        }
        v /= m2.rows;
        CHECK(std::abs(m) < 1e-12);
        CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
    }
    // M2 is M1 plus AGE
    for (std::size_t r = 0; r < m1.rows; r += 37) {
        for (std::size_t c = 0; c < 5; ++c) {
            CHECK(m1(r, c) == m2(r, c));
        }
    }
    const auto raw = pima_design_matrix(d, PimaModel::M1, false);
    CHECK(raw(0, 1) == d.predictors(0, 0));
    CHECK(raw(0, 3) == d.predictors(0, 4));
}

TEST_CASE("problem presets")
{
    const auto rb = rosenbrock_problem();
    CHECK(rb.dim == 2);
    CHECK(rb.ground_truth->source == "quadrature");
    CHECK(std::isfinite(rb.log_posterior()(rb.init_center)));
    CHECK(rb.log_posterior()(Vector{11.0, 0.0}) == -kInf);

    const auto data = generate_normal_gamma_data(100, 0.0, 1.0, 2023);
    const NormalGammaPrior prior{0.0, 1e-2, 1e-3, 1e-3};
    const auto ng = normal_gamma_problem(data, prior);
    CHECK(ng.ground_truth->source == "analytic");
    CHECK(ng.ground_truth->log_z.value() == normal_gamma_analytic_log_evidence(data, prior));
    CHECK(std::isfinite(ng.log_posterior()(ng.init_center)));

    const auto pima = load_pima_data(kPimaPath);
    const auto p1 = pima_problem(pima, PimaModel::M1);
    const auto p2 = pima_problem(pima, PimaModel::M2);
    CHECK(p1.dim == 5);
    CHECK(p2.dim == 6);
    CHECK(p1.ground_truth->source == "published");
    CHECK_FALSE(p1.ground_truth->log_z.has_value());
    CHECK(p1.flow_preset.n_layers == 8);
    CHECK(p1.log_posterior()(Vector(5, 0.0)) ==
          doctest::Approx(532 * std::log(0.5) + gaussian_log_prior(Vector(5, 0.0), kPimaPriorPrecision)));
}
