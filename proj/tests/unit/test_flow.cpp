#include "doctest.h"

#include "lhm/errors.hpp"
#include "lhm/flow.hpp"
#include "lhm/random.hpp"
#include "lhm/training.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

using namespace lhm;

namespace {

const double kLn2 = std::numbers::ln2;

Vector random_vector(Rng& rng, std::size_t n, double sd = 1.0)
{
    std::normal_distribution<double> normal(0.0, sd);
    Vector v(n);
    for (auto& x : v) {
        x = normal(rng);
    }
    return v;
}

// Random flow whose every parameter, including the scale output layers, is
// nonzero so that no path through the network is trivially inactive.
RealNvpFlow scrambled_flow(std::size_t dim, const FlowArchitecture& arch, std::uint64_t seed, double sd = 0.3)
{
    auto flow = RealNvpFlow::create(dim, arch, seed);
    auto rng = make_rng(seed, 99);
    flow.set_parameters(random_vector(rng, flow.n_params(), sd));
    return flow;
}

// Flow fitted for a few epochs to a correlated, skewed 2D cloud.
RealNvpFlow trained_2d_flow()
{
    auto rng = make_rng(5);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Vector> samples;
    std::vector<double> logpost;
    for (int i = 0; i < 4000; ++i) {
        const double a = normal(rng);
        const double b = 0.5 * a * a + 0.3 * normal(rng);
        samples.push_back({1.0 + a, b});
        logpost.push_back(0.0);
    }
    const auto chains = build_chains({samples}, {logpost});
    TrainingConfig tc;
    tc.epochs = 20;
    tc.seed = 2;
    return train_flow(RealNvpFlow::create(2, default_architecture(), 4), chains, tc).flow;
}

CouplingLayer zero_layer(bool scaled)
{
    CouplingLayer layer;
    layer.dim = 2;
    layer.split = 1;
    if (scaled) {
        layer.scale_net = DenseNet::zeros(1, 8, 1, 0.01);
    }
    layer.translate_net = DenseNet::zeros(1, 8, 1, 0.01);
    return layer;
}

// log |det J| of f at x by central differences.
template <typename F>
double fd_log_abs_det_2d(F f, const Vector& x, double h = 1e-6)
{
    double j[2][2];
    for (std::size_t c = 0; c < 2; ++c) {
        Vector xp = x;
        Vector xm = x;
        xp[c] += h;
        xm[c] -= h;
        const Vector fp = f(xp);
        const Vector fm = f(xm);
        for (std::size_t r = 0; r < 2; ++r) {
            j[r][c] = (fp[r] - fm[r]) / (2 * h);
        }
    }
    return std::log(std::abs(j[0][0] * j[1][1] - j[0][1] * j[1][0]));
}

double log_std_normal(const Vector& z, double t)
{
    double sq = 0.0;
    for (double v : z) {
        sq += v * v;
    }
    return -0.5 * z.size() * std::log(2 * std::numbers::pi * t) - 0.5 * sq / t;
}

} // namespace

TEST_CASE("coupling layer with zero parameters")
{
    const Vector z{0.3, -1.2};
    const auto scaled = coupling_forward(zero_layer(true), z);
    CHECK(scaled.y[0] == 0.3);
    CHECK(scaled.y[1] == doctest::Approx(-2.4).epsilon(1e-15));
    CHECK(scaled.log_det == doctest::Approx(kLn2).epsilon(1e-15));

    const auto back = coupling_inverse(zero_layer(true), Vector{0.3, -2.4});
    CHECK(back.y[0] == 0.3);
    CHECK(back.y[1] == doctest::Approx(-1.2).epsilon(1e-15));
    CHECK(back.log_det == doctest::Approx(-kLn2).epsilon(1e-15));

    const auto plain = coupling_forward(zero_layer(false), z);
    CHECK(plain.y == z);
    CHECK(plain.log_det == 0.0);
}

TEST_CASE("coupling layer round trip and log-determinants")
{
    const auto flow = scrambled_flow(2, FlowArchitecture{1, 1, 0, 0.01}, 21);
    const auto& layer = flow.layers().front();
    auto rng = make_rng(1);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const auto z = random_vector(rng, 2, 2.0);
        const auto fwd = coupling_forward(layer, z);
        const auto inv = coupling_inverse(layer, fwd.y);
        worst = std::max({worst, std::abs(inv.y[0] - z[0]), std::abs(inv.y[1] - z[1])});
        CHECK(inv.log_det == doctest::Approx(-fwd.log_det).epsilon(1e-12));
    }
    CHECK(worst < 1e-10);

    for (int i = 0; i < 10; ++i) {
        const auto z = random_vector(rng, 2);
        const double fd = fd_log_abs_det_2d([&](const Vector& x) { return coupling_forward(layer, x).y; }, z);
        CHECK(std::abs(fd - coupling_forward(layer, z).log_det) < 1e-6);
    }
}

TEST_CASE("coupling layer rejects non-finite and mis-sized input")
{
    CHECK_THROWS_AS(coupling_forward(zero_layer(true), Vector{std::nan(""), 1.0}), NonFiniteError);
    CHECK_THROWS_AS(coupling_inverse(zero_layer(true), Vector{0.0, INFINITY}), NonFiniteError);
    CHECK_THROWS_AS(coupling_forward(zero_layer(true), Vector{0.0, 1.0, 2.0}), DimensionError);
}

TEST_CASE("architecture and construction")
{
    const auto arch = default_architecture();
    CHECK(arch.n_layers == 6);
    CHECK(arch.n_scaled == 2);
    CHECK(pima_architecture().n_layers == 8);
    CHECK(pima_architecture().n_scaled == 6);
    CHECK(arch.hidden_width(2) == 8);
    CHECK(arch.hidden_width(6) == 12);

    const auto flow = RealNvpFlow::create(5, arch, 0);
    CHECK(flow.split() == 3);
    CHECK(flow.layers().size() == 6);
    CHECK(flow.layers()[1].scaled());
    CHECK_FALSE(flow.layers()[2].scaled());
    const double bound = 1.0 / std::sqrt(3.0);
    for (double w : flow.layers()[0].translate_net.w1) {
        CHECK(std::abs(w) <= bound);
    }
    for (double b : flow.layers()[0].translate_net.b1) {
        CHECK(b == 0.0);
    }
    // scale nets start at softplus(0)
    for (double w : flow.layers()[0].scale_net->w2) {
        CHECK(w == 0.0);
    }
    CHECK(flow.parameters() == RealNvpFlow::create(5, arch, 0).parameters());
    CHECK(flow.parameters() != RealNvpFlow::create(5, arch, 1).parameters());

    CHECK_THROWS_AS(RealNvpFlow::create(1, arch, 0), ConfigError);
    CHECK_THROWS_AS(RealNvpFlow::create(2, FlowArchitecture{2, 3, 0, 0.01}, 0), ConfigError);
}

TEST_CASE("every coordinate is transformed")
{
    for (std::size_t d = 2; d <= 9; ++d) {
        CHECK(RealNvpFlow::zeros(d, default_architecture()).transforms_all_coordinates());
        CHECK(RealNvpFlow::zeros(d, pima_architecture()).transforms_all_coordinates());
    }
    CHECK_FALSE(RealNvpFlow::zeros(4, FlowArchitecture{1, 0, 0, 0.01}).transforms_all_coordinates());
}

TEST_CASE("zero-parameter flows")
{
    SUBCASE("all layers unscaled: a pure permutation")
    {
        const auto flow = RealNvpFlow::zeros(3, FlowArchitecture{2, 0, 0, 0.01});
        const Vector z{1.0, 2.0, 3.0};
        const auto m = flow.forward(z);
        // one shift by ceil(3/2) = 2 between the two layers, undone on the way out
        Vector expected = z;
        flow.unpermute(expected);
        CHECK(m.point == expected);
        CHECK(m.log_det == 0.0);
        CHECK(flow.inverse(m.point).point == z);
    }
    SUBCASE("two scaled layers in D = 2")
    {
        const auto flow = RealNvpFlow::zeros(2, FlowArchitecture{2, 2, 0, 0.01});
        const Vector z{0.4, -0.9};
        // the stored stack maps theta -> z, so generation contracts
        CHECK(flow.forward(z).log_det == doctest::Approx(-2 * kLn2).epsilon(1e-15));
        CHECK(flow.inverse(z).log_det == doctest::Approx(2 * kLn2).epsilon(1e-15));
    }
    SUBCASE("log density of the identity flow")
    {
        const auto flow = RealNvpFlow::zeros(2, FlowArchitecture{2, 0, 0, 0.01});
        const Vector origin{0.0, 0.0};
        CHECK(flow.log_density(origin, 1.0) == doctest::Approx(-std::log(2 * std::numbers::pi)).epsilon(1e-15));
        CHECK(flow.log_density(origin, 0.9) == doctest::Approx(-1.7325).epsilon(1e-4));
        CHECK(flow.log_density(origin, 0.9) == doctest::Approx(-std::log(2 * std::numbers::pi * 0.9)).epsilon(1e-15));
    }
    SUBCASE("identity-flow samples keep the base moments")
    {
        const auto flow = RealNvpFlow::zeros(2, FlowArchitecture{2, 0, 0, 0.01});
        const auto xs = flow.sample(100000, 1.0, 12);
        for (std::size_t j = 0; j < 2; ++j) {
            double m = 0.0;
            double v = 0.0;
            for (const auto& x : xs) {
                m += x[j];
            }
            m /= xs.size();
            for (const auto& x : xs) {
                v += (x[j] - m) * (x[j] - m);
            }
            v /= xs.size();
            CHECK(std::abs(m) < 0.02);
            CHECK(std::abs(v - 1.0) < 0.05);
        }
    }
}

TEST_CASE("flow invertibility")
{
    for (std::uint64_t seed : {1, 2, 3}) {
        auto flow = scrambled_flow(4, default_architecture(), seed);
        flow.set_standardization({0.5, -1.0, 2.0, 0.0}, {2.0, 0.5, 1.0, 3.0});
        auto rng = make_rng(seed, 7);
        double worst_z = 0.0;
        double worst_theta = 0.0;
        for (int i = 0; i < 1000; ++i) {
            const auto z = random_vector(rng, 4);
            const auto fwd = flow.forward(z);
            const auto inv = flow.inverse(fwd.point);
            for (std::size_t j = 0; j < 4; ++j) {
                worst_z = std::max(worst_z, std::abs(inv.point[j] - z[j]));
            }
            CHECK(std::abs(inv.log_det + fwd.log_det) < 1e-10);

            const auto theta = random_vector(rng, 4);
            const auto back = flow.forward(flow.inverse(theta).point);
            for (std::size_t j = 0; j < 4; ++j) {
                worst_theta = std::max(worst_theta, std::abs(back.point[j] - theta[j]));
            }
        }
        CHECK(worst_z < 1e-10);
        CHECK(worst_theta < 1e-10);
    }
}

TEST_CASE("change of variables matches a finite-difference Jacobian")
{
    auto flow = scrambled_flow(2, default_architecture(), 8);
    flow.set_standardization({0.3, -0.2}, {1.5, 0.7});
    auto rng = make_rng(4);
    for (int i = 0; i < 20; ++i) {
        const auto z = random_vector(rng, 2);
        const auto theta = flow.forward(z).point;
        const double fd = fd_log_abs_det_2d([&](const Vector& x) { return flow.forward(x).point; }, z);
        for (double t : {1.0, 0.9}) {
            const double expected = std::exp(log_std_normal(z, t) - fd);
            CHECK(std::exp(flow.log_density(theta, t)) == doctest::Approx(expected).epsilon(1e-5));
        }
    }
}

TEST_CASE("trained 2D flow density integrates to one")
{
    const auto flow = trained_2d_flow();
    // bounding box of the image of a base ball 8 standard deviations wide
    double lo0 = 1e300, hi0 = -1e300, lo1 = 1e300, hi1 = -1e300;
    for (int k = 0; k < 2000; ++k) {
        const double ang = 2 * std::numbers::pi * k / 2000.0;
        for (double r : {2.0, 4.0, 6.0, 8.0}) {
            const auto p = flow.forward(Vector{r * std::cos(ang), r * std::sin(ang)}).point;
            lo0 = std::min(lo0, p[0]);
            hi0 = std::max(hi0, p[0]);
            lo1 = std::min(lo1, p[1]);
            hi1 = std::max(hi1, p[1]);
        }
    }
    const std::size_t n = 1200;
    const double h0 = (hi0 - lo0) / n;
    const double h1 = (hi1 - lo1) / n;
    for (double t : {1.0, 0.9}) {
        double total = 0.0;
        for (std::size_t i = 0; i <= n; ++i) {
            const double w0 = (i == 0 || i == n) ? 0.5 : 1.0;
            for (std::size_t k = 0; k <= n; ++k) {
                const double w1 = (k == 0 || k == n) ? 0.5 : 1.0;
                total += w0 * w1 * std::exp(flow.log_density(Vector{lo0 + i * h0, lo1 + k * h1}, t));
            }
        }
        CHECK(std::abs(total * h0 * h1 - 1.0) < 1e-3);
    }
}

TEST_CASE("lower temperature raises the typical log density")
{
    const auto flow = trained_2d_flow();
    double prev = -1e300;
    for (double t : {1.0, 0.9}) {
        double mean_logq = 0.0;
        const auto xs = flow.sample(100000, t, 31);
        for (const auto& x : xs) {
            const double lq = flow.log_density(x, t);
            REQUIRE(std::isfinite(lq));
            mean_logq += lq;
        }
        mean_logq /= static_cast<double>(xs.size());
        CHECK(mean_logq > prev);
        prev = mean_logq;
    }
}

TEST_CASE("per-coordinate sample variance is non-increasing in temperature")
{
    const auto flow = trained_2d_flow();
    Vector prev(2, 1e300);
    for (double t : {1.0, 0.9, 0.7, 0.5}) {
        const auto xs = flow.sample(100000, t, 31);
        for (std::size_t j = 0; j < 2; ++j) {
            double m = 0.0;
            double v = 0.0;
            for (const auto& x : xs) {
                m += x[j];
            }
            m /= xs.size();
            for (const auto& x : xs) {
                v += (x[j] - m) * (x[j] - m);
            }
            v /= xs.size();
            CHECK(v <= prev[j]);
            prev[j] = v;
        }
    }
}

TEST_CASE("low temperature samples collapse onto the image of the origin")
{
    const auto flow = trained_2d_flow();
    const auto centre = flow.forward(Vector{0.0, 0.0}).point;
    for (const auto& x : flow.sample(1000, 1e-6, 3)) {
        CHECK(std::abs(x[0] - centre[0]) < 0.05);
        CHECK(std::abs(x[1] - centre[1]) < 0.05);
    }
    CHECK(flow.sample(10, 0.9, 3) == flow.sample(10, 0.9, 3));
}

TEST_CASE("temperature and input validation")
{
    const auto flow = RealNvpFlow::create(2, default_architecture(), 0);
    const Vector x{0.0, 0.0};
    CHECK_THROWS_AS(flow.log_density(x, 0.0), ConfigError);
    CHECK_THROWS_AS(flow.log_density(x, 1.5), ConfigError);
    CHECK_THROWS_AS(flow.sample(1, -0.1, 0), ConfigError);
    CHECK_THROWS_AS(flow.inverse(Vector{0.0, std::nan("")}), NonFiniteError);
    CHECK_THROWS_AS(flow.inverse(Vector{0.0}), DimensionError);
}

TEST_CASE("JSON round trip is bit-exact")
{
    auto flow = scrambled_flow(3, pima_architecture(), 17);
    flow.set_standardization({0.1, 1.0 / 3.0, -2.0}, {1.0 / 7.0, 2.0, 0.9});
    const auto back = flow_from_json(flow_to_json(flow));
    CHECK(back.parameters() == flow.parameters());
    CHECK(std::ranges::equal(back.offset(), flow.offset()));
    CHECK(std::ranges::equal(back.scale(), flow.scale()));
    const Vector theta{0.2, -0.4, 1.1};
    CHECK(back.log_density(theta, 0.9) == flow.log_density(theta, 0.9));
    CHECK_THROWS_AS(flow_from_json("{\"format\": \"other\"}"), DataError);
    CHECK_THROWS_AS(flow_from_json("not json"), DataError);
}
