#pragma once

#include "lhm/chains.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lhm {

// Two affine layers with a leaky ReLU between them:
//   out = W2 * leaky(W1 * in + b1) + b2
// Weights are row-major (rows = outputs).
struct DenseNet {
    std::size_t n_in = 0;
    std::size_t n_hidden = 0;
    std::size_t n_out = 0;
    double leaky_slope = 0.01;
    std::vector<double> w1;
    std::vector<double> b1;
    std::vector<double> w2;
    std::vector<double> b2;

    static DenseNet zeros(std::size_t n_in, std::size_t n_hidden, std::size_t n_out, double leaky_slope);

    std::size_t n_params() const { return w1.size() + b1.size() + w2.size() + b2.size(); }

    // `hidden_pre` receives the pre-activation of the hidden layer (size n_hidden).
    void evaluate(std::span<const double> in, std::span<double> out, std::span<double> hidden_pre) const;
    Vector evaluate(std::span<const double> in) const;
};

// Real NVP affine coupling on a D-vector split at `split`:
//   y[:split] = x[:split]
//   y[split:] = x[split:] * exp(s(x[:split])) + t(x[:split])
// with s = softplus(scale_net) for scaled layers and s = 0 otherwise.
struct CouplingLayer {
    std::size_t dim = 0;
    std::size_t split = 0;
    std::optional<DenseNet> scale_net;
    DenseNet translate_net;

    bool scaled() const { return scale_net.has_value(); }
    std::size_t n_params() const { return translate_net.n_params() + (scale_net ? scale_net->n_params() : 0); }
};

struct CouplingResult {
    Vector y;
    double log_det = 0.0;
};

// Throws NonFiniteError on non-finite input.
CouplingResult coupling_forward(const CouplingLayer& layer, std::span<const double> x);
CouplingResult coupling_inverse(const CouplingLayer& layer, std::span<const double> y);

struct FlowArchitecture {
    std::size_t n_layers = 6;
    std::size_t n_scaled = 2;
    // 0 selects max(8, 2 * dim)
    std::size_t hidden = 0;
    double leaky_slope = 0.01;

    std::size_t hidden_width(std::size_t dim) const;
    void validate() const;
};

FlowArchitecture default_architecture();
// eight coupling layers, the first six scaled
FlowArchitecture pima_architecture();

struct FlowMap {
    Vector point;
    double log_det = 0.0;
};

// Real NVP flow over a Gaussian base N(0, T I).
//
// The coupling stack is stored in the normalizing direction: a parameter
// point theta is first standardized, (theta - offset) / scale, then passed
// through layer 0, the permutation, layer 1, ..., layer L-1 to reach the
// latent z. Sampling runs the stack backwards. Because s >= 0, each scaled
// layer can only contract the distribution when generating, which is what
// lets a trained flow sit inside the posterior it was fitted to.
//
// The permutation between layers is a cyclic shift by ceil(D / 2):
// out[i] = in[(i + shift) % D].
class RealNvpFlow {
public:
    RealNvpFlow() = default;

    // Weights uniform in +-1/sqrt(fan_in), biases zero.
    static RealNvpFlow create(std::size_t dim, const FlowArchitecture& arch, std::uint64_t seed);
    // Every weight and bias zero.
    static RealNvpFlow zeros(std::size_t dim, const FlowArchitecture& arch);
    // Explicit layers; used by tests and deserialization.
    static RealNvpFlow from_layers(std::size_t dim, std::vector<CouplingLayer> layers);

    std::size_t dim() const { return dim_; }
    std::size_t split() const { return (dim_ + 1) / 2; }
    std::size_t shift() const { return (dim_ + 1) / 2; }
    const std::vector<CouplingLayer>& layers() const { return layers_; }

    // Fixed affine standardization applied before the first layer.
    std::span<const double> offset() const { return offset_; }
    std::span<const double> scale() const { return scale_; }
    void set_standardization(Vector offset, Vector scale);

    std::size_t n_params() const;
    // Layer by layer: scale net (if any) then translate net, each as w1, b1, w2, b2.
    Vector parameters() const;
    void set_parameters(std::span<const double> params);

    // z -> theta. log_det is log|det d theta / d z|.
    FlowMap forward(std::span<const double> z) const;
    // theta -> z. log_det is log|det dz / d theta|.
    FlowMap inverse(std::span<const double> theta) const;

    // log q_T(z) + log|det dz/dtheta| with q_T = N(0, T I), 0 < T <= 1.
    double log_density(std::span<const double> theta, double temperature) const;

    // n draws of z ~ N(0, T I) pushed through forward().
    std::vector<Vector> sample(std::size_t n, double temperature, std::uint64_t seed) const;

    // True when every coordinate lands in the transformed block of at least
    // one layer.
    bool transforms_all_coordinates() const;

    void permute(std::span<double> x) const;
    void unpermute(std::span<double> x) const;

private:
    std::size_t dim_ = 0;
    std::vector<CouplingLayer> layers_;
    Vector offset_;
    Vector scale_;
};

FlowMap flow_forward(const RealNvpFlow& flow, std::span<const double> z);
FlowMap flow_inverse(const RealNvpFlow& flow, std::span<const double> theta);
double log_density(const RealNvpFlow& flow, std::span<const double> theta, double temperature);
std::vector<Vector> sample_flow(const RealNvpFlow& flow, std::size_t n, double temperature, std::uint64_t seed);

// Throws ConfigError unless 0 < temperature <= 1.
void check_temperature(double temperature);

// Versioned JSON document; doubles are written shortest-round-trip so a
// reloaded flow is bit-identical.
std::string flow_to_json(const RealNvpFlow& flow);
RealNvpFlow flow_from_json(std::string_view text);
void save_flow(const std::string& path, const RealNvpFlow& flow);
RealNvpFlow load_flow(const std::string& path);

} // namespace lhm
