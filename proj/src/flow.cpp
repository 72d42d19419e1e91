#include "lhm/flow.hpp"

#include "lhm/errors.hpp"
#include "lhm/log_math.hpp"
#include "lhm/random.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

namespace lhm {

namespace {

constexpr int kFlowFormatVersion = 1;

void require_finite(std::span<const double> x, const char* what)
{
    for (double v : x) {
        if (!std::isfinite(v)) {
            throw NonFiniteError(std::string(what) + ": non-finite input");
        }
    }
}

void fill_uniform(std::vector<double>& w, double bound, Rng& rng)
{
    for (auto& v : w) {
        v = (2.0 * uniform01(rng) - 1.0) * bound;
    }
}

DenseNet random_net(std::size_t n_in, std::size_t n_hidden, std::size_t n_out, double slope, Rng& rng)
{
    auto net = DenseNet::zeros(n_in, n_hidden, n_out, slope);
    fill_uniform(net.w1, 1.0 / std::sqrt(static_cast<double>(n_in)), rng);
    fill_uniform(net.w2, 1.0 / std::sqrt(static_cast<double>(n_hidden)), rng);
    return net;
}

// s and t for the conditioning block `a`; s is zero for unscaled layers.
void scale_and_shift(const CouplingLayer& layer, std::span<const double> a, std::span<double> s, std::span<double> t,
                     std::span<double> scratch)
{
    if (layer.scale_net) {
        layer.scale_net->evaluate(a, s, scratch);
        for (auto& v : s) {
            v = softplus(v);
        }
    } else {
        std::fill(s.begin(), s.end(), 0.0);
    }
    layer.translate_net.evaluate(a, t, scratch);
}

struct Scratch {
    Vector s;
    Vector t;
    Vector hidden;
    explicit Scratch(const CouplingLayer& layer)
        : s(layer.dim - layer.split), t(layer.dim - layer.split),
          hidden(std::max(layer.translate_net.n_hidden, layer.scale_net ? layer.scale_net->n_hidden : 0))
    {
    }
};

// In-place versions return the log-determinant of the map they apply.
double coupling_forward_inplace(const CouplingLayer& layer, std::span<double> x, Scratch& scratch)
{
    const auto a = x.first(layer.split);
    auto b = x.subspan(layer.split);
    scale_and_shift(layer, a, scratch.s, scratch.t, scratch.hidden);
    double log_det = 0.0;
    for (std::size_t j = 0; j < b.size(); ++j) {
        b[j] = b[j] * std::exp(scratch.s[j]) + scratch.t[j];
        log_det += scratch.s[j];
    }
    return log_det;
}

double coupling_inverse_inplace(const CouplingLayer& layer, std::span<double> y, Scratch& scratch)
{
    const auto a = y.first(layer.split);
    auto b = y.subspan(layer.split);
    scale_and_shift(layer, a, scratch.s, scratch.t, scratch.hidden);
    double log_det = 0.0;
    for (std::size_t j = 0; j < b.size(); ++j) {
        b[j] = (b[j] - scratch.t[j]) * std::exp(-scratch.s[j]);
        log_det -= scratch.s[j];
    }
    return log_det;
}

} // namespace

DenseNet DenseNet::zeros(std::size_t n_in, std::size_t n_hidden, std::size_t n_out, double leaky_slope)
{
    DenseNet net;
    net.n_in = n_in;
    net.n_hidden = n_hidden;
    net.n_out = n_out;
    net.leaky_slope = leaky_slope;
    net.w1.assign(n_hidden * n_in, 0.0);
    net.b1.assign(n_hidden, 0.0);
    net.w2.assign(n_out * n_hidden, 0.0);
    net.b2.assign(n_out, 0.0);
    return net;
}

void DenseNet::evaluate(std::span<const double> in, std::span<double> out, std::span<double> hidden_pre) const
{
    for (std::size_t h = 0; h < n_hidden; ++h) {
        double acc = b1[h];
        const double* row = w1.data() + h * n_in;
        for (std::size_t i = 0; i < n_in; ++i) {
            acc += row[i] * in[i];
        }
        hidden_pre[h] = acc;
    }
    for (std::size_t o = 0; o < n_out; ++o) {
        double acc = b2[o];
        const double* row = w2.data() + o * n_hidden;
        for (std::size_t h = 0; h < n_hidden; ++h) {
            const double pre = hidden_pre[h];
            acc += row[h] * (pre > 0.0 ? pre : leaky_slope * pre);
        }
        out[o] = acc;
    }
}

Vector DenseNet::evaluate(std::span<const double> in) const
{
    Vector out(n_out);
    Vector hidden(n_hidden);
    evaluate(in, out, hidden);
    return out;
}

CouplingResult coupling_forward(const CouplingLayer& layer, std::span<const double> x)
{
    if (x.size() != layer.dim) {
        throw DimensionError("coupling_forward: input has the wrong dimension");
    }
    require_finite(x, "coupling_forward");
    CouplingResult r{Vector(x.begin(), x.end()), 0.0};
    Scratch scratch(layer);
    r.log_det = coupling_forward_inplace(layer, r.y, scratch);
    return r;
}

CouplingResult coupling_inverse(const CouplingLayer& layer, std::span<const double> y)
{
    if (y.size() != layer.dim) {
        throw DimensionError("coupling_inverse: input has the wrong dimension");
    }
    require_finite(y, "coupling_inverse");
    CouplingResult r{Vector(y.begin(), y.end()), 0.0};
    Scratch scratch(layer);
    r.log_det = coupling_inverse_inplace(layer, r.y, scratch);
    return r;
}

std::size_t FlowArchitecture::hidden_width(std::size_t dim) const
{
    return hidden != 0 ? hidden : std::max<std::size_t>(8, 2 * dim);
}

void FlowArchitecture::validate() const
{
    if (n_layers == 0) {
        throw ConfigError("flow: at least one coupling layer is required");
    }
    if (n_scaled > n_layers) {
        throw ConfigError("flow: more scaled layers than layers");
    }
    if (!(leaky_slope >= 0.0 && leaky_slope < 1.0)) {
        throw ConfigError("flow: leaky ReLU slope must lie in [0, 1)");
    }
}

FlowArchitecture default_architecture()
{
    return FlowArchitecture{};
}

FlowArchitecture pima_architecture()
{
    FlowArchitecture arch;
    arch.n_layers = 8;
    arch.n_scaled = 6;
    return arch;
}

namespace {

std::vector<CouplingLayer> make_layers(std::size_t dim, const FlowArchitecture& arch, Rng* rng)
{
    arch.validate();
    if (dim < 2) {
        throw ConfigError("flow: dimension must be at least 2");
    }
    const std::size_t split = (dim + 1) / 2;
    const std::size_t hidden = arch.hidden_width(dim);
    std::vector<CouplingLayer> layers;
    layers.reserve(arch.n_layers);
    for (std::size_t l = 0; l < arch.n_layers; ++l) {
        CouplingLayer layer;
        layer.dim = dim;
        layer.split = split;
        if (l < arch.n_scaled) {
            layer.scale_net = rng ? random_net(split, hidden, dim - split, arch.leaky_slope, *rng)
                                  : DenseNet::zeros(split, hidden, dim - split, arch.leaky_slope);
            // A zero output layer starts every scale at softplus(0); random
            // scales compound through deep stacks and overflow before training.
            std::fill(layer.scale_net->w2.begin(), layer.scale_net->w2.end(), 0.0);
        }
        layer.translate_net = rng ? random_net(split, hidden, dim - split, arch.leaky_slope, *rng)
                                  : DenseNet::zeros(split, hidden, dim - split, arch.leaky_slope);
        layers.push_back(std::move(layer));
    }
    return layers;
}

void check_net(const DenseNet& net, std::size_t n_in, std::size_t n_out)
{
    if (net.n_in != n_in || net.n_out != n_out || net.w1.size() != net.n_hidden * n_in ||
        net.b1.size() != net.n_hidden || net.w2.size() != n_out * net.n_hidden || net.b2.size() != n_out) {
        throw DimensionError("flow: dense net shapes are inconsistent with the coupling split");
    }
    for (const auto* block : {&net.w1, &net.b1, &net.w2, &net.b2}) {
        for (double v : *block) {
            if (!std::isfinite(v)) {
                throw NonFiniteError("flow: non-finite network parameter");
            }
        }
    }
}

} // namespace

RealNvpFlow RealNvpFlow::create(std::size_t dim, const FlowArchitecture& arch, std::uint64_t seed)
{
    auto rng = make_rng(seed, 0xf10);
    return from_layers(dim, make_layers(dim, arch, &rng));
}

RealNvpFlow RealNvpFlow::zeros(std::size_t dim, const FlowArchitecture& arch)
{
    return from_layers(dim, make_layers(dim, arch, nullptr));
}

RealNvpFlow RealNvpFlow::from_layers(std::size_t dim, std::vector<CouplingLayer> layers)
{
    if (dim < 2) {
        throw ConfigError("flow: dimension must be at least 2");
    }
    if (layers.empty()) {
        throw ConfigError("flow: at least one coupling layer is required");
    }
    for (const auto& layer : layers) {
        if (layer.dim != dim || layer.split == 0 || layer.split >= dim) {
            throw DimensionError("flow: coupling layer split must satisfy 0 < d < D");
        }
        check_net(layer.translate_net, layer.split, dim - layer.split);
        if (layer.scale_net) {
            check_net(*layer.scale_net, layer.split, dim - layer.split);
        }
    }
    RealNvpFlow flow;
    flow.dim_ = dim;
    flow.layers_ = std::move(layers);
    flow.offset_.assign(dim, 0.0);
    flow.scale_.assign(dim, 1.0);
    return flow;
}

void RealNvpFlow::set_standardization(Vector offset, Vector scale)
{
    if (offset.size() != dim_ || scale.size() != dim_) {
        throw DimensionError("flow: standardization vectors must have length D");
    }
    for (std::size_t j = 0; j < dim_; ++j) {
        if (!std::isfinite(offset[j]) || !std::isfinite(scale[j]) || !(scale[j] > 0.0)) {
            throw ConfigError("flow: standardization needs finite offsets and positive scales");
        }
    }
    offset_ = std::move(offset);
    scale_ = std::move(scale);
}

std::size_t RealNvpFlow::n_params() const
{
    std::size_t n = 0;
    for (const auto& layer : layers_) {
        n += layer.n_params();
    }
    return n;
}

namespace {

template <typename Layers, typename Visit>
void for_each_block(Layers& layers, Visit&& visit)
{
    for (auto& layer : layers) {
        for (auto* net : {layer.scale_net ? &*layer.scale_net : nullptr, &layer.translate_net}) {
            if (net == nullptr) {
                continue;
            }
            visit(net->w1);
            visit(net->b1);
            visit(net->w2);
            visit(net->b2);
        }
    }
}

} // namespace

Vector RealNvpFlow::parameters() const
{
    Vector out;
    out.reserve(n_params());
    for_each_block(layers_, [&](const std::vector<double>& block) { out.insert(out.end(), block.begin(), block.end()); });
    return out;
}

void RealNvpFlow::set_parameters(std::span<const double> params)
{
    if (params.size() != n_params()) {
        throw DimensionError("flow: parameter vector has " + std::to_string(params.size()) + " entries, expected " +
                             std::to_string(n_params()));
    }
    std::size_t pos = 0;
    for_each_block(layers_, [&](std::vector<double>& block) {
        std::copy_n(params.begin() + static_cast<std::ptrdiff_t>(pos), block.size(), block.begin());
        pos += block.size();
    });
}

void RealNvpFlow::permute(std::span<double> x) const
{
    std::rotate(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(shift() % dim_), x.end());
}

void RealNvpFlow::unpermute(std::span<double> x) const
{
    std::rotate(x.begin(), x.end() - static_cast<std::ptrdiff_t>(shift() % dim_), x.end());
}

FlowMap RealNvpFlow::inverse(std::span<const double> theta) const
{
    if (theta.size() != dim_) {
        throw DimensionError("flow: input has dimension " + std::to_string(theta.size()) + ", expected " +
                             std::to_string(dim_));
    }
    require_finite(theta, "flow_inverse");
    FlowMap m{Vector(dim_), 0.0};
    for (std::size_t j = 0; j < dim_; ++j) {
        m.point[j] = (theta[j] - offset_[j]) / scale_[j];
        m.log_det -= std::log(scale_[j]);
    }
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        Scratch scratch(layers_[l]);
        m.log_det += coupling_forward_inplace(layers_[l], m.point, scratch);
        if (l + 1 < layers_.size()) {
            permute(m.point);
        }
    }
    for (double v : m.point) {
        if (!std::isfinite(v)) {
            throw NonFiniteError("flow_inverse: non-finite intermediate value");
        }
    }
    return m;
}

FlowMap RealNvpFlow::forward(std::span<const double> z) const
{
    if (z.size() != dim_) {
        throw DimensionError("flow: input has dimension " + std::to_string(z.size()) + ", expected " +
                             std::to_string(dim_));
    }
    require_finite(z, "flow_forward");
    FlowMap m{Vector(z.begin(), z.end()), 0.0};
    for (std::size_t l = layers_.size(); l-- > 0;) {
        if (l + 1 < layers_.size()) {
            unpermute(m.point);
        }
        Scratch scratch(layers_[l]);
        m.log_det += coupling_inverse_inplace(layers_[l], m.point, scratch);
    }
    for (std::size_t j = 0; j < dim_; ++j) {
        m.point[j] = offset_[j] + scale_[j] * m.point[j];
        m.log_det += std::log(scale_[j]);
    }
    for (double v : m.point) {
        if (!std::isfinite(v)) {
            throw NonFiniteError("flow_forward: non-finite intermediate value");
        }
    }
    return m;
}

void check_temperature(double temperature)
{
    if (!(temperature > 0.0 && temperature <= 1.0)) {
        throw ConfigError("temperature must lie in (0, 1], got " + std::to_string(temperature));
    }
}

double RealNvpFlow::log_density(std::span<const double> theta, double temperature) const
{
    check_temperature(temperature);
    const auto m = inverse(theta);
    double sq = 0.0;
    for (double v : m.point) {
        sq += v * v;
    }
    const double d = static_cast<double>(dim_);
    return -0.5 * d * std::log(2.0 * std::numbers::pi * temperature) - 0.5 * sq / temperature + m.log_det;
}

std::vector<Vector> RealNvpFlow::sample(std::size_t n, double temperature, std::uint64_t seed) const
{
    check_temperature(temperature);
    auto rng = make_rng(seed, 0x5a3);
    std::normal_distribution<double> normal(0.0, std::sqrt(temperature));
    std::vector<Vector> out;
    out.reserve(n);
    Vector z(dim_);
    for (std::size_t i = 0; i < n; ++i) {
        for (auto& v : z) {
            v = normal(rng);
        }
        out.push_back(forward(z).point);
    }
    return out;
}

bool RealNvpFlow::transforms_all_coordinates() const
{
    // position[c] = where original coordinate c currently sits
    std::vector<std::size_t> position(dim_);
    std::vector<bool> touched(dim_, false);
    for (std::size_t c = 0; c < dim_; ++c) {
        position[c] = c;
    }
    const std::size_t sh = shift() % dim_;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        for (std::size_t c = 0; c < dim_; ++c) {
            if (position[c] >= layers_[l].split) {
                touched[c] = true;
            }
        }
        if (l + 1 < layers_.size()) {
            for (auto& p : position) {
                p = (p + dim_ - sh) % dim_;
            }
        }
    }
    return std::all_of(touched.begin(), touched.end(), [](bool b) { return b; });
}

FlowMap flow_forward(const RealNvpFlow& flow, std::span<const double> z)
{
    return flow.forward(z);
}

FlowMap flow_inverse(const RealNvpFlow& flow, std::span<const double> theta)
{
    return flow.inverse(theta);
}

double log_density(const RealNvpFlow& flow, std::span<const double> theta, double temperature)
{
    return flow.log_density(theta, temperature);
}

std::vector<Vector> sample_flow(const RealNvpFlow& flow, std::size_t n, double temperature, std::uint64_t seed)
{
    return flow.sample(n, temperature, seed);
}

namespace {

nlohmann::json net_to_json(const DenseNet& net)
{
    return {{"n_in", net.n_in}, {"n_hidden", net.n_hidden}, {"n_out", net.n_out}, {"leaky_slope", net.leaky_slope},
            {"w1", net.w1},     {"b1", net.b1},             {"w2", net.w2},       {"b2", net.b2}};
}

DenseNet net_from_json(const nlohmann::json& j)
{
    DenseNet net;
    net.n_in = j.at("n_in").get<std::size_t>();
    net.n_hidden = j.at("n_hidden").get<std::size_t>();
    net.n_out = j.at("n_out").get<std::size_t>();
    net.leaky_slope = j.at("leaky_slope").get<double>();
    net.w1 = j.at("w1").get<std::vector<double>>();
    net.b1 = j.at("b1").get<std::vector<double>>();
    net.w2 = j.at("w2").get<std::vector<double>>();
    net.b2 = j.at("b2").get<std::vector<double>>();
    return net;
}

} // namespace

std::string flow_to_json(const RealNvpFlow& flow)
{
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& layer : flow.layers()) {
        nlohmann::json jl{{"split", layer.split}, {"scaled", layer.scaled()},
                          {"translate_net", net_to_json(layer.translate_net)}};
        if (layer.scale_net) {
            jl["scale_net"] = net_to_json(*layer.scale_net);
        }
        layers.push_back(std::move(jl));
    }
    nlohmann::json doc{{"format", "lhm.real_nvp"},
                       {"version", kFlowFormatVersion},
                       {"dim", flow.dim()},
                       {"permutation_shift", flow.shift()},
                       {"offset", Vector(flow.offset().begin(), flow.offset().end())},
                       {"scale", Vector(flow.scale().begin(), flow.scale().end())},
                       {"layers", std::move(layers)}};
    return doc.dump(1);
}

RealNvpFlow flow_from_json(std::string_view text)
{
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
        if (doc.at("format") != "lhm.real_nvp") {
            throw DataError("flow JSON: unknown format");
        }
        if (doc.at("version").get<int>() != kFlowFormatVersion) {
            throw DataError("flow JSON: unsupported version " + doc.at("version").dump());
        }
        const auto dim = doc.at("dim").get<std::size_t>();
        std::vector<CouplingLayer> layers;
        for (const auto& jl : doc.at("layers")) {
            CouplingLayer layer;
            layer.dim = dim;
            layer.split = jl.at("split").get<std::size_t>();
            layer.translate_net = net_from_json(jl.at("translate_net"));
            if (jl.at("scaled").get<bool>()) {
                layer.scale_net = net_from_json(jl.at("scale_net"));
            }
            layers.push_back(std::move(layer));
        }
        auto flow = RealNvpFlow::from_layers(dim, std::move(layers));
        if (doc.at("permutation_shift").get<std::size_t>() != flow.shift()) {
            throw DataError("flow JSON: unsupported permutation");
        }
        flow.set_standardization(doc.at("offset").get<Vector>(), doc.at("scale").get<Vector>());
        return flow;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("flow JSON: ") + e.what());
    }
}

void save_flow(const std::string& path, const RealNvpFlow& flow)
{
    std::ofstream out(path);
    if (!out) {
        throw DataError("cannot open " + path + " for writing");
    }
    out << flow_to_json(flow) << '\n';
}

RealNvpFlow load_flow(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open " + path);
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return flow_from_json(ss.str());
}

} // namespace lhm
