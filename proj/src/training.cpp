#include "lhm/training.hpp"

#include "lhm/errors.hpp"
#include "lhm/log_math.hpp"
#include "lhm/random.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

namespace lhm {

void TrainingConfig::validate() const
{
    if (!(learning_rate > 0.0)) {
        throw ConfigError("training: learning_rate must be positive");
    }
    if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0) || !(adam_beta2 > 0.0 && adam_beta2 < 1.0)) {
        throw ConfigError("training: Adam betas must lie in (0, 1)");
    }
    if (!(adam_epsilon > 0.0)) {
        throw ConfigError("training: Adam epsilon must be positive");
    }
    if (batch_size == 0) {
        throw ConfigError("training: batch_size must be positive");
    }
}

std::size_t TrainingConfig::effective_batch_size(std::size_t n_samples) const
{
    return std::max<std::size_t>(1, std::min(batch_size, n_samples / 10));
}

namespace {

// Per-layer values kept from the forward sweep for the backward sweep.
struct LayerTape {
    Vector input;
    Vector raw_scale;
    Vector scale;
    Vector hidden_scale;
    Vector hidden_translate;
    Vector translate;
};

struct NetOffsets {
    std::size_t w1 = 0;
    std::size_t b1 = 0;
    std::size_t w2 = 0;
    std::size_t b2 = 0;
};

NetOffsets offsets_for(const DenseNet& net, std::size_t& pos)
{
    NetOffsets o;
    o.w1 = pos;
    o.b1 = o.w1 + net.w1.size();
    o.w2 = o.b1 + net.b1.size();
    o.b2 = o.w2 + net.w2.size();
    pos = o.b2 + net.b2.size();
    return o;
}

// Reverse-mode sweep through one dense net. Adds parameter gradients into
// `grad` and the input gradient into `grad_in`.
void net_backward(const DenseNet& net, const NetOffsets& off, std::span<const double> in,
                  std::span<const double> hidden_pre, std::span<const double> grad_out, std::span<double> grad,
                  std::span<double> grad_in, std::span<double> grad_hidden)
{
    const std::size_t H = net.n_hidden;
    const std::size_t I = net.n_in;
    std::fill(grad_hidden.begin(), grad_hidden.end(), 0.0);
    for (std::size_t o = 0; o < net.n_out; ++o) {
        const double g = grad_out[o];
        if (g == 0.0) {
            continue;
        }
        grad[off.b2 + o] += g;
        const double* w_row = net.w2.data() + o * H;
        double* gw_row = grad.data() + off.w2 + o * H;
        for (std::size_t h = 0; h < H; ++h) {
            const double pre = hidden_pre[h];
            gw_row[h] += g * (pre > 0.0 ? pre : net.leaky_slope * pre);
            grad_hidden[h] += w_row[h] * g;
        }
    }
    for (std::size_t h = 0; h < H; ++h) {
        const double g = grad_hidden[h] * (hidden_pre[h] > 0.0 ? 1.0 : net.leaky_slope);
        if (g == 0.0) {
            continue;
        }
        grad[off.b1 + h] += g;
        const double* w_row = net.w1.data() + h * I;
        double* gw_row = grad.data() + off.w1 + h * I;
        for (std::size_t i = 0; i < I; ++i) {
            gw_row[i] += g * in[i];
            grad_in[i] += w_row[i] * g;
        }
    }
}

class GradientWorkspace {
public:
    explicit GradientWorkspace(const RealNvpFlow& flow) : flow_(flow)
    {
        const std::size_t D = flow.dim();
        std::size_t pos = 0;
        std::size_t max_hidden = 0;
        for (const auto& layer : flow.layers()) {
            LayerTape tape;
            const std::size_t d = layer.split;
            tape.input.resize(D);
            tape.raw_scale.resize(D - d);
            tape.scale.resize(D - d);
            tape.translate.resize(D - d);
            tape.hidden_translate.resize(layer.translate_net.n_hidden);
            if (layer.scale_net) {
                tape.hidden_scale.resize(layer.scale_net->n_hidden);
                scale_offsets_.push_back(offsets_for(*layer.scale_net, pos));
                max_hidden = std::max(max_hidden, layer.scale_net->n_hidden);
            } else {
                scale_offsets_.push_back({});
            }
            translate_offsets_.push_back(offsets_for(layer.translate_net, pos));
            max_hidden = std::max(max_hidden, layer.translate_net.n_hidden);
            tapes_.push_back(std::move(tape));
        }
        x_.resize(D);
        g_.resize(D);
        g_a_.resize(D);
        g_s_.resize(D);
        g_t_.resize(D);
        g_hidden_.resize(max_hidden);
    }

    // Negative log-density of one point at T = 1; when `grad` is non-empty
    // the parameter gradient of that value is added into it.
    double evaluate(std::span<const double> theta, std::span<double> grad)
    {
        const std::size_t D = flow_.dim();
        const auto& layers = flow_.layers();
        const auto offset = flow_.offset();
        const auto scale = flow_.scale();

        double nll = 0.5 * static_cast<double>(D) * std::log(2.0 * std::numbers::pi);
        for (std::size_t j = 0; j < D; ++j) {
            x_[j] = (theta[j] - offset[j]) / scale[j];
            nll += std::log(scale[j]);
        }
        for (std::size_t l = 0; l < layers.size(); ++l) {
            const auto& layer = layers[l];
            auto& tape = tapes_[l];
            const std::size_t d = layer.split;
            std::copy(x_.begin(), x_.end(), tape.input.begin());
            std::span<const double> a(x_.data(), d);
            if (layer.scale_net) {
                layer.scale_net->evaluate(a, tape.raw_scale, tape.hidden_scale);
                for (std::size_t j = 0; j < D - d; ++j) {
                    tape.scale[j] = softplus(tape.raw_scale[j]);
                }
            } else {
                std::fill(tape.scale.begin(), tape.scale.end(), 0.0);
            }
            layer.translate_net.evaluate(a, tape.translate, tape.hidden_translate);
            for (std::size_t j = 0; j < D - d; ++j) {
                x_[d + j] = x_[d + j] * std::exp(tape.scale[j]) + tape.translate[j];
                nll -= tape.scale[j];
            }
            if (l + 1 < layers.size()) {
                flow_.permute(x_);
            }
        }
        for (std::size_t j = 0; j < D; ++j) {
            nll += 0.5 * x_[j] * x_[j];
        }
        if (grad.empty()) {
            return nll;
        }

        std::copy(x_.begin(), x_.end(), g_.begin());
        for (std::size_t l = layers.size(); l-- > 0;) {
            const auto& layer = layers[l];
            const auto& tape = tapes_[l];
            const std::size_t d = layer.split;
            const std::size_t m = D - d;
            if (l + 1 < layers.size()) {
                flow_.unpermute(g_);
            }
            std::fill(g_a_.begin(), g_a_.begin() + static_cast<std::ptrdiff_t>(d), 0.0);
            for (std::size_t j = 0; j < m; ++j) {
                const double g_out = g_[d + j];
                const double e = std::exp(tape.scale[j]);
                g_t_[j] = g_out;
                // d/ds of (b e^s + t) contributes g_out * b * e^s; the log-det term contributes -1
                g_s_[j] = (g_out * tape.input[d + j] * e - 1.0) * sigmoid(tape.raw_scale[j]);
                g_[d + j] = g_out * e;
            }
            std::span<const double> a(tape.input.data(), d);
            if (layer.scale_net) {
                net_backward(*layer.scale_net, scale_offsets_[l], a, tape.hidden_scale,
                             std::span<const double>(g_s_.data(), m), grad, std::span<double>(g_a_.data(), d),
                             g_hidden_);
            }
            net_backward(layer.translate_net, translate_offsets_[l], a, tape.hidden_translate,
                         std::span<const double>(g_t_.data(), m), grad, std::span<double>(g_a_.data(), d), g_hidden_);
            for (std::size_t i = 0; i < d; ++i) {
                g_[i] += g_a_[i];
            }
        }
        return nll;
    }

private:
    const RealNvpFlow& flow_;
    std::vector<LayerTape> tapes_;
    std::vector<NetOffsets> scale_offsets_;
    std::vector<NetOffsets> translate_offsets_;
    Vector x_;
    Vector g_;
    Vector g_a_;
    Vector g_s_;
    Vector g_t_;
    Vector g_hidden_;
};

void check_batch(const RealNvpFlow& flow, const std::vector<Vector>& batch)
{
    if (batch.empty()) {
        throw DimensionError("nll: batch is empty");
    }
    for (const auto& x : batch) {
        if (x.size() != flow.dim()) {
            throw DimensionError("nll: batch point has the wrong dimension");
        }
    }
}

} // namespace

double nll_loss(const RealNvpFlow& flow, const std::vector<Vector>& batch)
{
    check_batch(flow, batch);
    double total = 0.0;
    for (const auto& x : batch) {
        total -= flow.log_density(x, 1.0);
    }
    return total / static_cast<double>(batch.size());
}

Vector grad_nll(const RealNvpFlow& flow, const std::vector<Vector>& batch)
{
    check_batch(flow, batch);
    GradientWorkspace ws(flow);
    Vector grad(flow.n_params(), 0.0);
    for (const auto& x : batch) {
        ws.evaluate(x, grad);
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (auto& g : grad) {
        g *= inv;
        if (!std::isfinite(g)) {
            throw NonFiniteError("grad_nll: non-finite gradient component");
        }
    }
    return grad;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, const TrainingConfig& config)
{
    if (params.size() != grads.size()) {
        throw DimensionError("adam_step: parameter and gradient sizes differ");
    }
    if (state.step == 0 && state.m.empty() && state.v.empty()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
    }
    if (state.m.size() != params.size() || state.v.size() != params.size()) {
        throw DimensionError("adam_step: optimizer state does not match parameter count");
    }
    ++state.step;
    const double b1 = config.adam_beta1;
    const double b2 = config.adam_beta2;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(b1, t);
    const double correction2 = 1.0 - std::pow(b2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * grads[i];
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * grads[i] * grads[i];
        const double m_hat = state.m[i] / correction1;
        const double v_hat = state.v[i] / correction2;
        params[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.adam_epsilon);
    }
}

TrainingResult train_flow(RealNvpFlow flow, const Chains& training, const TrainingConfig& config)
{
    config.validate();
    if (training.n_samples() == 0) {
        throw DimensionError("train_flow: no training samples");
    }
    if (training.dim() != flow.dim()) {
        throw DimensionError("train_flow: sample dimension does not match the flow");
    }
    TrainingResult result;
    if (config.epochs == 0) {
        result.flow = std::move(flow);
        return result;
    }

    const std::size_t N = training.n_samples();
    const std::size_t D = training.dim();
    if (config.standardize) {
        Vector mean(D, 0.0);
        Vector sd(D, 0.0);
        for (std::size_t r = 0; r < N; ++r) {
            auto x = training.sample(r);
            for (std::size_t j = 0; j < D; ++j) {
                mean[j] += x[j];
            }
        }
        for (auto& m : mean) {
            m /= static_cast<double>(N);
        }
        for (std::size_t r = 0; r < N; ++r) {
            auto x = training.sample(r);
            for (std::size_t j = 0; j < D; ++j) {
                sd[j] += (x[j] - mean[j]) * (x[j] - mean[j]);
            }
        }
        for (auto& s : sd) {
            s = std::sqrt(s / static_cast<double>(N));
            if (!(s > 0.0)) {
                s = 1.0;
            }
        }
        flow.set_standardization(std::move(mean), std::move(sd));
    }

    const std::size_t batch = config.effective_batch_size(N);
    std::vector<std::size_t> order(N);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Vector params = flow.parameters();
    Vector grad(params.size());
    AdamState state;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        auto rng = make_rng(config.seed, 0x7a11 + epoch);
        for (std::size_t i = N - 1; i > 0; --i) {
            const auto j = std::min(i, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i + 1)));
            std::swap(order[i], order[j]);
        }
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < N; start += batch) {
            const std::size_t stop = std::min(N, start + batch);
            std::fill(grad.begin(), grad.end(), 0.0);
            double batch_loss = 0.0;
            {
                GradientWorkspace ws(flow);
                for (std::size_t k = start; k < stop; ++k) {
                    batch_loss += ws.evaluate(training.sample(order[k]), grad);
                }
            }
            const double inv = 1.0 / static_cast<double>(stop - start);
            bool finite = std::isfinite(batch_loss);
            for (auto& g : grad) {
                g *= inv;
                finite = finite && std::isfinite(g);
            }
            if (!finite) {
                throw TrainingAborted("train_flow: non-finite loss in epoch " + std::to_string(epoch),
                                      std::move(result.loss_trace));
            }
            epoch_loss += batch_loss;
            adam_step(params, grad, state, config);
            flow.set_parameters(params);
        }
        result.loss_trace.push_back(epoch_loss / static_cast<double>(N));
    }
    result.flow = std::move(flow);
    return result;
}

} // namespace lhm
