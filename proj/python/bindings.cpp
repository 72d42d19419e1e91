#include "lhm/chains.hpp"
#include "lhm/errors.hpp"
#include "lhm/evidence.hpp"
#include "lhm/experiment.hpp"
#include "lhm/flow.hpp"
#include "lhm/sampler.hpp"
#include "lhm/training.hpp"

#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace lhm;

namespace {

py::dict evidence_dict(const EvidenceResult& r)
{
    py::dict d;
    d["log_z"] = r.log_z;
    d["sigma_log_z"] = r.sigma_log_z;
    d["log_rho_hat"] = r.log_rho_hat;
    d["var_rho_hat_log"] = r.var_rho_hat_log;
    d["var_of_var_log"] = r.var_of_var_log;
    d["n_terms"] = r.n_terms;
    d["flagged"] = r.flagged;
    d["tail_fraction"] = r.tail_fraction;
    d["top_term_share"] = r.top_term_share;
    return d;
}

Chains chains_from(const std::vector<std::vector<Vector>>& per_chain)
{
    std::vector<std::vector<double>> lp(per_chain.size());
    for (std::size_t c = 0; c < per_chain.size(); ++c) {
        lp[c].assign(per_chain[c].size(), 0.0);
    }
    return build_chains(per_chain, lp);
}

ExperimentConfig config_from(const std::string& json_text, const std::string& output_dir)
{
    auto c = parse_experiment_config(json_text);
    if (!output_dir.empty()) {
        c.output_dir = output_dir;
    }
    return c;
}

} // namespace

PYBIND11_MODULE(_lhm, m)
{
    m.doc() = "Learned harmonic mean evidence estimation";

    // translators run newest first, so the base goes in before its subclasses
    const auto& base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
    py::register_exception<NonFiniteError>(m, "NonFiniteError", base.ptr());
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<DataError>(m, "DataError", base.ptr());
    py::register_exception<ConvergenceError>(m, "ConvergenceError", base.ptr());

    m.def("default_config", [](const std::string& problem) { return experiment_config_to_json(default_experiment_config(problem)); },
          py::arg("problem"), "Desk-scale config for a problem, as JSON text");
    m.def(
        "run",
        [](const std::string& config, const std::string& output_dir) {
            const auto c = config_from(config, output_dir);
            ExperimentSummary s;
            {
                py::gil_scoped_release release;
                s = run_experiment(c);
            }
            return summary_to_json(s);
        },
        py::arg("config"), py::arg("output_dir") = "", "Run an experiment; returns the summary JSON");
    m.def(
        "bayes_factor",
        [](const std::string& first, const std::string& second, const std::string& output_dir) {
            const auto a = config_from(first, output_dir);
            auto b = config_from(second, "");
            BayesFactorReport r;
            {
                py::gil_scoped_release release;
                r = run_bayes_factor(a, b);
            }
            return bayes_factor_to_json(r);
        },
        py::arg("first"), py::arg("second"), py::arg("output_dir") = "");
    m.def(
        "ground_truth",
        [](const std::string& config) {
            const auto c = config_from(config, "");
            py::gil_scoped_release release;
            return regen_ground_truth(c);
        },
        py::arg("config"));

    m.def(
        "estimate_evidence",
        [](const std::vector<double>& terms, std::optional<std::vector<std::size_t>> chain_lengths) {
            return evidence_dict(chain_lengths ? estimate_evidence_chainwise(terms, *chain_lengths)
                                               : estimate_evidence(terms));
        },
        py::arg("terms"), py::arg("chain_lengths") = py::none(),
        "Evidence from log terms log phi - log L - log pi");

    m.def(
        "sample",
        [](const std::function<double(std::vector<double>)>& log_target, const Vector& init_center, std::size_t n_walkers,
           std::size_t n_steps, std::size_t burn_in, std::uint64_t seed, double init_radius) {
            SamplerConfig c;
            c.n_walkers = n_walkers;
            c.n_steps = n_steps;
            c.burn_in = burn_in;
            c.seed = seed;
            c.init_center = init_center;
            c.init_radius = init_radius;
            const auto run = run_sampler(
                [&](std::span<const double> x) { return log_target(std::vector<double>(x.begin(), x.end())); }, c);
            std::vector<std::vector<Vector>> out(run.chains.n_chains());
            for (std::size_t w = 0; w < out.size(); ++w) {
                for (std::size_t i = 0; i < run.chains.chain_length(w); ++i) {
                    const auto s = run.chains.sample(w, i);
                    out[w].emplace_back(s.begin(), s.end());
                }
            }
            return py::make_tuple(out, run.acceptance_rate);
        },
        py::arg("log_target"), py::arg("init_center"), py::arg("n_walkers") = 40, py::arg("n_steps") = 1000,
        py::arg("burn_in") = 500, py::arg("seed") = 0, py::arg("init_radius") = 1.0,
        "Stretch-move ensemble sampling; returns (chains, acceptance_rate)");

    py::class_<RealNvpFlow>(m, "Flow")
        .def(py::init([](std::size_t dim, std::size_t n_layers, std::size_t n_scaled, std::size_t hidden,
                         std::uint64_t seed) {
                 return RealNvpFlow::create(dim, FlowArchitecture{n_layers, n_scaled, hidden, 0.01}, seed);
             }),
             py::arg("dim"), py::arg("n_layers") = 6, py::arg("n_scaled") = 2, py::arg("hidden") = 0,
             py::arg("seed") = 0)
        .def_property_readonly("dim", &RealNvpFlow::dim)
        .def_property_readonly("n_params", &RealNvpFlow::n_params)
        .def("forward",
             [](const RealNvpFlow& f, const Vector& z) {
                 const auto r = f.forward(z);
                 return py::make_tuple(r.point, r.log_det);
             })
        .def("inverse",
             [](const RealNvpFlow& f, const Vector& theta) {
                 const auto r = f.inverse(theta);
                 return py::make_tuple(r.point, r.log_det);
             })
        .def("log_density", [](const RealNvpFlow& f, const Vector& theta, double t) { return f.log_density(theta, t); },
             py::arg("theta"), py::arg("temperature") = 1.0)
        .def("sample", &RealNvpFlow::sample, py::arg("n"), py::arg("temperature") = 1.0, py::arg("seed") = 0)
        .def(
            "fit",
            [](RealNvpFlow& f, const std::vector<std::vector<Vector>>& chains, std::size_t epochs, double learning_rate,
               std::uint64_t seed) {
                TrainingConfig tc;
                tc.epochs = epochs;
                tc.learning_rate = learning_rate;
                tc.seed = seed;
                const auto data = chains_from(chains);
                py::gil_scoped_release release;
                auto r = train_flow(f, data, tc);
                f = std::move(r.flow);
                return r.loss_trace;
            },
            py::arg("chains"), py::arg("epochs") = 100, py::arg("learning_rate") = 1e-3, py::arg("seed") = 0,
            "Maximum-likelihood fit to per-chain samples; returns the per-epoch loss")
        .def(
            "evidence",
            [](const RealNvpFlow& f, const std::vector<std::vector<Vector>>& chains,
               const std::function<double(std::vector<double>)>& log_likelihood,
               const std::function<double(std::vector<double>)>& log_prior, double temperature) {
                const auto data = chains_from(chains);
                auto wrap = [](const std::function<double(std::vector<double>)>& fn) {
                    return [&fn](std::span<const double> x) { return fn(std::vector<double>(x.begin(), x.end())); };
                };
                const auto terms = log_estimator_terms(f, temperature, data, wrap(log_likelihood), wrap(log_prior));
                std::vector<std::size_t> lengths(data.n_chains());
                for (std::size_t c = 0; c < lengths.size(); ++c) {
                    lengths[c] = data.chain_length(c);
                }
                return evidence_dict(estimate_evidence_chainwise(terms, lengths));
            },
            py::arg("chains"), py::arg("log_likelihood"), py::arg("log_prior"), py::arg("temperature") = 0.9,
            "Learned harmonic mean evidence on held-out per-chain samples")
        .def("to_json", [](const RealNvpFlow& f) { return flow_to_json(f); })
        .def_static("from_json", [](const std::string& text) { return flow_from_json(text); });
}
