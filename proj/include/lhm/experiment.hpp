#pragma once

#include "lhm/benchmarks.hpp"
#include "lhm/evidence.hpp"
#include "lhm/flow.hpp"
#include "lhm/sampler.hpp"
#include "lhm/training.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lhm {

enum class EstimatorMode { Chainwise, Independent };

struct ExperimentConfig {
    std::string problem = "rosenbrock"; // rosenbrock | normal_gamma | pima_m1 | pima_m2
    // An empty init_center or non-positive init_radius selects the
    // problem's own starting ball.
    SamplerConfig sampler;
    // Unset means the problem's preset.
    std::optional<FlowArchitecture> flow;
    TrainingConfig training;
    double temperature = 0.9;
    std::size_t n_trials = 1;
    std::uint64_t seed = 0;
    std::string output_dir;
    std::size_t jobs = 1;
    EstimatorMode estimator = EstimatorMode::Chainwise;

    // normal_gamma
    std::vector<double> tau0{1e-4, 1e-3, 1e-2, 1e-1, 1.0};
    std::size_t data_n = 100;
    std::uint64_t data_seed = 2023;
    double mu0 = 0.0;
    double a0 = 1e-3;
    double b0 = 1e-3;
    // pima
    std::string data_path;
    double precision = kPimaPriorPrecision;

    void validate() const;
};

// Desk-scale defaults for each problem.
ExperimentConfig default_experiment_config(const std::string& problem);

// Fields present in the JSON override `base`; unknown keys are an error.
ExperimentConfig parse_experiment_config(std::string_view json_text, ExperimentConfig base);
ExperimentConfig parse_experiment_config(std::string_view json_text);
ExperimentConfig load_experiment_config(const std::string& path);
std::string experiment_config_to_json(const ExperimentConfig& config);

// Bundled Pima CSV location.
std::string default_pima_path();

struct ExperimentCase {
    std::string name;
    BenchmarkProblem problem;
    // extra labels written next to the results, e.g. tau0
    std::vector<std::pair<std::string, double>> params;
};

// One case per problem instance; normal_gamma yields one per tau0.
std::vector<ExperimentCase> build_cases(const ExperimentConfig& config);

struct TrialOutcome {
    bool ok = false;
    std::string error;
    std::size_t trial = 0;
    std::uint64_t seed = 0;
    std::vector<double> temperatures;
    std::vector<EvidenceResult> results; // aligned with temperatures
    // original harmonic mean (prior as target) on the same inference half
    std::optional<EvidenceResult> prior_target;
    std::vector<double> loss_trace;
    double acceptance_rate = 0.0;
    std::size_t n_training = 0;
    std::size_t n_inference = 0;
};

struct TrialArtifacts {
    Chains training;
    Chains inference;
    RealNvpFlow flow;
};

// sample -> split -> train -> estimate, every stage seeded from `seed`.
// Failures are reported through TrialOutcome::ok / error, not thrown.
TrialOutcome run_trial(const BenchmarkProblem& problem, const ExperimentConfig& config, std::uint64_t seed,
                       std::span<const double> temperatures, TrialArtifacts* artifacts = nullptr);

struct CaseSummary {
    std::string name;
    std::vector<std::pair<std::string, double>> params;
    std::optional<GroundTruth> ground_truth;
    std::vector<TrialOutcome> trials;
    std::size_t n_failed = 0;
    double mean_log_z = 0.0;
    double std_log_z = 0.0;
    double mean_sigma_log_z = 0.0;
};

struct ExperimentSummary {
    std::string problem;
    std::vector<CaseSummary> cases;
    std::size_t n_failed = 0;
};

// Runs every case for n_trials (trial t uses seed + t). When output_dir is
// set, writes per-trial JSON, loss traces, trained flows, corner and violin
// CSVs and summary.json there. Throws ConfigError before any compute if the
// directory cannot be written.
ExperimentSummary run_experiment(const ExperimentConfig& config);

struct BayesFactorReport {
    std::string first;
    std::string second;
    std::vector<BayesFactor> per_trial;
    double log_bf = 0.0;
    double sigma = 0.0;
    double empirical_std = 0.0;
    std::size_t n_failed = 0;
    std::optional<double> published_log_bf;
};

// Evidence for two single-case experiments and their log Bayes factor,
// paired trial by trial. Writes bayes_factor.json into the first config's
// output_dir when set.
BayesFactorReport run_bayes_factor(const ExperimentConfig& first, const ExperimentConfig& second);

// {problem, params, log_z, source} for every case of the config.
std::string regen_ground_truth(const ExperimentConfig& config);

std::string evidence_to_json(const EvidenceResult& result, double temperature);
std::string summary_to_json(const ExperimentSummary& summary);
std::string bayes_factor_to_json(const BayesFactorReport& report);

} // namespace lhm
