// lhm: learned harmonic mean evidence experiments.
//
//   lhm run --problem rosenbrock --output-dir out/rosenbrock
//   lhm bayes-factor --problem pima_m1 --problem pima_m2 --output-dir out/pima
//   lhm ground-truth --problem normal_gamma

#include "lhm/errors.hpp"
#include "lhm/experiment.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using Json = nlohmann::json;

// Flags that mirror config paths; anything set here overrides the file.
struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> jobs;
    std::optional<std::string> output_dir;
    std::optional<std::size_t> n_trials;
    std::optional<double> temperature;
    std::optional<std::string> estimator;
    std::optional<std::size_t> n_walkers;
    std::optional<std::size_t> n_steps;
    std::optional<std::size_t> burn_in;
    std::optional<double> stretch_a;
    std::optional<double> init_radius;
    std::optional<std::size_t> n_layers;
    std::optional<std::size_t> n_scaled;
    std::optional<std::size_t> hidden;
    std::optional<std::size_t> epochs;
    std::optional<std::size_t> batch_size;
    std::optional<double> learning_rate;
    std::vector<double> tau0;
    std::optional<std::size_t> data_n;
    std::optional<std::uint64_t> data_seed;
    std::optional<std::string> data_path;

    void attach(CLI::App& app)
    {
        app.add_option("--seed", seed, "Base seed; trial t uses seed + t");
        app.add_option("--jobs", jobs, "Trials to run concurrently");
        app.add_option("--output-dir", output_dir, "Directory for result files");
        app.add_option("--n-trials", n_trials);
        app.add_option("--temperature", temperature, "Base-distribution temperature in (0, 1]");
        app.add_option("--estimator", estimator, "chainwise | independent");
        app.add_option("--sampler.n-walkers", n_walkers);
        app.add_option("--sampler.n-steps", n_steps, "Retained steps per walker");
        app.add_option("--sampler.burn-in", burn_in);
        app.add_option("--sampler.stretch-a", stretch_a);
        app.add_option("--sampler.init-radius", init_radius);
        app.add_option("--flow.n-layers", n_layers);
        app.add_option("--flow.n-scaled", n_scaled);
        app.add_option("--flow.hidden", hidden);
        app.add_option("--training.epochs", epochs);
        app.add_option("--training.batch-size", batch_size);
        app.add_option("--training.learning-rate", learning_rate);
        app.add_option("--problem-params.tau0", tau0, "Prior precision scale factors (normal_gamma)");
        app.add_option("--problem-params.data-n", data_n);
        app.add_option("--problem-params.data-seed", data_seed);
        app.add_option("--problem-params.data-path", data_path, "Pima CSV");
    }

    Json patch() const
    {
        Json j = Json::object();
        auto set = [](Json& node, const char* key, const auto& opt) {
            if (opt) {
                node[key] = *opt;
            }
        };
        set(j, "seed", seed);
        set(j, "jobs", jobs);
        set(j, "output_dir", output_dir);
        set(j, "n_trials", n_trials);
        set(j, "temperature", temperature);
        set(j, "estimator", estimator);
        Json sampler = Json::object();
        set(sampler, "n_walkers", n_walkers);
        set(sampler, "n_steps", n_steps);
        set(sampler, "burn_in", burn_in);
        set(sampler, "stretch_a", stretch_a);
        set(sampler, "init_radius", init_radius);
        if (!sampler.empty()) {
            j["sampler"] = sampler;
        }
        Json flow = Json::object();
        set(flow, "n_layers", n_layers);
        set(flow, "n_scaled", n_scaled);
        set(flow, "hidden", hidden);
        if (!flow.empty()) {
            j["flow"] = flow;
        }
        Json training = Json::object();
        set(training, "epochs", epochs);
        set(training, "batch_size", batch_size);
        set(training, "learning_rate", learning_rate);
        if (!training.empty()) {
            j["training"] = training;
        }
        Json params = Json::object();
        if (!tau0.empty()) {
            params["tau0"] = tau0;
        }
        set(params, "data_n", data_n);
        set(params, "data_seed", data_seed);
        set(params, "data_path", data_path);
        if (!params.empty()) {
            j["problem_params"] = params;
        }
        return j;
    }
};

lhm::ExperimentConfig resolve(const std::string& config_path, const std::string& problem, const Overrides& ov)
{
    auto cfg = config_path.empty() ? lhm::default_experiment_config(problem.empty() ? "rosenbrock" : problem)
                                   : lhm::load_experiment_config(config_path);
    auto patch = ov.patch();
    if (!problem.empty()) {
        patch["problem"] = problem;
    }
    return lhm::parse_experiment_config(patch.dump(), cfg);
}

void print_summary(const lhm::ExperimentSummary& s)
{
    for (const auto& c : s.cases) {
        std::cout << c.name << ": mean log z = " << c.mean_log_z << ", std = " << c.std_log_z
                  << ", mean sigma = " << c.mean_sigma_log_z;
        if (c.ground_truth && c.ground_truth->log_z) {
            std::cout << ", truth = " << *c.ground_truth->log_z << " (" << c.ground_truth->source << ")";
        }
        std::cout << ", failed " << c.n_failed << "/" << c.trials.size() << '\n';
        for (const auto& t : c.trials) {
            if (!t.ok) {
                std::cerr << "  trial " << t.trial << " failed: " << t.error << '\n';
            }
        }
    }
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Marginal likelihood from posterior samples with the learned harmonic mean estimator"};
    app.require_subcommand(1);

    std::string run_config;
    std::string run_problem;
    Overrides run_ov;
    auto* run = app.add_subcommand("run", "Sample, train and estimate the evidence over seeded trials");
    run->add_option("--config", run_config, "JSON experiment config")->check(CLI::ExistingFile);
    run->add_option("--problem", run_problem, "rosenbrock | normal_gamma | pima_m1 | pima_m2");
    run_ov.attach(*run);

    std::vector<std::string> bf_configs;
    std::vector<std::string> bf_problems;
    Overrides bf_ov;
    auto* bf = app.add_subcommand("bayes-factor", "Log Bayes factor between two single-case experiments");
    bf->add_option("--config", bf_configs, "Two JSON experiment configs (first, second)")->expected(0, 2);
    bf->add_option("--problem", bf_problems, "Two problems (first, second)")->expected(0, 2);
    bf_ov.attach(*bf);

    std::string gt_config;
    std::string gt_problem;
    Overrides gt_ov;
    auto* gt = app.add_subcommand("ground-truth", "Analytic, quadrature or published ground truth");
    gt->add_option("--config", gt_config)->check(CLI::ExistingFile);
    gt->add_option("--problem", gt_problem);
    gt_ov.attach(*gt);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            const auto cfg = resolve(run_config, run_problem, run_ov);
            const auto summary = lhm::run_experiment(cfg);
            print_summary(summary);
            return summary.n_failed == 0 ? 0 : 1;
        }
        if (*bf) {
            std::vector<lhm::ExperimentConfig> cfgs;
            for (std::size_t i = 0; i < 2; ++i) {
                const std::string path = i < bf_configs.size() ? bf_configs[i] : "";
                const std::string problem = i < bf_problems.size() ? bf_problems[i] : "";
                if (path.empty() && problem.empty()) {
                    throw lhm::ConfigError("bayes-factor needs two --config or --problem values");
                }
                cfgs.push_back(resolve(path, problem, bf_ov));
            }
            const auto report = lhm::run_bayes_factor(cfgs[0], cfgs[1]);
            std::cout << lhm::bayes_factor_to_json(report) << '\n';
            return report.n_failed == 0 ? 0 : 1;
        }
        if (*gt) {
            const auto cfg = resolve(gt_config, gt_problem, gt_ov);
            std::cout << lhm::regen_ground_truth(cfg) << '\n';
            return 0;
        }
    } catch (const lhm::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
