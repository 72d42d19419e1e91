#include "lhm/experiment.hpp"

#include "lhm/errors.hpp"
#include "lhm/random.hpp"
#include "text_format.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace lhm {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

constexpr std::size_t kCornerPoints = 10000;

enum SeedTag : std::uint64_t { kSamplerSeed = 1, kSplitSeed, kFlowInitSeed, kTrainSeed, kFlowSampleSeed };

Json number_or_null(double v)
{
    return std::isfinite(v) ? Json(v) : Json(nullptr);
}

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ConfigError("cannot write " + path.string());
    }
    out << text;
}

std::string estimator_name(EstimatorMode m)
{
    return m == EstimatorMode::Chainwise ? "chainwise" : "independent";
}

EstimatorMode estimator_from_name(const std::string& s)
{
    if (s == "chainwise") {
        return EstimatorMode::Chainwise;
    }
    if (s == "independent") {
        return EstimatorMode::Independent;
    }
    throw ConfigError("estimator must be 'chainwise' or 'independent', got '" + s + "'");
}

template <typename T>
void take(const Json& j, const char* key, T& out, std::vector<std::string>& seen)
{
    if (j.contains(key)) {
        out = j.at(key).get<T>();
        seen.emplace_back(key);
    }
}

void reject_unknown(const Json& j, const std::vector<std::string>& seen, const std::string& where)
{
    for (const auto& item : j.items()) {
        if (std::find(seen.begin(), seen.end(), item.key()) == seen.end()) {
            throw ConfigError("config: unknown key '" + where + item.key() + "'");
        }
    }
}

} // namespace

void ExperimentConfig::validate() const
{
    if (problem != "rosenbrock" && problem != "normal_gamma" && problem != "pima_m1" && problem != "pima_m2") {
        throw ConfigError("unknown problem '" + problem + "' (expected rosenbrock, normal_gamma, pima_m1, pima_m2)");
    }
    if (n_trials == 0) {
        throw ConfigError("n_trials must be at least 1");
    }
    if (jobs == 0) {
        throw ConfigError("jobs must be at least 1");
    }
    check_temperature(temperature);
    training.validate();
    if (flow) {
        flow->validate();
    }
    if (sampler.n_walkers % 2 != 0 || sampler.n_walkers < 4) {
        throw ConfigError("sampler.n_walkers must be even and at least 4");
    }
    if (!(sampler.stretch_a > 1.0)) {
        throw ConfigError("sampler.stretch_a must exceed 1");
    }
    if (problem == "normal_gamma") {
        if (tau0.empty()) {
            throw ConfigError("normal_gamma needs at least one tau0");
        }
        for (double t : tau0) {
            NormalGammaPrior{mu0, t, a0, b0}.validate();
        }
        if (data_n == 0) {
            throw ConfigError("normal_gamma needs data_n >= 1");
        }
    }
    if (!(precision > 0.0)) {
        throw ConfigError("precision must be positive");
    }
}

ExperimentConfig default_experiment_config(const std::string& problem)
{
    ExperimentConfig c;
    c.problem = problem;
    c.sampler.n_walkers = 40;
    c.sampler.init_radius = 0.0;
    if (problem == "rosenbrock") {
        c.sampler.n_steps = 2500;
        c.sampler.burn_in = 1000;
        c.n_trials = 10;
    } else if (problem == "normal_gamma") {
        c.sampler.n_steps = 1500;
        c.sampler.burn_in = 500;
    } else if (problem == "pima_m1" || problem == "pima_m2") {
        c.sampler.n_steps = 2000;
        c.sampler.burn_in = 1000;
    } else {
        throw ConfigError("unknown problem '" + problem + "'");
    }
    return c;
}

ExperimentConfig parse_experiment_config(std::string_view json_text, ExperimentConfig c)
{
    try {
        const auto j = Json::parse(json_text);
        std::vector<std::string> seen;
        take(j, "problem", c.problem, seen);
        take(j, "seed", c.seed, seen);
        take(j, "n_trials", c.n_trials, seen);
        take(j, "temperature", c.temperature, seen);
        take(j, "output_dir", c.output_dir, seen);
        take(j, "jobs", c.jobs, seen);
        if (j.contains("estimator")) {
            c.estimator = estimator_from_name(j.at("estimator").get<std::string>());
            seen.emplace_back("estimator");
        }
        if (j.contains("sampler")) {
            const auto& s = j.at("sampler");
            std::vector<std::string> sub;
            take(s, "n_walkers", c.sampler.n_walkers, sub);
            take(s, "n_steps", c.sampler.n_steps, sub);
            take(s, "burn_in", c.sampler.burn_in, sub);
            take(s, "stretch_a", c.sampler.stretch_a, sub);
            take(s, "init_center", c.sampler.init_center, sub);
            take(s, "init_radius", c.sampler.init_radius, sub);
            reject_unknown(s, sub, "sampler.");
            seen.emplace_back("sampler");
        }
        if (j.contains("flow")) {
            const auto& f = j.at("flow");
            FlowArchitecture arch = c.flow.value_or(FlowArchitecture{});
            std::vector<std::string> sub;
            take(f, "n_layers", arch.n_layers, sub);
            take(f, "n_scaled", arch.n_scaled, sub);
            take(f, "hidden", arch.hidden, sub);
            take(f, "leaky_slope", arch.leaky_slope, sub);
            reject_unknown(f, sub, "flow.");
            c.flow = arch;
            seen.emplace_back("flow");
        }
        if (j.contains("training")) {
            const auto& t = j.at("training");
            std::vector<std::string> sub;
            take(t, "epochs", c.training.epochs, sub);
            take(t, "batch_size", c.training.batch_size, sub);
            take(t, "learning_rate", c.training.learning_rate, sub);
            take(t, "adam_beta1", c.training.adam_beta1, sub);
            take(t, "adam_beta2", c.training.adam_beta2, sub);
            take(t, "adam_epsilon", c.training.adam_epsilon, sub);
            take(t, "standardize", c.training.standardize, sub);
            reject_unknown(t, sub, "training.");
            seen.emplace_back("training");
        }
        if (j.contains("problem_params")) {
            const auto& p = j.at("problem_params");
            std::vector<std::string> sub;
            take(p, "tau0", c.tau0, sub);
            take(p, "data_n", c.data_n, sub);
            take(p, "data_seed", c.data_seed, sub);
            take(p, "mu0", c.mu0, sub);
            take(p, "a0", c.a0, sub);
            take(p, "b0", c.b0, sub);
            take(p, "data_path", c.data_path, sub);
            take(p, "precision", c.precision, sub);
            reject_unknown(p, sub, "problem_params.");
            seen.emplace_back("problem_params");
        }
        reject_unknown(j, seen, "");
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return c;
}

ExperimentConfig parse_experiment_config(std::string_view json_text)
{
    const auto j = Json::parse(json_text, nullptr, false);
    std::string problem = "rosenbrock";
    if (!j.is_discarded() && j.contains("problem") && j.at("problem").is_string()) {
        problem = j.at("problem").get<std::string>();
    }
    return parse_experiment_config(json_text, default_experiment_config(problem));
}

ExperimentConfig load_experiment_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config " + path);
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_experiment_config(ss.str());
}

std::string experiment_config_to_json(const ExperimentConfig& c)
{
    Json j;
    j["problem"] = c.problem;
    j["seed"] = c.seed;
    j["n_trials"] = c.n_trials;
    j["temperature"] = c.temperature;
    j["output_dir"] = c.output_dir;
    j["jobs"] = c.jobs;
    j["estimator"] = estimator_name(c.estimator);
    j["sampler"] = {{"n_walkers", c.sampler.n_walkers}, {"n_steps", c.sampler.n_steps},
                    {"burn_in", c.sampler.burn_in},     {"stretch_a", c.sampler.stretch_a},
                    {"init_center", c.sampler.init_center}, {"init_radius", c.sampler.init_radius}};
    if (c.flow) {
        j["flow"] = {{"n_layers", c.flow->n_layers},
                     {"n_scaled", c.flow->n_scaled},
                     {"hidden", c.flow->hidden},
                     {"leaky_slope", c.flow->leaky_slope}};
    }
    j["training"] = {{"epochs", c.training.epochs},
                     {"batch_size", c.training.batch_size},
                     {"learning_rate", c.training.learning_rate},
                     {"adam_beta1", c.training.adam_beta1},
                     {"adam_beta2", c.training.adam_beta2},
                     {"adam_epsilon", c.training.adam_epsilon},
                     {"standardize", c.training.standardize}};
    j["problem_params"] = {{"tau0", c.tau0}, {"data_n", c.data_n}, {"data_seed", c.data_seed}, {"mu0", c.mu0},
                           {"a0", c.a0},     {"b0", c.b0},         {"data_path", c.data_path}, {"precision", c.precision}};
    return j.dump(2);
}

std::string default_pima_path()
{
    if (const char* env = std::getenv("LHM_PIMA_PATH")) {
        return env;
    }
    return std::string(LHM_SOURCE_DIR) + "/data/pima_indian.csv";
}

std::vector<ExperimentCase> build_cases(const ExperimentConfig& config)
{
    config.validate();
    std::vector<ExperimentCase> cases;
    if (config.problem == "rosenbrock") {
        cases.push_back({"rosenbrock", rosenbrock_problem(), {}});
    } else if (config.problem == "normal_gamma") {
        const auto data = generate_normal_gamma_data(config.data_n, 0.0, 1.0, config.data_seed);
        for (double tau0 : config.tau0) {
            const NormalGammaPrior prior{config.mu0, tau0, config.a0, config.b0};
            cases.push_back({"normal_gamma_tau0_" + format_double(tau0), normal_gamma_problem(data, prior),
                             {{"tau0", tau0}, {"n", static_cast<double>(config.data_n)}}});
        }
    } else {
        const auto path = config.data_path.empty() ? default_pima_path() : config.data_path;
        const auto dataset = load_pima_data(path);
        const auto model = config.problem == "pima_m1" ? PimaModel::M1 : PimaModel::M2;
        cases.push_back({config.problem, pima_problem(dataset, model, config.precision), {{"precision", config.precision}}});
    }
    return cases;
}

TrialOutcome run_trial(const BenchmarkProblem& problem, const ExperimentConfig& config, std::uint64_t seed,
                       std::span<const double> temperatures, TrialArtifacts* artifacts)
{
    TrialOutcome out;
    out.seed = seed;
    out.temperatures.assign(temperatures.begin(), temperatures.end());
    try {
        SamplerConfig sc = config.sampler;
        sc.seed = derive_seed(seed, kSamplerSeed);
        if (sc.init_center.empty()) {
            sc.init_center = problem.init_center;
        }
        if (!(sc.init_radius > 0.0)) {
            sc.init_radius = problem.init_radius;
        }
        const auto run = run_sampler(problem.log_posterior(), sc);
        out.acceptance_rate = run.acceptance_rate;

        auto split = split_half(run.chains, derive_seed(seed, kSplitSeed));
        out.n_training = split.training.n_samples();
        out.n_inference = split.inference.n_samples();

        const auto arch = config.flow.value_or(problem.flow_preset);
        auto flow = RealNvpFlow::create(problem.dim, arch, derive_seed(seed, kFlowInitSeed));
        TrainingConfig tc = config.training;
        tc.seed = derive_seed(seed, kTrainSeed);
        auto trained = train_flow(std::move(flow), split.training, tc);
        out.loss_trace = std::move(trained.loss_trace);

        std::vector<std::size_t> lengths(split.inference.n_chains());
        for (std::size_t c = 0; c < lengths.size(); ++c) {
            lengths[c] = split.inference.chain_length(c);
        }
        auto estimate = [&](const std::vector<double>& terms) {
            return config.estimator == EstimatorMode::Chainwise ? estimate_evidence_chainwise(terms, lengths)
                                                                : estimate_evidence(terms);
        };
        for (double t : temperatures) {
            out.results.push_back(estimate(log_estimator_terms(trained.flow, t, split.inference,
                                                               problem.log_likelihood, problem.log_prior)));
        }
        try {
            out.prior_target = estimate(
                log_estimator_terms(problem.log_prior, split.inference, problem.log_likelihood, problem.log_prior));
        } catch (const NonFiniteError&) {
            // the original estimator overflowing is itself a result; leave it empty
        }
        if (artifacts) {
            artifacts->training = std::move(split.training);
            artifacts->inference = std::move(split.inference);
            artifacts->flow = std::move(trained.flow);
        }
        out.ok = true;
    } catch (const TrainingAborted& e) {
        out.loss_trace = e.loss_trace;
        out.error = e.what();
    } catch (const std::exception& e) {
        out.error = e.what();
    }
    return out;
}

namespace {

Json evidence_json(const EvidenceResult& r, double temperature)
{
    Json j;
    j["log_z"] = r.log_z;
    j["sigma_log_z"] = r.sigma_log_z;
    j["log_rho_hat"] = r.log_rho_hat;
    j["var_rho_hat_log"] = number_or_null(r.var_rho_hat_log);
    j["var_of_var_log"] = number_or_null(r.var_of_var_log);
    j["n_terms"] = r.n_terms;
    j["temperature"] = temperature;
    j["flagged"] = r.flagged;
    j["tail_fraction"] = r.tail_fraction;
    j["top_term_share"] = r.top_term_share;
    return j;
}

Json params_json(const std::vector<std::pair<std::string, double>>& params)
{
    Json j = Json::object();
    for (const auto& [k, v] : params) {
        j[k] = v;
    }
    return j;
}

Json trial_json(const std::string& problem, const std::string& case_name, const TrialOutcome& t)
{
    Json j;
    j["problem"] = problem;
    j["case"] = case_name;
    j["trial"] = t.trial;
    j["seed"] = t.seed;
    j["status"] = t.ok ? "ok" : "failed";
    if (t.ok) {
        j["evidence"] = evidence_json(t.results.front(), t.temperatures.front());
        j["prior_target_evidence"] =
            t.prior_target ? evidence_json(*t.prior_target, 1.0) : Json(nullptr);
        j["acceptance_rate"] = t.acceptance_rate;
        j["n_training_samples"] = t.n_training;
        j["n_inference_samples"] = t.n_inference;
        j["final_loss"] = t.loss_trace.empty() ? Json(nullptr) : number_or_null(t.loss_trace.back());
    } else {
        j["error"] = t.error;
    }
    return j;
}

Json ground_truth_json(const std::optional<GroundTruth>& gt)
{
    if (!gt) {
        return nullptr;
    }
    return {{"log_z", gt->log_z ? Json(*gt->log_z) : Json(nullptr)}, {"source", gt->source}};
}

void summarize(CaseSummary& cs)
{
    std::vector<double> log_z;
    double sigma_sum = 0.0;
    cs.n_failed = 0;
    for (const auto& t : cs.trials) {
        if (!t.ok) {
            ++cs.n_failed;
            continue;
        }
        log_z.push_back(t.results.front().log_z);
        sigma_sum += t.results.front().sigma_log_z;
    }
    if (log_z.empty()) {
        cs.mean_log_z = cs.std_log_z = cs.mean_sigma_log_z = std::nan("");
        return;
    }
    const auto n = static_cast<double>(log_z.size());
    double mean = 0.0;
    for (double v : log_z) {
        mean += v;
    }
    mean /= n;
    double ss = 0.0;
    for (double v : log_z) {
        ss += (v - mean) * (v - mean);
    }
    cs.mean_log_z = mean;
    cs.std_log_z = log_z.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    cs.mean_sigma_log_z = sigma_sum / n;
}

void write_corner_csv(const fs::path& path, const TrialArtifacts& art, double temperature, std::uint64_t seed)
{
    std::ostringstream out;
    const std::size_t D = art.training.dim();
    out << "source";
    for (std::size_t j = 0; j < D; ++j) {
        out << ",coord_" << j;
    }
    out << '\n';
    const std::size_t n = art.training.n_samples();
    const std::size_t stride = std::max<std::size_t>(1, (n + kCornerPoints - 1) / kCornerPoints);
    for (std::size_t r = 0; r < n; r += stride) {
        out << "posterior";
        for (double v : art.training.sample(r)) {
            out << ',' << format_double(v);
        }
        out << '\n';
    }
    for (const auto& x : art.flow.sample(std::min(kCornerPoints, n), temperature, derive_seed(seed, kFlowSampleSeed))) {
        out << "flow";
        for (double v : x) {
            out << ',' << format_double(v);
        }
        out << '\n';
    }
    write_text(path, out.str());
}

std::string loss_csv(const std::vector<double>& trace)
{
    std::ostringstream out;
    out << "epoch,mean_nll\n";
    for (std::size_t e = 0; e < trace.size(); ++e) {
        out << e << ',' << format_double(trace[e]) << '\n';
    }
    return out.str();
}

std::string violin_csv(const CaseSummary& cs)
{
    std::ostringstream out;
    out << "trial,seed,status,log_z,sigma_log_z,log_rho_hat,var_rho_hat_log,var_of_var_log,flagged\n";
    for (const auto& t : cs.trials) {
        out << t.trial << ',' << t.seed << ',' << (t.ok ? "ok" : "failed");
        if (t.ok) {
            const auto& r = t.results.front();
            out << ',' << format_double(r.log_z) << ',' << format_double(r.sigma_log_z) << ','
                << format_double(r.log_rho_hat) << ',' << format_double(r.var_rho_hat_log) << ','
                << format_double(r.var_of_var_log) << ',' << (r.flagged ? 1 : 0);
        } else {
            out << ",,,,,,";
        }
        out << '\n';
    }
    return out.str();
}

std::string trial_stem(std::size_t trial)
{
    std::string s = std::to_string(trial);
    return std::string(s.size() < 3 ? 3 - s.size() : 0, '0') + s;
}

void prepare_output_dir(const std::string& dir)
{
    if (dir.empty()) {
        return;
    }
    std::error_code ec;
    fs::create_directories(dir, ec);
    const auto probe = fs::path(dir) / ".lhm_write_probe";
    std::ofstream out(probe);
    if (ec || !out) {
        throw ConfigError("output directory '" + dir + "' is not writable");
    }
    out.close();
    fs::remove(probe, ec);
}

} // namespace

std::string evidence_to_json(const EvidenceResult& result, double temperature)
{
    return evidence_json(result, temperature).dump(2);
}

ExperimentSummary run_experiment(const ExperimentConfig& config)
{
    config.validate();
    prepare_output_dir(config.output_dir);
    auto cases = build_cases(config);

    ExperimentSummary summary;
    summary.problem = config.problem;
    summary.cases.resize(cases.size());
    std::vector<TrialArtifacts> first_artifacts(cases.size());
    for (std::size_t c = 0; c < cases.size(); ++c) {
        summary.cases[c].name = cases[c].name;
        summary.cases[c].params = cases[c].params;
        summary.cases[c].ground_truth = cases[c].problem.ground_truth;
        summary.cases[c].trials.resize(config.n_trials);
    }

    const std::size_t n_tasks = cases.size() * config.n_trials;
    std::atomic<std::size_t> next{0};
    const double temps[] = {config.temperature};
    auto worker = [&] {
        for (std::size_t task = next++; task < n_tasks; task = next++) {
            const std::size_t c = task / config.n_trials;
            const std::size_t t = task % config.n_trials;
            auto outcome = run_trial(cases[c].problem, config, config.seed + t, temps,
                                     t == 0 ? &first_artifacts[c] : nullptr);
            outcome.trial = t;
            summary.cases[c].trials[t] = std::move(outcome);
        }
    };
    const std::size_t n_threads = std::min(config.jobs, n_tasks);
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t i = 0; i < n_threads; ++i) {
            pool.emplace_back(worker);
        }
    }

    for (auto& cs : summary.cases) {
        summarize(cs);
        summary.n_failed += cs.n_failed;
    }

    if (!config.output_dir.empty()) {
        const fs::path root(config.output_dir);
        for (std::size_t c = 0; c < cases.size(); ++c) {
            const auto& cs = summary.cases[c];
            const auto dir = root / cs.name;
            fs::create_directories(dir);
            for (const auto& t : cs.trials) {
                const auto stem = trial_stem(t.trial);
                write_text(dir / ("trial_" + stem + ".json"), trial_json(config.problem, cs.name, t).dump(2) + "\n");
                write_text(dir / ("loss_trial_" + stem + ".csv"), loss_csv(t.loss_trace));
            }
            if (cs.trials.front().ok) {
                const auto& art = first_artifacts[c];
                save_flow((dir / "flow_trial_000.json").string(), art.flow);
                write_corner_csv(dir / "corner.csv", art, config.temperature, cs.trials.front().seed);
            }
            write_text(dir / "violin.csv", violin_csv(cs));
        }
        write_text(root / "summary.json", summary_to_json(summary) + "\n");
        write_text(root / "config.json", experiment_config_to_json(config) + "\n");
    }
    return summary;
}

std::string summary_to_json(const ExperimentSummary& summary)
{
    Json j;
    j["problem"] = summary.problem;
    j["n_failed"] = summary.n_failed;
    Json cases = Json::array();
    for (const auto& cs : summary.cases) {
        Json jc;
        jc["name"] = cs.name;
        jc["params"] = params_json(cs.params);
        jc["ground_truth"] = ground_truth_json(cs.ground_truth);
        jc["n_trials"] = cs.trials.size();
        jc["n_failed"] = cs.n_failed;
        jc["mean_log_z"] = number_or_null(cs.mean_log_z);
        jc["std_log_z"] = number_or_null(cs.std_log_z);
        jc["mean_sigma_log_z"] = number_or_null(cs.mean_sigma_log_z);
        Json trials = Json::array();
        for (const auto& t : cs.trials) {
            trials.push_back(t.ok ? Json(t.results.front().log_z) : Json(nullptr));
        }
        jc["log_z"] = std::move(trials);
        cases.push_back(std::move(jc));
    }
    j["cases"] = std::move(cases);
    return j.dump(2);
}

BayesFactorReport run_bayes_factor(const ExperimentConfig& first, const ExperimentConfig& second)
{
    first.validate();
    second.validate();
    if (first.problem == "normal_gamma" && first.tau0.size() != 1) {
        throw ConfigError("bayes-factor: each experiment must have exactly one case");
    }
    if (second.problem == "normal_gamma" && second.tau0.size() != 1) {
        throw ConfigError("bayes-factor: each experiment must have exactly one case");
    }
    prepare_output_dir(first.output_dir);
    const auto s1 = run_experiment(first);
    const auto s2 = run_experiment(second);
    const auto& c1 = s1.cases.front();
    const auto& c2 = s2.cases.front();

    BayesFactorReport report;
    report.first = c1.name;
    report.second = c2.name;
    report.n_failed = s1.n_failed + s2.n_failed;
    const std::size_t n = std::min(c1.trials.size(), c2.trials.size());
    for (std::size_t t = 0; t < n; ++t) {
        if (c1.trials[t].ok && c2.trials[t].ok) {
            report.per_trial.push_back(log_bayes_factor(c1.trials[t].results.front(), c2.trials[t].results.front()));
        }
    }
    if (!report.per_trial.empty()) {
        const auto m = static_cast<double>(report.per_trial.size());
        double sum = 0.0;
        double sigma = 0.0;
        for (const auto& bf : report.per_trial) {
            sum += bf.log_bf;
            sigma += bf.sigma;
        }
        report.log_bf = sum / m;
        report.sigma = sigma / m;
        double ss = 0.0;
        for (const auto& bf : report.per_trial) {
            ss += (bf.log_bf - report.log_bf) * (bf.log_bf - report.log_bf);
        }
        report.empirical_std = report.per_trial.size() > 1 ? std::sqrt(ss / (m - 1.0)) : 0.0;
    } else {
        report.log_bf = report.sigma = report.empirical_std = std::nan("");
    }
    if (report.first == "pima_m1" && report.second == "pima_m2") {
        report.published_log_bf = kPimaPublishedLogBayesFactor;
    } else if (report.first == "pima_m2" && report.second == "pima_m1") {
        report.published_log_bf = -kPimaPublishedLogBayesFactor;
    }
    if (!first.output_dir.empty()) {
        write_text(fs::path(first.output_dir) / "bayes_factor.json", bayes_factor_to_json(report) + "\n");
    }
    return report;
}

std::string bayes_factor_to_json(const BayesFactorReport& report)
{
    Json j;
    j["first"] = report.first;
    j["second"] = report.second;
    j["log_bf"] = number_or_null(report.log_bf);
    j["sigma"] = number_or_null(report.sigma);
    j["bf"] = number_or_null(std::exp(report.log_bf));
    j["empirical_std"] = number_or_null(report.empirical_std);
    j["n_failed"] = report.n_failed;
    Json trials = Json::array();
    for (const auto& bf : report.per_trial) {
        trials.push_back({{"log_bf", bf.log_bf}, {"sigma", bf.sigma}});
    }
    j["trials"] = std::move(trials);
    j["published_log_bf"] = report.published_log_bf ? Json(*report.published_log_bf) : Json(nullptr);
    return j.dump(2);
}

std::string regen_ground_truth(const ExperimentConfig& config)
{
    Json out = Json::array();
    for (const auto& c : build_cases(config)) {
        Json j;
        j["problem"] = config.problem;
        j["case"] = c.name;
        j["params"] = params_json(c.params);
        const auto& gt = c.problem.ground_truth;
        j["log_z"] = gt && gt->log_z ? Json(*gt->log_z) : Json(nullptr);
        j["source"] = gt ? gt->source : "none";
        if (config.problem == "pima_m1" || config.problem == "pima_m2") {
            j["published_log_bf12"] = kPimaPublishedLogBayesFactor;
        }
        out.push_back(std::move(j));
    }
    if (!config.output_dir.empty()) {
        prepare_output_dir(config.output_dir);
        write_text(fs::path(config.output_dir) / "ground_truth.json", out.dump(2) + "\n");
    }
    return out.dump(2);
}

} // namespace lhm
