#include "otmtr/cli.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <map>
#include <set>
#include <thread>

#include "CLI11.hpp"
#include "otmtr/baselines.hpp"
#include "otmtr/bench.hpp"
#include "otmtr/io.hpp"
#include "otmtr/metrics.hpp"
#include "otmtr/solver.hpp"

namespace otmtr::cli {

namespace {

using io::Json;

[[noreturn]] void config_error(const std::string& what) {
    throw Error(ErrorCode::InvalidParameter, what);
}

Json load_config(const RunConfig& config) {
    if (!config.config) return Json::object();
    Json j = io::read_json(*config.config);
    if (!j.is_object()) config_error(config.config->string() + ": expected a JSON object");
    return j;
}

// Removes and returns an optional boolean entry shared by several commands.
bool take_flag(Json& j, const char* key, bool fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_boolean()) config_error(std::string("'") + key + "' must be true or false");
    const bool value = j.at(key).get<bool>();
    j.erase(key);
    return value;
}

void check_keys(const Json& j, const std::set<std::string>& allowed, const std::string& section) {
    for (const auto& item : j.items())
        if (!allowed.count(item.key())) config_error(section + ": unknown key '" + item.key() + "'");
}

double number_or(const Json& j, const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number()) config_error(std::string("'") + key + "' must be a number");
    return j.at(key).get<double>();
}

MultiTaskProblem scaled(const MultiTaskProblem& problem, double scale) {
    MultiTaskProblem out = problem;
    for (auto& x : out.designs) x *= scale;
    return out;
}

Json matrix_summary(const Matrix& m) {
    return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"nonzeros", (m.array() != 0.0).count()}};
}

}  // namespace

int resolve_threads(const std::optional<int>& flag, const std::optional<int>& fallback) {
    auto check = [](int n, const std::string& source) {
        if (n < 1) config_error(source + ": thread count must be >= 1");
        return n;
    };
    if (flag) return check(*flag, "--threads");
    if (const char* env = std::getenv("OTMTR_THREADS"); env && *env) {
        char* end = nullptr;
        const long n = std::strtol(env, &end, 10);
        if (*end != '\0') config_error("OTMTR_THREADS is not an integer");
        return check(static_cast<int>(n), "OTMTR_THREADS");
    }
    if (fallback) return check(*fallback, "config");
    return std::max(1u, std::thread::hardware_concurrency());
}

int cmd_simulate(const RunConfig& config) {
    simulate::GridScenario scenario;
    io::apply(load_config(config), scenario);
    if (config.seed) scenario.seed = *config.seed;
    if (config.overlap) scenario.overlap = *config.overlap;
    if (config.count < 1) config_error("--count must be >= 1");
    if (config.out_dir.empty()) config_error("--out is required");
    for (int k = 0; k < config.count; ++k) {
        simulate::GridScenario s = scenario;
        s.seed = scenario.seed + static_cast<std::uint64_t>(k);
        const fs::path dir =
            config.count == 1 ? config.out_dir : config.out_dir / ("seed_" + std::to_string(s.seed));
        io::save_truth(dir, simulate::make_truth(s), s);
    }
    return kOk;
}

int cmd_fit(const RunConfig& config) {
    if (config.models.size() != 1) config_error("fit needs exactly one --model");
    if (config.out_dir.empty()) config_error("--out is required");
    const bench::Model model = bench::parse_model(config.models.front());
    const MultiTaskProblem original = io::load_problem(config.problem_dir);
    Json j = load_config(config);
    const bool normalize = take_flag(j, "normalize_design", false);
    const double scale = normalize ? bench::design_scale(original) : 1.0;
    const MultiTaskProblem problem = normalize ? scaled(original, scale) : original;
    const Index T = problem.n_tasks();

    Json report;
    report["model"] = bench::model_name(model);
    report["design_scale"] = scale;
    Matrix theta;
    bool converged = true;
    fs::create_directories(config.out_dir);

    switch (model) {
        case bench::Model::Mtw: {
            MtwHyperparams params;
            io::apply(j, params);
            if (config.mu) params.mu = *config.mu;
            if (config.lambda) params.lambda = *config.lambda;
            validate_hyperparams(params);
            const MtwModel mtw =
                MtwModel::build(problem, io::load_metric(config.problem_dir, problem.n_features()), params);
            const FitReport fit_report = fit(mtw);
            theta = fit_report.coefficients;
            converged = fit_report.converged;
            report["hyperparams"] = io::to_json(mtw.params);
            report["fit"] = io::to_json(fit_report);
            io::write_csv(config.out_dir / "barycenter.csv", fit_report.barycenter_pos);
            break;
        }
        case bench::Model::Lasso: {
            check_keys(j, {"lambda", "max_iter", "tol", "positive"}, "lasso");
            const double lambda = config.lambda ? *config.lambda : number_or(j, "lambda", -1.0);
            if (!(lambda >= 0.0)) config_error("lasso needs lambda >= 0 (--lambda or config)");
            const int max_iter = static_cast<int>(number_or(j, "max_iter", 10000));
            const double tol = number_or(j, "tol", 1e-8);
            const bool positive = take_flag(j, "positive", false);
            theta = Matrix::Zero(problem.n_features(), T);
            Json tasks = Json::array();
            for (Index t = 0; t < T; ++t) {
                const auto k = static_cast<std::size_t>(t);
                const auto r = baselines::fit_lasso(problem.designs[k], problem.targets[k], lambda,
                                                    max_iter, tol, positive);
                theta.col(t) = r.coefficients;
                converged = converged && r.converged;
                tasks.push_back({{"converged", r.converged},
                                 {"iterations", r.iterations},
                                 {"objective_trace", r.objective_trace}});
            }
            report["lambda"] = lambda;
            report["positive"] = positive;
            report["tasks"] = tasks;
            break;
        }
        case bench::Model::Dirty:
        case bench::Model::GroupLasso: {
            const bool dirty = model == bench::Model::Dirty;
            check_keys(j, dirty ? std::set<std::string>{"mu", "lambda", "max_iter", "tol"}
                                : std::set<std::string>{"mu", "max_iter", "tol"},
                       bench::model_name(model));
            const double mu = config.mu ? *config.mu : number_or(j, "mu", -1.0);
            const double lambda = config.lambda ? *config.lambda : number_or(j, "lambda", -1.0);
            const int max_iter = static_cast<int>(number_or(j, "max_iter", 10000));
            const double tol = number_or(j, "tol", 1e-8);
            const baselines::DirtyResult r =
                dirty ? baselines::fit_dirty(problem, {mu, lambda}, max_iter, tol)
                      : baselines::fit_group_lasso(problem, mu, max_iter, tol);
            theta = r.coefficients();
            converged = r.converged;
            report["mu"] = mu;
            if (dirty) report["lambda"] = lambda;
            report["fit"] = {{"converged", r.converged},
                             {"iterations", r.iterations},
                             {"objective_trace", r.objective_trace}};
            io::write_csv(config.out_dir / "common.csv", r.common * scale);
            if (dirty) io::write_csv(config.out_dir / "specific.csv", r.specific * scale);
            break;
        }
    }
    theta *= scale;
    report["converged"] = converged;
    report["theta"] = matrix_summary(theta);
    if (const auto truth = io::load_truth(config.problem_dir);
        truth && truth->rows() == theta.rows() && truth->cols() == theta.cols()) {
        const auto eval = metrics::evaluate(theta, *truth);
        report["evaluation"] = {{"auc_pr", eval.auc_pr}, {"mean_auc_pr", eval.mean_auc_pr},
                                {"mse", eval.mse}, {"support_f1", eval.support_f1}};
    }
    io::write_csv(config.out_dir / "theta.csv", theta);
    io::write_json(config.out_dir / "report.json", report);
    return converged ? kOk : kNotConverged;
}

int cmd_sweep(const RunConfig& config) {
    if (config.out_dir.empty()) config_error("--out is required");
    bench::GridOptions options = bench::default_grid();
    io::apply(load_config(config), options);
    std::vector<bench::Model> models;
    for (const auto& name : config.models) models.push_back(bench::parse_model(name));
    if (models.empty())
        models = {bench::Model::Lasso, bench::Model::Dirty, bench::Model::GroupLasso, bench::Model::Mtw};

    const MultiTaskProblem problem = io::load_problem(config.problem_dir);
    const std::optional<Matrix> truth = io::load_truth(config.problem_dir);
    if (truth && (truth->rows() != problem.n_features() || truth->cols() != problem.n_tasks()))
        throw Error(ErrorCode::ShapeMismatch, "truth.csv must be p x T");
    bool needs_metric = false;
    for (auto m : models) needs_metric = needs_metric || m == bench::Model::Mtw;
    // Models other than MTW never read the metric; a 1-feature placeholder stands in.
    const GroundMetric metric = needs_metric
                                    ? io::load_metric(config.problem_dir, problem.n_features())
                                    : GroundMetric::grid2d(1, 1);

    std::vector<bench::SweepResult> results(models.size());
    bench::parallel_for(models.size(), resolve_threads(config.threads), [&](std::size_t i) {
        results[i] = truth ? bench::sweep_auc(models[i], problem, metric, *truth, options)
                           : bench::sweep_cv(models[i], problem, metric, options, config.folds);
    });

    fs::create_directories(config.out_dir);
    Json board;
    board["scoring"] = truth ? "auc_pr" : "cv_mse";
    board["design_scale"] = options.normalize_design ? bench::design_scale(problem) : 1.0;
    board["models"] = Json::array();
    bool best_converged = true;
    for (const auto& r : results) {
        Json points = Json::array();
        for (std::size_t k = 0; k < r.points.size(); ++k)
            points.push_back({{"mu", r.points[k].mu},
                              {"lambda", r.points[k].lambda},
                              {"score", r.scores[k]},
                              {"converged", static_cast<bool>(r.converged[k])}});
        const auto& best = r.points[r.best];
        board["models"].push_back({{"model", bench::model_name(r.model)},
                                   {"n_points", r.points.size()},
                                   {"n_not_converged", r.n_not_converged},
                                   {"best", {{"mu", best.mu},
                                             {"lambda", best.lambda},
                                             {"score", r.scores[r.best]},
                                             {"converged", static_cast<bool>(r.converged[r.best])}}},
                                   {"points", points}});
        best_converged = best_converged && r.converged[r.best];
        io::write_csv(config.out_dir / (std::string("theta_") + bench::model_name(r.model) + ".csv"),
                      r.best_coefficients);
    }
    io::write_json(config.out_dir / "leaderboard.json", board);
    for (const auto& r : results)
        std::printf("%-10s best %s %.6f at mu=%.6g lambda=%.6g\n", bench::model_name(r.model),
                    truth ? "auc" : "cv-mse", r.scores[r.best], r.points[r.best].mu,
                    r.points[r.best].lambda);
    return best_converged ? kOk : kNotConverged;
}

int cmd_bench(const RunConfig& config) {
    if (config.out_dir.empty()) config_error("--out is required");
    bench::BenchConfig bench_config = config.smoke ? bench::smoke_config() : bench::BenchConfig{};
    const Json j = load_config(config);
    io::apply(j, bench_config);
    if (config.n_seeds) bench_config.n_seeds = *config.n_seeds;
    if (config.seed) bench_config.master_seed = *config.seed;
    std::optional<int> config_threads;
    if (j.contains("threads")) config_threads = bench_config.threads;
    bench_config.threads = resolve_threads(config.threads, config_threads);
    bench::validate_bench(bench_config);

    const auto start = std::chrono::steady_clock::now();
    const auto rows = bench::run_bench(bench_config);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    fs::create_directories(config.out_dir);
    io::write_text(config.out_dir / "bench.csv", bench::bench_csv(rows));

    // Mean AUC per (model, overlap), in the configured orders.
    std::map<std::pair<std::string, std::size_t>, std::pair<double, int>> sums;
    int not_converged = 0;
    for (const auto& row : rows) {
        std::size_t o = 0;
        while (bench_config.overlaps[o] != row.overlap) ++o;
        auto& s = sums[{bench::model_name(row.model), o}];
        s.first += row.auc;
        s.second += 1;
        not_converged += row.n_not_converged;
    }
    Json means = Json::object();
    std::printf("%-10s", "overlap");
    for (double o : bench_config.overlaps) std::printf(" %8.2f", o);
    std::printf("\n");
    for (auto m : bench_config.models) {
        const std::string name = bench::model_name(m);
        Json per = Json::array();
        std::printf("%-10s", name.c_str());
        for (std::size_t o = 0; o < bench_config.overlaps.size(); ++o) {
            const auto& s = sums[{name, o}];
            per.push_back(s.first / s.second);
            std::printf(" %8.4f", s.first / s.second);
        }
        std::printf("\n");
        means[name] = per;
    }
    Json summary;
    summary["overlaps"] = bench_config.overlaps;
    summary["n_seeds"] = bench_config.n_seeds;
    summary["master_seed"] = bench_config.master_seed;
    summary["scenario"] = io::to_json(bench_config.scenario);
    summary["mean_auc_pr"] = means;
    summary["n_not_converged"] = not_converged;
    summary["seconds"] = seconds;
    summary["threads"] = bench_config.threads;
    io::write_json(config.out_dir / "summary.json", summary);
    return kOk;
}

int run(int argc, const char* const* argv) {
    CLI::App app{"Multi-task sparse regression with an optimal-transport coupling between tasks"};
    app.require_subcommand(1);
    RunConfig config;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", config.config, "JSON config file");
        sub->add_option("--out", config.out_dir, "Output directory")->required();
        sub->add_option("--threads", config.threads, "Worker threads (default: OTMTR_THREADS or all cores)");
    };

    CLI::App* sim = app.add_subcommand("simulate", "Write a synthetic grid problem with its ground truth");
    common(sim);
    sim->add_option("--seed", config.seed, "Scenario seed");
    sim->add_option("--overlap", config.overlap, "Fraction of shared support positions");
    sim->add_option("--count", config.count, "Number of consecutive seeds (one seed_<s>/ directory each)");

    CLI::App* fit_cmd = app.add_subcommand("fit", "Fit one model at fixed hyperparameters");
    common(fit_cmd);
    fit_cmd->add_option("--problem", config.problem_dir, "Problem directory (X_t.csv, Y_t.csv)")->required();
    fit_cmd->add_option("--model", config.models, "mtw | lasso | dirty | grouplasso")->required()->expected(1);
    fit_cmd->add_option("--mu", config.mu, "Overrides mu from the config");
    fit_cmd->add_option("--lambda", config.lambda, "Overrides lambda from the config");

    CLI::App* sweep = app.add_subcommand("sweep", "Select hyperparameters over each model's grid");
    common(sweep);
    sweep->add_option("--problem", config.problem_dir, "Problem directory")->required();
    sweep->add_option("--model", config.models, "Models to sweep (default: all)");
    sweep->add_option("--folds", config.folds, "Cross-validation folds when there is no truth.csv");

    CLI::App* bench_cmd = app.add_subcommand("bench", "Synthetic benchmark over overlaps and seeds");
    common(bench_cmd);
    bench_cmd->add_option("--seed", config.seed, "Master seed");
    bench_cmd->add_option("--seeds", config.n_seeds, "Seeds per overlap level");
    bench_cmd->add_flag("--smoke", config.smoke, "8x8 grid, 2x2 pooling, 5 seeds");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    CLI::App* chosen = app.get_subcommands().front();
    config.command = chosen->get_name();
    try {
        if (config.command == "simulate") return cmd_simulate(config);
        if (config.command == "fit") return cmd_fit(config);
        if (config.command == "sweep") return cmd_sweep(config);
        return cmd_bench(config);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "otmtr %s: error: %s\n", config.command.c_str(), e.what());
        std::fprintf(stderr, "Run 'otmtr %s --help' for usage.\n", config.command.c_str());
        return kConfigError;
    }
}

}  // namespace otmtr::cli
