#include "otmtr/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <thread>

#include "otmtr/baselines.hpp"
#include "otmtr/metrics.hpp"
#include "otmtr/solver.hpp"

namespace otmtr::bench {

const char* model_name(Model model) {
    switch (model) {
        case Model::Lasso: return "lasso";
        case Model::Mtw: return "mtw";
        case Model::Dirty: return "dirty";
        case Model::GroupLasso: return "grouplasso";
    }
    return "unknown";
}

Model parse_model(const std::string& name) {
    for (Model m : {Model::Lasso, Model::Mtw, Model::Dirty, Model::GroupLasso})
        if (name == model_name(m)) return m;
    throw Error(ErrorCode::InvalidParameter, "unknown model '" + name + "'");
}

GridOptions default_grid() {
    GridOptions options;
    options.mtw.positive = true;
    return options;
}

GroundMetric scenario_metric(const simulate::GridScenario& scenario) {
    return GroundMetric::grid2d(scenario.height, scenario.width).normalized();
}

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
    const std::size_t workers =
        std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, threads)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

namespace {

PathFit lasso_path(const MultiTaskProblem& problem, const GridOptions& options) {
    const double top = baselines::lasso_lambda_max(problem);
    PathFit path;
    if (!(top > 0.0)) throw Error(ErrorCode::DegenerateMass, "X^T Y is zero, no Lasso path");
    const Index T = problem.n_tasks();
    Matrix coef = Matrix::Zero(problem.n_features(), T);
    for (double lambda : baselines::log_grid(top, top * options.lambda_ratio, options.n_lambda)) {
        bool ok = true;
        for (Index t = 0; t < T; ++t) {
            const auto k = static_cast<std::size_t>(t);
            const Vector init = coef.col(t);
            auto fit = baselines::fit_lasso(problem.designs[k], problem.targets[k], lambda,
                                            options.max_iter, options.tol, false, &init);
            coef.col(t) = fit.coefficients;
            ok = ok && fit.converged;
        }
        path.points.push_back({0.0, lambda});
        path.coefficients.push_back(coef);
        path.converged.push_back(ok);
    }
    return path;
}

PathFit mtw_path(const MultiTaskProblem& problem, const GroundMetric& metric,
                 const GridOptions& options) {
    const double top = baselines::lasso_lambda_max(problem);
    if (!(top > 0.0)) throw Error(ErrorCode::DegenerateMass, "X^T Y is zero, no lambda path");
    const auto lambdas = baselines::log_grid(top, top * options.lambda_ratio, options.n_lambda);
    const auto mus = baselines::log_grid(options.mu_high, options.mu_low, options.n_mu);
    PathFit path;
    for (double mu : mus) {
        MtwHyperparams params = options.mtw;
        params.mu = mu;
        params.lambda = lambdas.front();
        MtwModel model = MtwModel::build(problem, metric, params);
        SolverState state = initial_state(model);
        model.params.gamma = state.gamma_pos;
        for (double lambda : lambdas) {
            model.params.lambda = lambda;
            SolverState next;
            FitReport report = fit(model, &state, &next);
            state = std::move(next);
            path.points.push_back({mu, lambda});
            path.coefficients.push_back(report.coefficients);
            path.converged.push_back(report.converged);
        }
    }
    return path;
}

PathFit dirty_path(const MultiTaskProblem& problem, const GridOptions& options) {
    PathFit path;
    for (const auto& [mu, lambda] :
         baselines::dirty_grid(problem, options.dirty_base, options.dirty_depth)) {
        auto fit = baselines::fit_dirty(problem, {mu, lambda}, options.max_iter, options.tol);
        path.points.push_back({mu, lambda});
        path.coefficients.push_back(fit.coefficients());
        path.converged.push_back(fit.converged);
    }
    return path;
}

PathFit group_path(const MultiTaskProblem& problem, const GridOptions& options) {
    const double top = baselines::dirty_bounds(problem).mu_max;
    if (!(top > 0.0)) throw Error(ErrorCode::DegenerateMass, "X^T Y is zero, no group path");
    PathFit path;
    for (double mu : baselines::log_grid(top, top * options.lambda_ratio, options.n_group)) {
        auto fit = baselines::fit_group_lasso(problem, mu, options.max_iter, options.tol);
        path.points.push_back({mu, 0.0});
        path.coefficients.push_back(fit.coefficients());
        path.converged.push_back(fit.converged);
    }
    return path;
}

std::size_t best_index(const std::vector<double>& scores, bool higher_is_better) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i) {
        const bool better = higher_is_better ? scores[i] > scores[best] : scores[i] < scores[best];
        if (better) best = i;
    }
    return best;
}

MultiTaskProblem row_subset(const MultiTaskProblem& problem, const std::vector<Index>& rows) {
    MultiTaskProblem sub;
    const Index m = static_cast<Index>(rows.size());
    for (std::size_t t = 0; t < problem.designs.size(); ++t) {
        Matrix x(m, problem.n_features());
        Vector y(m);
        for (Index i = 0; i < m; ++i) {
            x.row(i) = problem.designs[t].row(rows[static_cast<std::size_t>(i)]);
            y[i] = problem.targets[t][rows[static_cast<std::size_t>(i)]];
        }
        sub.designs.push_back(std::move(x));
        sub.targets.push_back(std::move(y));
    }
    return sub;
}

}  // namespace

double design_scale(const MultiTaskProblem& problem) {
    double total = 0.0;
    for (const auto& x : problem.designs) total += x.squaredNorm();
    const double mean = total / static_cast<double>(problem.n_tasks() * problem.n_features());
    if (!(mean > 0.0)) return 1.0;
    return std::sqrt(static_cast<double>(problem.n_samples()) / mean);
}

void validate_grid(const GridOptions& o) {
    auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidParameter, what); };
    if (o.n_lambda < 1 || o.n_mu < 1 || o.dirty_base < 1 || o.dirty_depth < 1 || o.n_group < 1)
        fail("grid sizes must be >= 1");
    if (!(o.lambda_ratio > 0.0 && o.lambda_ratio <= 1.0)) fail("lambda_ratio must lie in (0, 1]");
    if (!(o.mu_low > 0.0 && o.mu_low <= o.mu_high) || !std::isfinite(o.mu_high))
        fail("need 0 < mu_low <= mu_high");
    if (o.max_iter < 1 || !(o.tol > 0.0)) fail("max_iter must be >= 1 and tol > 0");
    validate_hyperparams(o.mtw);
}

PathFit fit_path(Model model, const MultiTaskProblem& problem, const GroundMetric& metric,
                 const GridOptions& options) {
    validate_problem(problem);
    validate_grid(options);
    MultiTaskProblem scaled;
    double scale = 1.0;
    if (options.normalize_design) {
        scale = design_scale(problem);
        scaled = problem;
        for (auto& x : scaled.designs) x *= scale;
    }
    const MultiTaskProblem& work = options.normalize_design ? scaled : problem;
    PathFit path;
    switch (model) {
        case Model::Lasso: path = lasso_path(work, options); break;
        case Model::Mtw: path = mtw_path(work, metric, options); break;
        case Model::Dirty: path = dirty_path(work, options); break;
        case Model::GroupLasso: path = group_path(work, options); break;
    }
    // X theta = (c X)(theta / c): coefficients of the scaled problem are c times the originals.
    if (scale != 1.0)
        for (auto& c : path.coefficients) c *= scale;
    return path;
}

SweepResult sweep_auc(Model model, const MultiTaskProblem& problem, const GroundMetric& metric,
                      const Matrix& truth, const GridOptions& options) {
    if (truth.rows() != problem.n_features() || truth.cols() != problem.n_tasks())
        throw Error(ErrorCode::ShapeMismatch, "truth must be p x T");
    PathFit path = fit_path(model, problem, metric, options);
    SweepResult result;
    result.model = model;
    result.points = path.points;
    result.converged = path.converged;
    for (std::size_t i = 0; i < path.coefficients.size(); ++i) {
        result.scores.push_back(metrics::evaluate(path.coefficients[i], truth).mean_auc_pr);
        if (!path.converged[i]) ++result.n_not_converged;
    }
    result.best = best_index(result.scores, true);
    result.best_coefficients = path.coefficients[result.best];
    return result;
}

SweepResult sweep_cv(Model model, const MultiTaskProblem& problem, const GroundMetric& metric,
                     const GridOptions& options, int folds) {
    validate_problem(problem);
    const Index n = problem.n_samples();
    if (folds < 2 || folds > n)
        throw Error(ErrorCode::InvalidParameter, "folds must lie in [2, n]");
    std::vector<double> total;
    SweepResult result;
    result.model = model;
    result.higher_is_better = false;
    for (int f = 0; f < folds; ++f) {
        const Index lo = n * f / folds, hi = n * (f + 1) / folds;
        std::vector<Index> train, test;
        for (Index i = 0; i < n; ++i) (i >= lo && i < hi ? test : train).push_back(i);
        const MultiTaskProblem train_problem = row_subset(problem, train);
        const MultiTaskProblem test_problem = row_subset(problem, test);
        PathFit path = fit_path(model, train_problem, metric, options);
        if (total.empty()) {
            total.assign(path.points.size(), 0.0);
            result.points = path.points;
        }
        for (std::size_t i = 0; i < path.coefficients.size(); ++i) {
            double err = 0.0;
            for (Index t = 0; t < problem.n_tasks(); ++t) {
                const auto k = static_cast<std::size_t>(t);
                err += (test_problem.designs[k] * path.coefficients[i].col(t) - test_problem.targets[k])
                           .squaredNorm();
            }
            total[i] += err / static_cast<double>(n * problem.n_tasks());
            if (!path.converged[i]) ++result.n_not_converged;
        }
    }
    result.scores = total;
    result.best = best_index(result.scores, false);
    // Refit the chosen point's path on all samples.
    PathFit full = fit_path(model, problem, metric, options);
    result.converged = full.converged;
    for (bool ok : full.converged)
        if (!ok) ++result.n_not_converged;
    result.best_coefficients = full.coefficients[result.best];
    return result;
}

BenchConfig smoke_config() {
    BenchConfig config;
    config.scenario.height = 8;
    config.scenario.width = 8;
    config.scenario.pool_height = 2;
    config.scenario.pool_width = 2;
    config.n_seeds = 5;
    return config;
}

void validate_bench(const BenchConfig& config) {
    if (config.overlaps.empty() || config.n_seeds < 1 || config.models.empty())
        throw Error(ErrorCode::InvalidParameter, "empty benchmark grid");
    for (double o : config.overlaps)
        if (!(o >= 0.0 && o <= 1.0)) throw Error(ErrorCode::InvalidParameter, "overlaps must lie in [0, 1]");
    if (config.threads < 1) throw Error(ErrorCode::InvalidParameter, "threads must be >= 1");
    simulate::validate_scenario(config.scenario);
    validate_grid(config.grid);
}

std::vector<BenchRow> run_bench(const BenchConfig& config) {
    validate_bench(config);
    const std::size_t n_models = config.models.size();
    const std::size_t n_cells = config.overlaps.size() * static_cast<std::size_t>(config.n_seeds);
    std::vector<BenchRow> rows(n_cells * n_models);
    const GroundMetric metric = scenario_metric(config.scenario);
    parallel_for(n_cells, config.threads, [&](std::size_t cell) {
        const std::size_t o = cell / static_cast<std::size_t>(config.n_seeds);
        const int seed = static_cast<int>(cell % static_cast<std::size_t>(config.n_seeds));
        simulate::GridScenario scenario = config.scenario;
        scenario.overlap = config.overlaps[o];
        scenario.seed = derive_seed(config.master_seed, {o, static_cast<std::uint64_t>(seed)});
        const simulate::GroundTruth truth = simulate::make_truth(scenario);
        const MultiTaskProblem problem = truth.problem();
        for (std::size_t m = 0; m < n_models; ++m) {
            const SweepResult sweep =
                sweep_auc(config.models[m], problem, metric, truth.coefficients, config.grid);
            rows[cell * n_models + m] = BenchRow{config.models[m], config.overlaps[o], seed,
                                                 sweep.scores[sweep.best], sweep.n_not_converged};
        }
    });
    return rows;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
    std::string out = "model,overlap,seed,auc\n";
    char buffer[128];
    for (const auto& row : rows) {
        std::snprintf(buffer, sizeof buffer, "%s,%.17g,%d,%.17g\n", model_name(row.model),
                      row.overlap, row.seed, row.auc);
        out += buffer;
    }
    return out;
}

}  // namespace otmtr::bench
