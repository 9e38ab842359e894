#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "otmtr/core.hpp"
#include "otmtr/simulate.hpp"

// Hyperparameter paths, sweeps and the synthetic benchmark driver behind the CLI.
namespace otmtr::bench {

enum class Model { Lasso, Mtw, Dirty, GroupLasso };

const char* model_name(Model model);
/// Accepts "lasso", "mtw", "dirty", "grouplasso". Throws Error{InvalidParameter}.
Model parse_model(const std::string& name);

struct GridOptions {
    int n_lambda = 20;            // Lasso grid, lambda_max down to lambda_max * lambda_ratio
    double lambda_ratio = 0.01;
    int n_mu = 10;                // MTW mu grid, log-spaced in [mu_low, mu_high]
    double mu_low = 1.0;
    double mu_high = 100.0;
    int dirty_base = 5;
    int dirty_depth = 10;
    int n_group = 20;             // group Lasso, mu_max down to mu_max / 100
    MtwHyperparams mtw;           // template for every MTW fit (mu and lambda are overwritten)
    int max_iter = 10000;         // Lasso / Dirty sweeps
    double tol = 1e-6;
    /// Fit on designs rescaled by one global factor so that the mean squared column norm is n;
    /// returned coefficients are mapped back to the original units.
    bool normalize_design = true;
};

/// Throws Error{InvalidParameter} for empty grids or out-of-range values.
void validate_grid(const GridOptions& options);

/// Default template for sweeps: nonnegative MTW, auto epsilon and gamma.
GridOptions default_grid();

struct GridPoint {
    double mu = 0.0;      // unused (0) for the Lasso
    double lambda = 0.0;  // unused (0) for the group Lasso
};

struct PathFit {
    std::vector<GridPoint> points;
    std::vector<Matrix> coefficients;  // p x T per point
    std::vector<bool> converged;
};

/// Global factor c with mean_j ||c X_j||^2 = n over all tasks (1 for an all-zero design).
double design_scale(const MultiTaskProblem& problem);

/// Fits every grid point of a model. MTW and Lasso paths run from large to small lambda
/// with warm starts; the MTW gamma is resolved once per path and held fixed along it.
PathFit fit_path(Model model, const MultiTaskProblem& problem, const GroundMetric& metric,
                 const GridOptions& options);

struct SweepResult {
    Model model = Model::Lasso;
    std::vector<GridPoint> points;
    std::vector<double> scores;
    std::vector<bool> converged;
    bool higher_is_better = true;
    std::size_t best = 0;
    Matrix best_coefficients;
    int n_not_converged = 0;
};

/// Scores each point by the mean PR-AUC across tasks against `truth` (p x T).
SweepResult sweep_auc(Model model, const MultiTaskProblem& problem, const GroundMetric& metric,
                      const Matrix& truth, const GridOptions& options);

/// Scores each point by K-fold cross-validated prediction MSE (contiguous sample folds).
SweepResult sweep_cv(Model model, const MultiTaskProblem& problem, const GroundMetric& metric,
                     const GridOptions& options, int folds = 5);

struct BenchConfig {
    simulate::GridScenario scenario;  // overlap and seed are overwritten per cell
    std::vector<double> overlaps{0.0, 0.25, 0.5, 0.75, 1.0};
    int n_seeds = 20;
    std::uint64_t master_seed = 0;
    std::vector<Model> models{Model::Lasso, Model::Dirty, Model::GroupLasso, Model::Mtw};
    GridOptions grid = default_grid();
    int threads = 1;
};

/// Throws Error{InvalidParameter} or Error{IndivisibleGrid}.
void validate_bench(const BenchConfig& config);

/// Desk-scale setting: 8x8 grid, 2x2 pooling, 5 seeds.
BenchConfig smoke_config();

struct BenchRow {
    Model model = Model::Lasso;
    double overlap = 0.0;
    int seed = 0;  // seed index within the overlap level
    double auc = 0.0;
    int n_not_converged = 0;  // grid points of the sweep that hit their iteration cap
};

/// One row per (overlap, seed, model), ordered overlap-major, then seed, then model.
/// Cells run on `threads` workers; the output does not depend on the worker count.
std::vector<BenchRow> run_bench(const BenchConfig& config);

/// Header "model,overlap,seed,auc"; numbers printed with %.17g.
std::string bench_csv(const std::vector<BenchRow>& rows);

/// Grid metric for a simulated scenario, normalized to unit median cost.
GroundMetric scenario_metric(const simulate::GridScenario& scenario);

/// Runs fn(i) for i in [0, count) on up to `threads` workers.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace otmtr::bench
