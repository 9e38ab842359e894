#pragma once

#include <utility>
#include <vector>

#include "otmtr/core.hpp"

namespace otmtr::baselines {

struct LassoResult {
    Vector coefficients;
    bool converged = false;
    int iterations = 0;
    std::vector<double> objective_trace;  // one entry per sweep
};

/// Cyclic coordinate descent for 1/(2n) ||X theta - y||^2 + lambda |theta|_1, started at zero
/// (or at `init`). Stops when max |delta theta_j| / max(1, max |theta|) < tol.
LassoResult fit_lasso(const Matrix& design, const Vector& target, double lambda, int max_iter = 10000,
                      double tol = 1e-8, bool nonnegative = false, const Vector* init = nullptr);

double lasso_objective(const Matrix& design, const Vector& target, const Vector& theta,
                       double lambda);

/// max_t ||X^tT Y^t||_inf / n: the smallest lambda giving all-zero per-task Lasso fits.
double lasso_lambda_max(const MultiTaskProblem& problem);

/// Dirty model: 1/(2n) sum_t ||X^t (c^t + s^t) - Y^t||^2 + mu ||C||_{2,1} + lambda ||S||_1,
/// the l2 norm in ||C||_{2,1} taken across tasks for each feature.
struct DirtyParams {
    double mu = 1.0;
    double lambda = 1.0;
};

struct DirtyBounds {
    double mu_max = 0.0;      // max_j ||(X^tT_j Y^t / n)_t||_2
    double lambda_max = 0.0;  // max_{j,t} |X^tT_j Y^t| / n
};

DirtyBounds dirty_bounds(const MultiTaskProblem& problem);

struct DirtyResult {
    Matrix common;    // p x T
    Matrix specific;  // p x T
    bool converged = false;
    int iterations = 0;
    std::vector<double> objective_trace;

    Matrix coefficients() const { return common + specific; }
};

/// Block-coordinate proximal descent: a prox-linear group soft-threshold per row of C
/// (step 1 / max_t ||X^t_j||^2 / n) and an exact soft-threshold per entry of S.
/// Throws Error{InvalidParameter} unless mu > 0 and lambda > 0.
DirtyResult fit_dirty(const MultiTaskProblem& problem, const DirtyParams& params,
                      int max_iter = 10000, double tol = 1e-8);

/// Dirty model with the specific part switched off, i.e. the group Lasso with weight mu.
DirtyResult fit_group_lasso(const MultiTaskProblem& problem, double mu, int max_iter = 10000,
                            double tol = 1e-8);

double dirty_objective(const MultiTaskProblem& problem, const Matrix& common,
                       const Matrix& specific, const DirtyParams& params);

/// (mu, lambda) pairs inside the region lambda <= mu <= sqrt(T) lambda below the critical values.
/// n_depth scales s_k log-spaced from 1 down to 1/100 set mu = mu_max s_k; at each depth n_base
/// ratios r_i linearly spaced over [1/sqrt(T), 1] give lambda = mu r_i. The k = 0 row is the
/// mu = mu_max edge. Returns n_base * n_depth pairs, depth-major.
std::vector<std::pair<double, double>> dirty_grid(const MultiTaskProblem& problem, int n_base,
                                                  int n_depth);

/// n values log-spaced from hi down to lo (hi first).
std::vector<double> log_grid(double hi, double lo, int n);

}  // namespace otmtr::baselines
