#include "otmtr/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace otmtr::baselines {

namespace {

double soft_threshold(double z, double level) {
    if (z > level) return z - level;
    if (z < -level) return z + level;
    return 0.0;
}

Vector safe_norms(const Matrix& design) {
    Vector norms = design.colwise().squaredNorm().transpose();
    for (Index j = 0; j < norms.size(); ++j)
        if (norms[j] == 0.0) norms[j] = std::numeric_limits<double>::infinity();
    return norms;
}

double relative_step(double max_step, double max_value) {
    return max_step / std::max(1.0, max_value);
}

}  // namespace

double lasso_objective(const Matrix& design, const Vector& target, const Vector& theta,
                       double lambda) {
    const double n = static_cast<double>(design.rows());
    return (design * theta - target).squaredNorm() / (2.0 * n) + lambda * theta.lpNorm<1>();
}

LassoResult fit_lasso(const Matrix& design, const Vector& target, double lambda, int max_iter,
                      double tol, bool nonnegative, const Vector* init) {
    if (design.rows() != target.size())
        throw Error(ErrorCode::ShapeMismatch, "design and target lengths differ");
    if (!(lambda >= 0.0)) throw Error(ErrorCode::InvalidParameter, "lambda must be >= 0");
    const Index p = design.cols();
    const double n = static_cast<double>(design.rows());
    LassoResult result;
    result.coefficients = Vector::Zero(p);
    if (init) {
        if (init->size() != p) throw Error(ErrorCode::ShapeMismatch, "init has the wrong length");
        result.coefficients = *init;
    }
    Vector& theta = result.coefficients;
    Vector residual = design * theta - target;
    // A zero column never moves: its coordinate minimizer is 0 and an infinite norm keeps it there.
    const Vector norms = safe_norms(design);
    for (Index j = 0; j < p; ++j)
        if (std::isinf(norms[j])) theta[j] = 0.0;
    for (int sweep = 0; sweep < max_iter; ++sweep) {
        double max_step = 0.0;
        for (Index j = 0; j < p; ++j) {
            if (std::isinf(norms[j])) continue;
            const double old = theta[j];
            const double z = old - design.col(j).dot(residual) / norms[j];
            double next = soft_threshold(z, n * lambda / norms[j]);
            if (nonnegative) next = std::max(next, 0.0);
            const double step = next - old;
            if (step != 0.0) {
                residual.noalias() += step * design.col(j);
                theta[j] = next;
            }
            max_step = std::max(max_step, std::abs(step));
        }
        result.iterations = sweep + 1;
        result.objective_trace.push_back(residual.squaredNorm() / (2.0 * n) +
                                         lambda * theta.lpNorm<1>());
        if (relative_step(max_step, theta.cwiseAbs().maxCoeff()) < tol) {
            result.converged = true;
            break;
        }
    }
    return result;
}

double lasso_lambda_max(const MultiTaskProblem& problem) {
    validate_problem(problem);
    const double n = static_cast<double>(problem.n_samples());
    double best = 0.0;
    for (std::size_t t = 0; t < problem.designs.size(); ++t)
        best = std::max(best, (problem.designs[t].transpose() * problem.targets[t]).lpNorm<Eigen::Infinity>());
    return best / n;
}

DirtyBounds dirty_bounds(const MultiTaskProblem& problem) {
    validate_problem(problem);
    const Index T = problem.n_tasks();
    const double n = static_cast<double>(problem.n_samples());
    Matrix corr(problem.n_features(), T);
    for (Index t = 0; t < T; ++t) {
        const auto k = static_cast<std::size_t>(t);
        corr.col(t) = problem.designs[k].transpose() * problem.targets[k] / n;
    }
    DirtyBounds bounds;
    bounds.mu_max = corr.rowwise().norm().maxCoeff();
    bounds.lambda_max = corr.cwiseAbs().maxCoeff();
    return bounds;
}

double dirty_objective(const MultiTaskProblem& problem, const Matrix& common,
                       const Matrix& specific, const DirtyParams& params) {
    const double n = static_cast<double>(problem.n_samples());
    double value = 0.0;
    for (Index t = 0; t < problem.n_tasks(); ++t) {
        const auto k = static_cast<std::size_t>(t);
        value += (problem.designs[k] * (common.col(t) + specific.col(t)) - problem.targets[k])
                     .squaredNorm() /
                 (2.0 * n);
    }
    value += params.mu * common.rowwise().norm().sum();
    if (std::isfinite(params.lambda)) value += params.lambda * specific.cwiseAbs().sum();
    return value;
}

namespace {

DirtyResult dirty_impl(const MultiTaskProblem& problem, const DirtyParams& params, int max_iter,
                       double tol, bool with_specific) {
    validate_problem(problem);
    const Index p = problem.n_features();
    const Index T = problem.n_tasks();
    const double n = static_cast<double>(problem.n_samples());

    std::vector<Vector> norms;
    Matrix residuals(problem.n_samples(), T);
    for (Index t = 0; t < T; ++t) {
        const auto k = static_cast<std::size_t>(t);
        norms.push_back(safe_norms(problem.designs[k]));
        residuals.col(t) = -problem.targets[k];
    }
    // Row step for the common block: the largest per-task curvature bounds the row Hessian.
    Vector row_curvature = Vector::Zero(p);
    for (Index j = 0; j < p; ++j)
        for (Index t = 0; t < T; ++t)
            if (std::isfinite(norms[static_cast<std::size_t>(t)][j]))
                row_curvature[j] = std::max(row_curvature[j], norms[static_cast<std::size_t>(t)][j] / n);

    DirtyResult result;
    result.common = Matrix::Zero(p, T);
    result.specific = Matrix::Zero(p, T);
    Vector grad(T), row(T);
    for (int iter = 0; iter < max_iter; ++iter) {
        double max_step = 0.0;
        for (Index j = 0; j < p; ++j) {
            if (row_curvature[j] == 0.0) continue;
            for (Index t = 0; t < T; ++t)
                grad[t] = problem.designs[static_cast<std::size_t>(t)].col(j).dot(residuals.col(t)) / n;
            row = result.common.row(j).transpose() - grad / row_curvature[j];
            const double norm = row.norm();
            const double level = params.mu / row_curvature[j];
            row *= norm > level ? 1.0 - level / norm : 0.0;
            for (Index t = 0; t < T; ++t) {
                const double step = row[t] - result.common(j, t);
                if (step == 0.0) continue;
                residuals.col(t).noalias() += step * problem.designs[static_cast<std::size_t>(t)].col(j);
                result.common(j, t) = row[t];
                max_step = std::max(max_step, std::abs(step));
            }
            if (!with_specific) continue;
            for (Index t = 0; t < T; ++t) {
                const auto k = static_cast<std::size_t>(t);
                const double norm_sq = norms[k][j];
                if (std::isinf(norm_sq)) continue;
                const double old = result.specific(j, t);
                const double z = old - problem.designs[k].col(j).dot(residuals.col(t)) / norm_sq;
                const double next = soft_threshold(z, n * params.lambda / norm_sq);
                const double step = next - old;
                if (step == 0.0) continue;
                residuals.col(t).noalias() += step * problem.designs[k].col(j);
                result.specific(j, t) = next;
                max_step = std::max(max_step, std::abs(step));
            }
        }
        result.iterations = iter + 1;
        const double value = residuals.squaredNorm() / (2.0 * n) +
                             params.mu * result.common.rowwise().norm().sum() +
                             (with_specific ? params.lambda * result.specific.cwiseAbs().sum() : 0.0);
        result.objective_trace.push_back(value);
        const double scale = (result.common + result.specific).cwiseAbs().maxCoeff();
        if (relative_step(max_step, scale) < tol) {
            result.converged = true;
            break;
        }
    }
    return result;
}

}  // namespace

DirtyResult fit_dirty(const MultiTaskProblem& problem, const DirtyParams& params, int max_iter,
                      double tol) {
    if (!(params.mu > 0.0) || !(params.lambda > 0.0) || !std::isfinite(params.mu) ||
        !std::isfinite(params.lambda))
        throw Error(ErrorCode::InvalidParameter, "dirty model needs mu > 0 and lambda > 0");
    return dirty_impl(problem, params, max_iter, tol, true);
}

DirtyResult fit_group_lasso(const MultiTaskProblem& problem, double mu, int max_iter, double tol) {
    if (!(mu > 0.0) || !std::isfinite(mu))
        throw Error(ErrorCode::InvalidParameter, "group Lasso needs mu > 0");
    return dirty_impl(problem, DirtyParams{mu, std::numeric_limits<double>::infinity()}, max_iter,
                      tol, false);
}

std::vector<double> log_grid(double hi, double lo, int n) {
    if (n < 1) throw Error(ErrorCode::InvalidParameter, "grid size must be >= 1");
    if (!(hi > 0.0) || !(lo > 0.0)) throw Error(ErrorCode::InvalidParameter, "grid bounds must be > 0");
    std::vector<double> values(static_cast<std::size_t>(n));
    if (n == 1) {
        values[0] = hi;
        return values;
    }
    const double a = std::log(hi), b = std::log(lo);
    for (int i = 0; i < n; ++i) values[static_cast<std::size_t>(i)] = std::exp(a + (b - a) * i / (n - 1));
    return values;
}

std::vector<std::pair<double, double>> dirty_grid(const MultiTaskProblem& problem, int n_base,
                                                  int n_depth) {
    if (n_base < 1 || n_depth < 1) throw Error(ErrorCode::InvalidParameter, "grid counts must be >= 1");
    const DirtyBounds bounds = dirty_bounds(problem);
    if (!(bounds.mu_max > 0.0)) throw Error(ErrorCode::DegenerateMass, "X^T Y is zero");
    const double low_ratio = 1.0 / std::sqrt(static_cast<double>(problem.n_tasks()));
    const std::vector<double> depths = log_grid(1.0, 0.01, n_depth);
    std::vector<std::pair<double, double>> grid;
    grid.reserve(static_cast<std::size_t>(n_base * n_depth));
    for (double depth : depths) {
        const double mu = bounds.mu_max * depth;
        for (int i = 0; i < n_base; ++i) {
            const double ratio =
                n_base == 1 ? 1.0 : low_ratio + (1.0 - low_ratio) * i / (n_base - 1);
            grid.emplace_back(mu, mu * ratio);
        }
    }
    return grid;
}

}  // namespace otmtr::baselines
