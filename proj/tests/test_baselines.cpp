#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "otmtr/baselines.hpp"

using namespace otmtr;
using namespace otmtr::baselines;

namespace {

MultiTaskProblem random_problem(std::mt19937_64& rng, Index T, Index n, Index p) {
    std::normal_distribution<double> g(0.0, 1.0);
    MultiTaskProblem problem;
    for (Index t = 0; t < T; ++t) {
        Matrix x(n, p);
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < p; ++j) x(i, j) = g(rng);
        Vector theta = Vector::Zero(p);
        theta[0] = 2.0;
        theta[1 + t % (p - 1)] = -1.5;
        Vector y = x * theta;
        for (Index i = 0; i < n; ++i) y[i] += 0.5 * g(rng);
        problem.designs.push_back(x);
        problem.targets.push_back(y);
    }
    return problem;
}

double max_abs(const Matrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

TEST_CASE("lasso matches proximal gradient") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 5; ++trial) {
        const auto problem = random_problem(rng, 1, 30, 10);
        const auto& x = problem.designs[0];
        const auto& y = problem.targets[0];
        const double lambda = 0.1 * lasso_lambda_max(problem) * (trial + 1);
        const auto fit = fit_lasso(x, y, lambda, 100000, 1e-12);
        CHECK(fit.converged);
        const Vector ref = oracle::lasso_ista(x, y, lambda, 20000);
        CHECK((fit.coefficients - ref).cwiseAbs().maxCoeff() < 1e-7);
        CHECK(lasso_objective(x, y, fit.coefficients, lambda) <=
              lasso_objective(x, y, ref, lambda) + 1e-12);
    }
}

TEST_CASE("lasso at lambda_max is zero and just below is not") {
    std::mt19937_64 rng(12);
    const auto problem = random_problem(rng, 1, 25, 6);
    const double top = lasso_lambda_max(problem);
    CHECK(fit_lasso(problem.designs[0], problem.targets[0], top).coefficients.isZero(0.0));
    CHECK(max_abs(fit_lasso(problem.designs[0], problem.targets[0], 0.99 * top).coefficients) > 0.0);
}

TEST_CASE("lasso with lambda 0 is least squares") {
    std::mt19937_64 rng(13);
    const auto problem = random_problem(rng, 1, 40, 5);
    const auto& x = problem.designs[0];
    const auto& y = problem.targets[0];
    const Vector ls = x.colPivHouseholderQr().solve(y);
    const auto fit = fit_lasso(x, y, 0.0, 100000, 1e-13);
    CHECK((fit.coefficients - ls).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("lasso objective trace is non-increasing") {
    std::mt19937_64 rng(14);
    const auto problem = random_problem(rng, 1, 20, 30);
    const auto fit = fit_lasso(problem.designs[0], problem.targets[0],
                               0.05 * lasso_lambda_max(problem));
    for (std::size_t k = 1; k < fit.objective_trace.size(); ++k)
        CHECK(fit.objective_trace[k] <= fit.objective_trace[k - 1] + 1e-14);
}

TEST_CASE("nonnegative lasso satisfies its KKT conditions") {
    std::mt19937_64 rng(15);
    const auto problem = random_problem(rng, 1, 30, 8);
    const auto& x = problem.designs[0];
    const auto& y = problem.targets[0];
    const double lambda = 0.05;
    const auto fit = fit_lasso(x, y, lambda, 100000, 1e-13, true);
    const Vector grad = x.transpose() * (x * fit.coefficients - y) / 30.0;
    for (Index j = 0; j < 8; ++j) {
        CHECK(fit.coefficients[j] >= 0.0);
        if (fit.coefficients[j] > 0.0)
            CHECK(grad[j] + lambda == doctest::Approx(0.0).epsilon(1e-7));
        else
            CHECK(grad[j] + lambda >= -1e-7);
    }
}

TEST_CASE("lasso skips zero columns and respects warm starts") {
    std::mt19937_64 rng(16);
    auto problem = random_problem(rng, 1, 20, 5);
    problem.designs[0].col(2).setZero();
    const Vector init = Vector::Constant(5, 3.0);
    const auto fit = fit_lasso(problem.designs[0], problem.targets[0], 0.01, 10000, 1e-10, false, &init);
    CHECK(fit.coefficients[2] == 0.0);
    const auto cold = fit_lasso(problem.designs[0], problem.targets[0], 0.01, 10000, 1e-10);
    CHECK((fit.coefficients - cold.coefficients).cwiseAbs().maxCoeff() < 1e-7);
    CHECK_THROWS_AS(fit_lasso(problem.designs[0], problem.targets[0], -1.0), Error);
    const Vector bad = Vector::Zero(4);
    CHECK_THROWS_AS(fit_lasso(problem.designs[0], problem.targets[0], 0.1, 10, 1e-6, false, &bad), Error);
}

TEST_CASE("dirty model matches joint proximal gradient") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 4; ++trial) {
        const auto problem = random_problem(rng, 3, 40, 8);
        const auto bounds = dirty_bounds(problem);
        // Inside the region where both parts can be active.
        const DirtyParams params{0.2 * bounds.mu_max, 0.2 * bounds.mu_max * (0.6 + 0.1 * trial)};
        const auto fit = fit_dirty(problem, params, 200000, 1e-12);
        CHECK(fit.converged);
        const auto [c, s] = oracle::dirty_ista(problem.designs, problem.targets, params.mu,
                                               params.lambda, 40000);
        const double ours = dirty_objective(problem, fit.common, fit.specific, params);
        const double ref = dirty_objective(problem, c, s, params);
        CHECK(ours <= ref + 1e-10);
        CHECK(ours == doctest::Approx(ref).epsilon(1e-9));
        CHECK(max_abs(fit.coefficients() - (c + s)) < 1e-5);
    }
}

TEST_CASE("dirty model: specific part vanishes when lambda > mu") {
    std::mt19937_64 rng(22);
    for (int trial = 0; trial < 5; ++trial) {
        const auto problem = random_problem(rng, 3, 30, 6);
        const auto bounds = dirty_bounds(problem);
        const double mu = 0.3 * bounds.mu_max;
        const auto fit = fit_dirty(problem, {mu, 1.2 * mu}, 100000, 1e-12);
        CHECK(max_abs(fit.specific) < 1e-10);
        const auto group = fit_group_lasso(problem, mu, 100000, 1e-12);
        CHECK(max_abs(fit.common - group.common) < 1e-8);
        CHECK(max_abs(fit.common) > 0.0);
    }
}

TEST_CASE("dirty model: common part vanishes when mu > sqrt(T) lambda") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 5; ++trial) {
        const auto problem = random_problem(rng, 3, 30, 6);
        const auto bounds = dirty_bounds(problem);
        const double lambda = 0.2 * bounds.lambda_max;
        const auto fit = fit_dirty(problem, {1.01 * std::sqrt(3.0) * lambda, lambda}, 100000, 1e-12);
        CHECK(max_abs(fit.common) < 1e-10);
        for (Index t = 0; t < 3; ++t) {
            const auto k = static_cast<std::size_t>(t);
            const auto lasso = fit_lasso(problem.designs[k], problem.targets[k], lambda, 100000, 1e-12);
            CHECK((fit.specific.col(t) - lasso.coefficients).cwiseAbs().maxCoeff() < 1e-7);
        }
    }
}

TEST_CASE("dirty model is zero beyond its critical values") {
    std::mt19937_64 rng(24);
    const auto problem = random_problem(rng, 3, 30, 6);
    const auto bounds = dirty_bounds(problem);
    // Exactly at the bound the threshold test is a rounding tie, so step just past it.
    const double over = 1.0 + 1e-12;
    const auto fit = fit_dirty(problem, {over * bounds.mu_max, over * bounds.lambda_max});
    CHECK(fit.common.isZero(0.0));
    CHECK(fit.specific.isZero(0.0));
    // Below lambda_max with mu still at the edge, the specific part wakes up.
    const auto below = fit_dirty(problem, {over * bounds.mu_max, 0.9 * bounds.lambda_max});
    CHECK(max_abs(below.specific) > 0.0);
    CHECK(fit_group_lasso(problem, over * bounds.mu_max).common.isZero(0.0));
}

TEST_CASE("dirty bounds on a hand example") {
    // One feature, two tasks, n = 2: X^T y / n = (3, 4), so the row norm is 5.
    MultiTaskProblem problem;
    problem.designs = {Matrix::Constant(2, 1, 1.0), Matrix::Constant(2, 1, 1.0)};
    problem.targets = {Vector::Constant(2, 3.0), Vector::Constant(2, 4.0)};
    const auto bounds = dirty_bounds(problem);
    CHECK(bounds.mu_max == doctest::Approx(5.0));
    CHECK(bounds.lambda_max == doctest::Approx(4.0));
    CHECK(lasso_lambda_max(problem) == doctest::Approx(4.0));
}

TEST_CASE("dirty objective trace is non-increasing") {
    std::mt19937_64 rng(25);
    const auto problem = random_problem(rng, 4, 15, 20);
    const auto bounds = dirty_bounds(problem);
    const auto fit = fit_dirty(problem, {0.1 * bounds.mu_max, 0.08 * bounds.mu_max});
    REQUIRE(fit.objective_trace.size() > 1);
    for (std::size_t k = 1; k < fit.objective_trace.size(); ++k)
        CHECK(fit.objective_trace[k] <= fit.objective_trace[k - 1] * (1.0 + 1e-13));
    CHECK(fit.objective_trace.back() ==
          doctest::Approx(dirty_objective(problem, fit.common, fit.specific, {0.1 * bounds.mu_max, 0.08 * bounds.mu_max})));
}

TEST_CASE("dirty parameters are validated") {
    std::mt19937_64 rng(26);
    const auto problem = random_problem(rng, 2, 10, 4);
    CHECK_THROWS_AS(fit_dirty(problem, {0.0, 1.0}), Error);
    CHECK_THROWS_AS(fit_dirty(problem, {1.0, -1.0}), Error);
    CHECK_THROWS_AS(fit_group_lasso(problem, 0.0), Error);
}

TEST_CASE("log grid") {
    const auto g = log_grid(10.0, 0.1, 5);
    REQUIRE(g.size() == 5);
    CHECK(g[0] == doctest::Approx(10.0));
    CHECK(g[2] == doctest::Approx(1.0));
    CHECK(g[4] == doctest::Approx(0.1));
    CHECK(log_grid(3.0, 1.0, 1) == std::vector<double>{3.0});
    CHECK_THROWS_AS(log_grid(1.0, 0.0, 3), Error);
    CHECK_THROWS_AS(log_grid(1.0, 0.1, 0), Error);
}

TEST_CASE("dirty grid stays inside the admissible triangle") {
    std::mt19937_64 rng(27);
    const auto problem = random_problem(rng, 4, 20, 6);
    const auto bounds = dirty_bounds(problem);
    const auto grid = dirty_grid(problem, 5, 10);
    REQUIRE(grid.size() == 50);
    for (const auto& [mu, lambda] : grid) {
        CHECK(lambda <= mu * (1.0 + 1e-12));
        CHECK(mu <= 2.0 * lambda * (1.0 + 1e-12));  // sqrt(T) = 2
        CHECK(mu <= bounds.mu_max * (1.0 + 1e-12));
        CHECK(mu >= 0.01 * bounds.mu_max * (1.0 - 1e-12));
    }
    CHECK(grid.front().first == doctest::Approx(bounds.mu_max));
    CHECK(grid.front().second == doctest::Approx(bounds.mu_max / 2.0));
    CHECK(grid[4].second == doctest::Approx(bounds.mu_max));
    CHECK(grid.back().first == doctest::Approx(0.01 * bounds.mu_max));
    CHECK_THROWS_AS(dirty_grid(problem, 0, 3), Error);
}
