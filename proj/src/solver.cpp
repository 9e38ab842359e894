#include "otmtr/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "otmtr/proxcd.hpp"

namespace otmtr {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<double> column_masses(const Matrix& theta) {
    std::vector<double> masses(static_cast<std::size_t>(theta.cols()));
    for (Index t = 0; t < theta.cols(); ++t) masses[static_cast<std::size_t>(t)] = theta.col(t).sum();
    return masses;
}

void resolve_gammas(SolverState& state, const MtwHyperparams& params) {
    state.gamma_pos = resolve_gamma(params, column_masses(state.theta_pos));
    state.gamma_neg = state.gamma_pos;
    if (!params.positive && state.theta_neg.sum() > 0.0)
        state.gamma_neg = resolve_gamma(params, column_masses(state.theta_neg));
}

void recompute_residuals(SolverState& state, const MultiTaskProblem& problem) {
    const Index T = problem.n_tasks();
    state.residuals.resize(problem.n_samples(), T);
    for (Index t = 0; t < T; ++t) {
        const auto& x = problem.designs[static_cast<std::size_t>(t)];
        const auto& y = problem.targets[static_cast<std::size_t>(t)];
        state.residuals.col(t) = x * (state.theta_pos.col(t) - state.theta_neg.col(t)) - y;
    }
}


// One generalized Sinkhorn pass for a sign part. Zero total mass leaves a zero barycenter
// and zero marginals, consistent with W(0, .) = 0.
double update_barycenter(const MtwModel& model, const Matrix& thetas, double gamma,
                         ot::ScalingState& scalings, bool& log_domain, Matrix& marginals,
                         Vector& bary) {
    if (thetas.sum() <= 0.0) {
        marginals.setZero();
        bary.setZero();
        return 0.0;
    }
    const ot::SinkhornOptions options{model.params.max_sinkhorn, model.params.tol_sinkhorn};
    ot::BarycenterResult result;
    if (!log_domain) {
        result = ot::barycenter(thetas, model.kernel, gamma, options, &scalings);
        if (result.overflowed) {
            log_domain = true;
            const ot::ScalingState last_finite = result.scalings;
            result = ot::barycenter_log(thetas, model.kernel, gamma, options, &last_finite);
        }
    } else {
        result = ot::barycenter_log(thetas, model.kernel, gamma, options, &scalings);
    }
    scalings = std::move(result.scalings);
    marginals = result.left_marginals;
    bary = result.barycenter;
    return result.objective;
}

double data_and_l1(const SolverState& state, const MtwModel& model) {
    const double n = static_cast<double>(model.problem.n_samples());
    return state.residuals.squaredNorm() / (2.0 * n) +
           model.params.lambda * (state.theta_pos.sum() + state.theta_neg.sum());
}

}  // namespace

MtwModel MtwModel::build(MultiTaskProblem problem, GroundMetric metric, MtwHyperparams params) {
    validate_problem(problem);
    validate_hyperparams(params);
    if (metric.size() != problem.n_features())
        throw Error(ErrorCode::ShapeMismatch, "ground metric size " + std::to_string(metric.size()) +
                                                  " differs from p = " +
                                                  std::to_string(problem.n_features()));
    if (!params.epsilon) params.epsilon = resolve_epsilon(metric, problem.n_features());
    ot::Kernel kernel(metric, *params.epsilon);
    std::vector<Vector> lipschitz;
    for (const auto& x : problem.designs) lipschitz.push_back(proxcd::column_lipschitz(x));
    return MtwModel{std::move(problem), std::move(metric), params, std::move(kernel),
                    std::move(lipschitz)};
}

SolverState initial_state(const MtwModel& model) {
    const Index p = model.n_features();
    const Index T = model.n_tasks();
    const double uniform = 1.0 / static_cast<double>(p);
    SolverState state;
    state.theta_pos = Matrix::Constant(p, T, uniform);
    state.theta_neg = model.params.positive ? Matrix::Zero(p, T) : Matrix::Constant(p, T, uniform);
    state.marginals_pos = Matrix::Constant(p, T, uniform);
    state.marginals_neg = model.params.positive ? Matrix::Zero(p, T) : Matrix::Constant(p, T, uniform);
    state.scalings_pos = ot::ScalingState::ones(p, T);
    state.scalings_neg = ot::ScalingState::ones(p, T);
    state.bary_pos = Vector::Ones(p);
    state.bary_neg = model.params.positive ? Vector::Zero(p) : Vector::Ones(p);
    resolve_gammas(state, model.params);
    recompute_residuals(state, model.problem);
    return state;
}

SolverState warm_start_transfer(const SolverState& previous, const MtwModel& model) {
    const Index p = model.n_features();
    const Index T = model.n_tasks();
    auto same = [&](const Matrix& m) { return m.rows() == p && m.cols() == T; };
    if (!same(previous.theta_pos) || !same(previous.theta_neg) || !same(previous.marginals_pos) ||
        !same(previous.marginals_neg) || previous.bary_pos.size() != p ||
        previous.bary_neg.size() != p || previous.scalings_pos.n_features() != p ||
        previous.scalings_pos.n_tasks() != T || previous.scalings_neg.n_features() != p ||
        previous.scalings_neg.n_tasks() != T)
        throw Error(ErrorCode::ShapeMismatch, "previous state does not match the model shape");
    SolverState state = previous;
    if (model.params.positive) {
        state.theta_neg.setZero();
        state.marginals_neg.setZero();
        state.bary_neg.setZero();
    }
    if (model.params.gamma) {
        state.gamma_pos = *model.params.gamma;
        state.gamma_neg = *model.params.gamma;
    } else if (!(state.gamma_pos > 0.0) || !(state.gamma_neg > 0.0)) {
        resolve_gammas(state, model.params);
    }
    recompute_residuals(state, model.problem);
    return state;
}

FitReport fit(const MtwModel& model, const SolverState* init, SolverState* final_state) {
    const MtwHyperparams& params = model.params;
    SolverState state = init ? warm_start_transfer(*init, model) : initial_state(model);
    const Index T = model.n_tasks();
    const double weight = params.mu / static_cast<double>(T);
    const bool with_ot = params.mu > 0.0;

    FitReport report;
    // Change is measured on the split parts: theta_pos and theta_neg can shrink together
    // for several iterations while their difference stays put.
    Matrix previous_pos = state.theta_pos;
    Matrix previous_neg = state.theta_neg;
    for (int iter = 0; iter < params.max_outer; ++iter) {
        const auto cd_start = Clock::now();
        proxcd::ProxParams prox;
        prox.lambda = params.lambda;
        prox.alpha = weight * state.gamma_pos;
        for (Index t = 0; t < T; ++t) {
            prox.a = state.marginals_pos.col(t);
            proxcd::cd_sweeps(model.problem.designs[static_cast<std::size_t>(t)], 1.0,
                              model.lipschitz[static_cast<std::size_t>(t)], prox,
                              state.theta_pos.col(t), state.residuals.col(t), params.max_cd,
                              params.tol_cd);
        }
        if (!params.positive) {
            prox.alpha = weight * state.gamma_neg;
            for (Index t = 0; t < T; ++t) {
                prox.a = state.marginals_neg.col(t);
                proxcd::cd_sweeps(model.problem.designs[static_cast<std::size_t>(t)], -1.0,
                                  model.lipschitz[static_cast<std::size_t>(t)], prox,
                                  state.theta_neg.col(t), state.residuals.col(t), params.max_cd,
                                  params.tol_cd);
            }
        }
        report.seconds_cd += seconds_since(cd_start);

        const double scale = std::max({1.0, previous_pos.maxCoeff(), previous_neg.maxCoeff(),
                                       state.theta_pos.maxCoeff(), state.theta_neg.maxCoeff()});
        const double dx = std::max((state.theta_pos - previous_pos).cwiseAbs().maxCoeff(),
                                   (state.theta_neg - previous_neg).cwiseAbs().maxCoeff()) /
                          scale;
        previous_pos = state.theta_pos;
        previous_neg = state.theta_neg;

        double ot_objective = 0.0;
        if (with_ot) {
            const auto ot_start = Clock::now();
            ot_objective += update_barycenter(model, state.theta_pos, state.gamma_pos,
                                              state.scalings_pos, state.log_domain_pos,
                                              state.marginals_pos, state.bary_pos);
            if (!params.positive)
                ot_objective += update_barycenter(model, state.theta_neg, state.gamma_neg,
                                                  state.scalings_neg, state.log_domain_neg,
                                                  state.marginals_neg, state.bary_neg);
            report.seconds_ot += seconds_since(ot_start);
        }

        report.objective_trace.push_back(data_and_l1(state, model) + weight * ot_objective);
        report.delta_trace.push_back(dx);
        report.iterations_used = iter + 1;
        if (dx < params.tol_outer) {
            report.converged = true;
            break;
        }
    }

    report.coefficients = state.coefficients();
    report.barycenter_pos = state.bary_pos;
    report.barycenter_neg = state.bary_neg;
    report.log_domain_pos = state.log_domain_pos;
    report.log_domain_neg = state.log_domain_neg;
    if (final_state) *final_state = std::move(state);
    return report;
}

double evaluate_loss(const SolverState& state, const MtwModel& model) {
    const Index T = model.n_tasks();
    const double n = static_cast<double>(model.problem.n_samples());
    double loss = model.params.lambda * (state.theta_pos.sum() + state.theta_neg.sum());
    for (Index t = 0; t < T; ++t) {
        const auto& x = model.problem.designs[static_cast<std::size_t>(t)];
        const auto& y = model.problem.targets[static_cast<std::size_t>(t)];
        loss += (x * (state.theta_pos.col(t) - state.theta_neg.col(t)) - y).squaredNorm() / (2.0 * n);
    }
    if (model.params.mu == 0.0) return loss;

    const double weight = model.params.mu / static_cast<double>(T);
    auto part = [&](const Matrix& thetas, const Vector& bary, const ot::ScalingState& s,
                    double gamma) {
        if (bary.sum() == 0.0) return 0.0;
        const Matrix log_u = s.log_u_view();
        const Matrix log_v = s.log_v_view();
        double acc = 0.0;
        for (Index t = 0; t < T; ++t) {
            if (thetas.col(t).sum() == 0.0) continue;
            acc += ot::plan_objective(thetas.col(t), bary, log_u.col(t), log_v.col(t), model.kernel,
                                      gamma);
        }
        return acc;
    };
    loss += weight * part(state.theta_pos, state.bary_pos, state.scalings_pos, state.gamma_pos);
    loss += weight * part(state.theta_neg, state.bary_neg, state.scalings_neg, state.gamma_neg);
    return loss;
}

}  // namespace otmtr
