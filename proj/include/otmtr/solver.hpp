#pragma once

#include <vector>

#include "otmtr/core.hpp"
#include "otmtr/ot.hpp"

// Alternating minimization of the OT-regularized multi-task loss
//   sum_t [1/(2n) ||X^t (theta_pos^t - theta_neg^t) - Y^t||^2 + lambda |theta_pos^t + theta_neg^t|_1]
//   + mu / T sum_t [G(P_pos^t, theta_pos^t, bar_pos) + G(P_neg^t, theta_neg^t, bar_neg)]
namespace otmtr {

struct MtwModel {
    MultiTaskProblem problem;
    GroundMetric metric;
    MtwHyperparams params;  // epsilon always set; gamma may stay on auto
    ot::Kernel kernel;
    std::vector<Vector> lipschitz;  // per task, see proxcd::column_lipschitz

    /// Validates everything and resolves epsilon (explicit value or resolve_epsilon).
    static MtwModel build(MultiTaskProblem problem, GroundMetric metric, MtwHyperparams params);

    Index n_tasks() const { return problem.n_tasks(); }
    Index n_features() const { return problem.n_features(); }
};

struct SolverState {
    Matrix theta_pos;  // p x T
    Matrix theta_neg;
    Matrix marginals_pos;  // p x T, column t is P^t 1
    Matrix marginals_neg;
    ot::ScalingState scalings_pos;
    ot::ScalingState scalings_neg;
    Vector bary_pos;
    Vector bary_neg;
    Matrix residuals;  // n x T, X^t theta^t - Y^t
    double gamma_pos = 0.0;
    double gamma_neg = 0.0;
    bool log_domain_pos = false;
    bool log_domain_neg = false;

    Matrix coefficients() const { return theta_pos - theta_neg; }
};

/// Uniform start: theta = 1/p in each part (theta_neg = 0 in positive mode), marginals 1/p,
/// barycenters and scalings all ones. Auto gamma is resolved from the starting column sums.
SolverState initial_state(const MtwModel& model);

/// Reuses thetas, scalings, marginals and barycenters of a previous fit; residuals are
/// recomputed for `model`. Throws Error{ShapeMismatch} when dimensions differ.
SolverState warm_start_transfer(const SolverState& previous, const MtwModel& model);

/// Runs the alternating scheme from `init` (fresh state when null). The final state is
/// written to `final_state` when given.
FitReport fit(const MtwModel& model, const SolverState* init = nullptr,
              SolverState* final_state = nullptr);

/// Loss at the state, with each G evaluated exactly at the implicit plan of the stored
/// scalings. A G term whose coefficient or barycenter is the zero vector counts as 0.
double evaluate_loss(const SolverState& state, const MtwModel& model);

}  // namespace otmtr
