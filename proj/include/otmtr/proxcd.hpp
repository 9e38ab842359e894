#pragma once

#include "otmtr/core.hpp"

// Coefficient subproblem for one task and one sign part:
//   min_{theta > 0} 1/(2n) ||s X theta - y||^2 + sum_j [alpha (theta_j - a_j log theta_j) + lambda theta_j]
// with s = +1 for the positive part and s = -1 for the negative part.
namespace otmtr::proxcd {

struct ProxParams {
    double alpha = 0.0;  // mu * gamma / T
    Vector a;            // left marginal m = P 1
    double lambda = 0.0; // linear (l1) weight; equals alpha * b
    /// b = lambda / alpha; +inf when alpha = 0 < lambda.
    double b() const;
};

void validate_prox(const ProxParams& prox, Index p);

/// argmin_{x > 0} 1/2 (x - y)^2 + alpha [x - a log x + b x]; max(y - alpha (b + 1), 0) when a = 0.
double prox_g(double y, double alpha, double a, double b);

struct CdState {
    Vector theta;
    Vector residual;   // s X theta - y_effective
    Vector lipschitz;  // ||X_j||^2, zero columns replaced by the smallest nonzero norm
};

struct CdResult {
    int sweeps = 0;
    bool converged = false;
    double objective = 0.0;
};

/// Squared column norms with the zero-column replacement rule.
Vector column_lipschitz(const Matrix& design);

CdState make_state(const Matrix& design, const Vector& y_effective, Vector theta,
                   double design_sign = 1.0);

/// Cyclic proximal coordinate descent on `theta` with an externally owned residual.
/// Stops when max_j |delta theta_j| / max(1, max theta) < tol. The objective field is not filled.
CdResult cd_sweeps(const Matrix& design, double design_sign, const Vector& lipschitz,
                   const ProxParams& prox, Eigen::Ref<Vector> theta, Eigen::Ref<Vector> residual,
                   int max_iter, double tol);

/// cd_sweeps on a self-contained state, reporting the final subproblem objective.
CdResult cd_update(const Matrix& design, const Vector& y_effective, CdState& state,
                   const ProxParams& prox, int max_iter, double tol, double design_sign = 1.0);

double subproblem_objective(const Matrix& design, const Vector& y_effective, const Vector& theta,
                            const ProxParams& prox, double design_sign = 1.0);

/// Penalty part only: sum_j alpha (theta_j - a_j log theta_j) + lambda theta_j.
double penalty(const Vector& theta, const ProxParams& prox);

}  // namespace otmtr::proxcd
