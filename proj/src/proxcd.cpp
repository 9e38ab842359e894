#include "otmtr/proxcd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace otmtr::proxcd {

namespace {

// Positive root of x^2 - d x - q = 0 with q >= 0, computed without cancellation.
double positive_root(double d, double q) {
    const double disc = std::sqrt(d * d + 4.0 * q);
    if (d >= 0.0) return 0.5 * (d + disc);
    return 2.0 * q / (disc - d);
}

}  // namespace

double ProxParams::b() const {
    if (alpha > 0.0) return lambda / alpha;
    return lambda > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
}

void validate_prox(const ProxParams& prox, Index p) {
    if (!(prox.alpha >= 0.0) || !(prox.lambda >= 0.0))
        throw Error(ErrorCode::InvalidParameter, "alpha and lambda must be >= 0");
    if (prox.a.size() != p) throw Error(ErrorCode::ShapeMismatch, "marginal has the wrong length");
    if (!prox.a.allFinite() || (prox.a.array() < 0.0).any())
        throw Error(ErrorCode::InvalidParameter, "marginal must be finite and >= 0");
}

double prox_g(double y, double alpha, double a, double b) {
    const double d = y - alpha * (b + 1.0);
    if (a == 0.0 || alpha == 0.0) return std::max(d, 0.0);
    return positive_root(d, alpha * a);
}

Vector column_lipschitz(const Matrix& design) {
    Vector norms = design.colwise().squaredNorm().transpose();
    double smallest = std::numeric_limits<double>::infinity();
    for (Index j = 0; j < norms.size(); ++j)
        if (norms[j] > 0.0) smallest = std::min(smallest, norms[j]);
    if (!std::isfinite(smallest)) smallest = 1.0;  // all-zero design
    for (Index j = 0; j < norms.size(); ++j)
        if (norms[j] == 0.0) norms[j] = smallest;
    return norms;
}

CdState make_state(const Matrix& design, const Vector& y_effective, Vector theta,
                   double design_sign) {
    if (theta.size() != design.cols() || y_effective.size() != design.rows())
        throw Error(ErrorCode::ShapeMismatch, "cd state does not match the design");
    CdState state;
    state.residual = design_sign * (design * theta) - y_effective;
    state.theta = std::move(theta);
    state.lipschitz = column_lipschitz(design);
    return state;
}

CdResult cd_sweeps(const Matrix& design, double design_sign, const Vector& lipschitz,
                   const ProxParams& prox, Eigen::Ref<Vector> theta, Eigen::Ref<Vector> residual,
                   int max_iter, double tol) {
    const Index p = design.cols();
    const double n = static_cast<double>(design.rows());
    CdResult result;
    for (int sweep = 0; sweep < max_iter; ++sweep) {
        double max_step = 0.0;
        double max_theta = 0.0;
        for (Index j = 0; j < p; ++j) {
            const double old = theta[j];
            const double grad = design_sign * design.col(j).dot(residual);
            const double z = old - grad / lipschitz[j];
            // Rescaled to unit curvature: alpha_j, a_j and the linear weight pick up n / L_j.
            const double scale = n / lipschitz[j];
            const double alpha_j = prox.alpha * scale;
            const double shift = (prox.alpha + prox.lambda) * scale;
            const double next = (alpha_j == 0.0 || prox.a[j] == 0.0)
                                    ? std::max(z - shift, 0.0)
                                    : positive_root(z - shift, alpha_j * prox.a[j]);
            const double step = next - old;
            if (step != 0.0) {
                residual.noalias() += (design_sign * step) * design.col(j);
                theta[j] = next;
            }
            max_step = std::max(max_step, std::abs(step));
            max_theta = std::max(max_theta, next);
        }
        result.sweeps = sweep + 1;
        if (max_step / std::max(1.0, max_theta) < tol) {
            result.converged = true;
            break;
        }
    }
    return result;
}

CdResult cd_update(const Matrix& design, const Vector& y_effective, CdState& state,
                   const ProxParams& prox, int max_iter, double tol, double design_sign) {
    validate_prox(prox, design.cols());
    if (state.theta.size() != design.cols() || state.residual.size() != design.rows() ||
        state.lipschitz.size() != design.cols())
        throw Error(ErrorCode::ShapeMismatch, "cd state does not match the design");
    CdResult result = cd_sweeps(design, design_sign, state.lipschitz, prox, state.theta,
                                state.residual, max_iter, tol);
    result.objective = subproblem_objective(design, y_effective, state.theta, prox, design_sign);
    return result;
}

double penalty(const Vector& theta, const ProxParams& prox) {
    double acc = 0.0;
    for (Index j = 0; j < theta.size(); ++j) {
        double log_term = 0.0;
        if (prox.alpha > 0.0 && prox.a[j] > 0.0) {
            if (theta[j] <= 0.0) return std::numeric_limits<double>::infinity();
            log_term = prox.a[j] * std::log(theta[j]);
        }
        acc += prox.alpha * (theta[j] - log_term) + prox.lambda * theta[j];
    }
    return acc;
}

double subproblem_objective(const Matrix& design, const Vector& y_effective, const Vector& theta,
                            const ProxParams& prox, double design_sign) {
    const double n = static_cast<double>(design.rows());
    const Vector r = design_sign * (design * theta) - y_effective;
    return r.squaredNorm() / (2.0 * n) + penalty(theta, prox);
}

}  // namespace otmtr::proxcd
