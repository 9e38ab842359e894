#pragma once

#include <vector>

#include "otmtr/core.hpp"

/// Entropic unbalanced optimal transport between nonnegative vectors:
/// the distance W, generalized Sinkhorn barycenters in linear and log domain,
/// and Gibbs kernels with a separable fast path for image grids.
namespace otmtr::ot {

/// Gibbs kernel K = exp(-M / epsilon).
///
/// Grid metrics are kept in separable form: with pixels in row-major order,
/// K = K_rows (x) K_cols, so K x is a row convolution followed by a column
/// convolution of x viewed as a height x width image.
class Kernel {
public:
    enum class Form { Dense, Separable };

    Kernel(const GroundMetric& metric, double epsilon);

    Form form() const { return form_; }
    double epsilon() const { return epsilon_; }
    Index size() const { return size_; }

    /// True when some kernel entry underflowed to exactly 0 in double precision.
    bool underflowed() const { return underflowed_; }

    Vector apply(const Vector& x) const;
    Vector apply_transpose(const Vector& x) const;

    /// log(K exp(log_x)) evaluated with log-sum-exp; -inf entries are allowed.
    Vector log_apply(const Vector& log_x) const;
    Vector log_apply_transpose(const Vector& log_x) const;

    /// sum_ij K_ij
    double total() const;

    Matrix materialize() const;

private:
    Vector log_apply_impl(const Vector& log_x, bool transpose) const;

    Form form_;
    double epsilon_;
    Index size_;
    bool underflowed_ = false;
    // Dense form.
    Matrix gibbs_;
    Matrix log_gibbs_;
    // Separable form: 1-D factors over rows (height x height) and columns (width x width).
    Index height_ = 0;
    Index width_ = 0;
    Matrix rows_, cols_;
    Matrix log_rows_, log_cols_;
};

/// Throws Error{InvalidParameter} when epsilon <= 0.
Kernel build_kernel(const GroundMetric& metric, double epsilon);

/// Dual scalings of the T transport plans P^t = diag(u^t) K diag(v^t).
/// Columns index tasks. Exactly one representation is active.
struct ScalingState {
    Matrix u;  // p x T, used when !log_domain
    Matrix v;
    bool log_domain = false;
    Matrix log_u;  // p x T, used when log_domain
    Matrix log_v;

    static ScalingState ones(Index p, Index n_tasks);

    Index n_features() const { return log_domain ? log_u.rows() : u.rows(); }
    Index n_tasks() const { return log_domain ? log_u.cols() : u.cols(); }

    /// Same scalings expressed in log domain; zeros map through log(x + 1e-100).
    ScalingState to_log() const;
    Matrix log_u_view() const;
    Matrix log_v_view() const;
};

struct SinkhornOptions {
    int max_iter = 20;
    double tol = 1e-4;
};

struct BarycenterResult {
    Vector barycenter;
    Matrix left_marginals;  // p x T, column t is m^t = u^t * (K v^t)
    /// sum_t G(P^t, theta^t, barycenter) in its converged (dual) closed form.
    double objective = 0.0;
    std::vector<double> constraint_trace;
    bool overflowed = false;
    bool converged = false;
    int iterations = 0;
    ScalingState scalings;
};

struct DistanceResult {
    double value = 0.0;
    bool converged = false;
    int iterations = 0;
    ScalingState scalings;  // single column
};

/// Unbalanced entropic transport cost W(a, b) = min_P G(P, a, b), with
/// G = <P, M> - eps E(P) + gamma KL(P1 | a) + gamma KL(P^T 1 | b).
/// Returns exactly 0 when either argument is the zero vector.
DistanceResult unbalanced_distance(const Vector& a, const Vector& b, const Kernel& kernel,
                                   double gamma,
                                   SinkhornOptions options = {100000, 1e-13});

/// Generalized Sinkhorn barycenter of the columns of `thetas` (p x T).
/// Linear-domain scalings; on a non-finite value the run stops with
/// overflowed = true and the scalings from before the failing sweep.
BarycenterResult barycenter(const Matrix& thetas, const Kernel& kernel, double gamma,
                            const SinkhornOptions& options, const ScalingState* warm = nullptr);

/// Same fixed point as `barycenter`, iterated on log-scalings.
BarycenterResult barycenter_log(const Matrix& thetas, const Kernel& kernel, double gamma,
                                const SinkhornOptions& options,
                                const ScalingState* warm = nullptr);

/// gamma (sum_t |theta^t| + T |bar|) - (eps + 2 gamma) sum_t |m^t|.
/// Equals sum_t W(theta^t, bar) when the scalings are optimal.
double converged_objective(const Matrix& thetas, const Vector& bar, const Matrix& left_marginals,
                           double epsilon, double gamma);

/// G(P, left, right) for the implicit plan P = diag(exp(log_u)) K diag(exp(log_v)),
/// computed from marginals and scalings without forming P.
double plan_objective(const Vector& left, const Vector& right, const Vector& log_u,
                      const Vector& log_v, const Kernel& kernel, double gamma);

/// KL(x | y) = <x, log(x / y)> + <y - x, 1>, with 0 log 0 = 0 and +inf when x_i > 0 = y_i.
double kl_divergence(const Vector& x, const Vector& y);

}  // namespace otmtr::ot
