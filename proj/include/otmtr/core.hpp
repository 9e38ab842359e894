#pragma once

#include <cstdint>
#include <initializer_list>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace otmtr {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class ErrorCode {
    ShapeMismatch,
    NonFinite,
    Empty,
    DegenerateMass,
    ZeroMedian,
    InvalidParameter,
    IndivisibleGrid,
    SupportCollision,
    EmptyTruth,
    Io,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// T regression tasks sharing a feature space: Y^t = X^t theta^t + noise.
/// Every design is n x p and every target has length n.
struct MultiTaskProblem {
    std::vector<Matrix> designs;
    std::vector<Vector> targets;

    Index n_tasks() const { return static_cast<Index>(designs.size()); }
    Index n_samples() const { return designs.empty() ? 0 : designs.front().rows(); }
    Index n_features() const { return designs.empty() ? 0 : designs.front().cols(); }
};

/// Throws Error{Empty | ShapeMismatch | NonFinite} unless the problem is well formed.
void validate_problem(const MultiTaskProblem& problem);

/// Hyperparameters of the OT-regularized multi-task estimator.
/// `epsilon` and `gamma` left empty mean "auto" (see resolve_epsilon / resolve_gamma).
struct MtwHyperparams {
    double mu = 1.0;
    double lambda = 0.0;
    std::optional<double> epsilon;
    std::optional<double> gamma;
    double tau = 0.5;
    int max_outer = 2000;
    double tol_outer = 1e-5;
    int max_sinkhorn = 20;
    double tol_sinkhorn = 1e-4;
    int max_cd = 10000;
    double tol_cd = 1e-6;
    bool positive = false;
};

/// Throws Error{InvalidParameter} on any violated range constraint.
void validate_hyperparams(const MtwHyperparams& params);

/// gamma = tau * (mean_t sqrt(mass_t))^2 in auto mode, the explicit value otherwise.
double resolve_gamma(const MtwHyperparams& params, const std::vector<double>& masses);

/// Squared-Euclidean cost between features, either as an explicit p x p matrix
/// or implicitly over the pixels of a height x width image (row-major pixel order).
class GroundMetric {
public:
    static GroundMetric dense(Matrix costs);
    static GroundMetric grid2d(Index height, Index width, double scale = 1.0);

    bool is_grid() const { return grid_; }
    Index size() const;
    Index height() const { return height_; }
    Index width() const { return width_; }
    /// Multiplier applied to the squared pixel distance (grid form only).
    double scale() const { return scale_; }

    double cost(Index i, Index j) const;
    Matrix materialize() const;

    /// Median over all p*p entries, diagonal included.
    double median_cost() const { return median_; }

    /// Same geometry rescaled so that the median cost is 1.
    GroundMetric normalized() const;

private:
    GroundMetric() = default;

    bool grid_ = false;
    Matrix costs_;
    Index height_ = 0;
    Index width_ = 0;
    double scale_ = 1.0;
    double median_ = 0.0;
};

/// 1 / (median_cost * p). Throws Error{ZeroMedian} for a degenerate metric.
double resolve_epsilon(const GroundMetric& metric, Index p);

/// Outcome of one estimator fit.
struct FitReport {
    Matrix coefficients;  // p x T, theta_pos - theta_neg
    Vector barycenter_pos;
    Vector barycenter_neg;
    std::vector<double> objective_trace;
    std::vector<double> delta_trace;
    bool converged = false;
    int iterations_used = 0;
    double seconds_cd = 0.0;
    double seconds_ot = 0.0;
    bool log_domain_pos = false;
    bool log_domain_neg = false;
};

/// Derive an independent 64-bit stream seed from a master seed and a path of indices.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path);

bool all_finite(const Eigen::Ref<const Matrix>& m);

}  // namespace otmtr
