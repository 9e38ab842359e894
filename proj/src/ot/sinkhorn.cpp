#include <algorithm>
#include <cmath>
#include <limits>

#include "otmtr/ot.hpp"

namespace otmtr::ot {

namespace {

constexpr double kLogFloor = 1e-100;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// (num / den)^power elementwise with 0 / anything := 0; a positive numerator over 0 gives +inf.
template <class Num, class Den>
Vector ratio_pow(const Num& num, const Den& den, double power) {
    const Vector raw = (power * (num.array().log() - den.array().log())).exp().matrix();
    return (num.array() == 0.0).select(0.0, raw.array()).matrix();
}

// (mean_t x_t^power)^(1 / power) across the columns of x, row by row.
Vector power_mean(const Matrix& x, double power) {
    return ((power * x.array().log()).exp().rowwise().mean().log() / power).exp().matrix();
}

double relative_change(const Vector& now, const Vector& before) {
    const double scale = std::max({1.0, now.maxCoeff(), before.maxCoeff()});
    return (now - before).cwiseAbs().maxCoeff() / scale;
}

// x * y with 0 * (+-inf) := 0
double xlogy_term(double x, double log_y) { return x == 0.0 ? 0.0 : x * log_y; }

void check_inputs(const Matrix& thetas, const Kernel& kernel, double gamma) {
    if (thetas.rows() != kernel.size())
        throw Error(ErrorCode::ShapeMismatch, "inputs do not match the kernel dimension");
    if (thetas.cols() < 1) throw Error(ErrorCode::Empty, "no inputs");
    if (!thetas.allFinite()) throw Error(ErrorCode::NonFinite, "barycenter inputs");
    if ((thetas.array() < 0.0).any())
        throw Error(ErrorCode::InvalidParameter, "barycenter inputs must be nonnegative");
    if (!(gamma > 0.0)) throw Error(ErrorCode::InvalidParameter, "gamma must be > 0");
    if (thetas.sum() <= 0.0) throw Error(ErrorCode::DegenerateMass, "all inputs have zero mass");
}

double log_sum_exp(const Vector& values) {
    const double peak = values.maxCoeff();
    if (peak == kNegInf) return kNegInf;
    return peak + std::log((values.array() - peak).exp().sum());
}

}  // namespace

ScalingState ScalingState::ones(Index p, Index n_tasks) {
    ScalingState s;
    s.u = Matrix::Ones(p, n_tasks);
    s.v = Matrix::Ones(p, n_tasks);
    return s;
}

ScalingState ScalingState::to_log() const {
    if (log_domain) return *this;
    ScalingState s;
    s.log_domain = true;
    s.log_u = (u.array() + kLogFloor).log().matrix();
    s.log_v = (v.array() + kLogFloor).log().matrix();
    return s;
}

Matrix ScalingState::log_u_view() const {
    return log_domain ? log_u : Matrix(u.array().log().matrix());
}

Matrix ScalingState::log_v_view() const {
    return log_domain ? log_v : Matrix(v.array().log().matrix());
}

double kl_divergence(const Vector& x, const Vector& y) {
    double acc = 0.0;
    for (Index i = 0; i < x.size(); ++i) {
        if (x[i] == 0.0) {
            acc += y[i];
        } else if (y[i] == 0.0) {
            return std::numeric_limits<double>::infinity();
        } else {
            acc += x[i] * std::log(x[i] / y[i]) + y[i] - x[i];
        }
    }
    return acc;
}

double converged_objective(const Matrix& thetas, const Vector& bar, const Matrix& left_marginals,
                           double epsilon, double gamma) {
    const double n_tasks = static_cast<double>(thetas.cols());
    return gamma * (thetas.sum() + n_tasks * bar.sum()) -
           (epsilon + 2.0 * gamma) * left_marginals.sum();
}

double plan_objective(const Vector& left, const Vector& right, const Vector& log_u,
                      const Vector& log_v, const Kernel& kernel, double gamma) {
    const double eps = kernel.epsilon();
    const Vector log_kv = kernel.log_apply(log_v);
    const Vector log_ktu = kernel.log_apply_transpose(log_u);
    const Vector row_sums = (log_u + log_kv).array().exp().matrix();
    const Vector col_sums = (log_v + log_ktu).array().exp().matrix();
    // <P, M> - eps E(P) = eps sum_ij P_ij (log u_i + log v_j - 1) since log P = log u + log v - M / eps.
    double transport = -row_sums.sum();
    for (Index i = 0; i < row_sums.size(); ++i) {
        transport += xlogy_term(row_sums[i], log_u[i]);
        transport += xlogy_term(col_sums[i], log_v[i]);
    }
    return eps * transport + gamma * kl_divergence(row_sums, left) +
           gamma * kl_divergence(col_sums, right);
}

namespace {

struct PairRun {
    bool finite = true;
    bool converged = false;
    int iterations = 0;
    Vector log_u, log_v;
    Vector left_marginal;
};

PairRun pair_linear(const Vector& a, const Vector& b, const Kernel& kernel, double frac,
                    const SinkhornOptions& options) {
    PairRun run;
    const Index p = a.size();
    Vector u = Vector::Ones(p);
    Vector v = Vector::Ones(p);
    Vector kv = kernel.apply(v);
    Vector m = u.cwiseProduct(kv);
    for (int it = 0; it < options.max_iter; ++it) {
        u = ratio_pow(a, kv, frac);
        const Vector ktu = kernel.apply_transpose(u);
        v = ratio_pow(b, ktu, frac);
        kv = kernel.apply(v);
        const Vector m_new = u.cwiseProduct(kv);
        run.iterations = it + 1;
        if (!u.allFinite() || !v.allFinite() || !m_new.allFinite()) {
            run.finite = false;
            return run;
        }
        const double delta = relative_change(m_new, m);
        m = m_new;
        if (delta < options.tol) {
            run.converged = true;
            break;
        }
    }
    run.log_u = u.array().log().matrix();
    run.log_v = v.array().log().matrix();
    run.left_marginal = m;
    return run;
}

PairRun pair_log(const Vector& a, const Vector& b, const Kernel& kernel, double frac,
                 const SinkhornOptions& options) {
    PairRun run;
    const Index p = a.size();
    auto log_or_neg_inf = [](double x) { return x == 0.0 ? kNegInf : std::log(x); };
    const Vector log_a = a.unaryExpr(log_or_neg_inf);
    const Vector log_b = b.unaryExpr(log_or_neg_inf);
    Vector log_u = Vector::Zero(p);
    Vector log_v = Vector::Zero(p);
    Vector log_kv = kernel.log_apply(log_v);
    Vector m = (log_u + log_kv).array().exp().matrix();
    for (int it = 0; it < options.max_iter; ++it) {
        log_u = frac * (log_a - log_kv);
        const Vector log_ktu = kernel.log_apply_transpose(log_u);
        log_v = frac * (log_b - log_ktu);
        log_kv = kernel.log_apply(log_v);
        const Vector m_new = (log_u + log_kv).array().exp().matrix();
        run.iterations = it + 1;
        const double delta = relative_change(m_new, m);
        m = m_new;
        if (delta < options.tol) {
            run.converged = true;
            break;
        }
    }
    run.log_u = log_u;
    run.log_v = log_v;
    run.left_marginal = m;
    return run;
}

}  // namespace

DistanceResult unbalanced_distance(const Vector& a, const Vector& b, const Kernel& kernel,
                                   double gamma, SinkhornOptions options) {
    if (a.size() != kernel.size() || b.size() != kernel.size())
        throw Error(ErrorCode::ShapeMismatch, "inputs do not match the kernel dimension");
    if ((a.array() < 0.0).any() || (b.array() < 0.0).any())
        throw Error(ErrorCode::InvalidParameter, "inputs must be nonnegative");
    if (!(gamma > 0.0)) throw Error(ErrorCode::InvalidParameter, "gamma must be > 0");

    DistanceResult result;
    if (a.sum() == 0.0 || b.sum() == 0.0) {
        result.converged = true;
        result.scalings = ScalingState::ones(a.size(), 1);
        return result;
    }

    const double eps = kernel.epsilon();
    const double frac = gamma / (gamma + eps);
    PairRun run = pair_linear(a, b, kernel, frac, options);
    if (!run.finite) {
        run = pair_log(a, b, kernel, frac, options);
        result.scalings.log_domain = true;
    }

    // Dual objective; the eps * sum(K) constant of the dual cancels against G's entropy offset.
    const double power = -eps / gamma;
    double value = -eps * run.left_marginal.sum();
    for (Index i = 0; i < a.size(); ++i) {
        if (a[i] > 0.0) value -= gamma * a[i] * (std::exp(power * run.log_u[i]) - 1.0);
        if (b[i] > 0.0) value -= gamma * b[i] * (std::exp(power * run.log_v[i]) - 1.0);
    }
    result.value = value;
    result.converged = run.converged;
    result.iterations = run.iterations;
    if (result.scalings.log_domain) {
        result.scalings.log_u = run.log_u;
        result.scalings.log_v = run.log_v;
    } else {
        result.scalings.u = run.log_u.array().exp().matrix();
        result.scalings.v = run.log_v.array().exp().matrix();
    }
    return result;
}

BarycenterResult barycenter(const Matrix& thetas, const Kernel& kernel, double gamma,
                            const SinkhornOptions& options, const ScalingState* warm) {
    check_inputs(thetas, kernel, gamma);
    const Index p = thetas.rows();
    const Index n_tasks = thetas.cols();
    const double eps = kernel.epsilon();
    const double frac = gamma / (gamma + eps);

    BarycenterResult result;
    ScalingState& s = result.scalings;
    if (warm != nullptr) {
        if (warm->n_features() != p || warm->n_tasks() != n_tasks)
            throw Error(ErrorCode::ShapeMismatch, "warm-start scalings have the wrong shape");
        if (warm->log_domain) {
            s.u = warm->log_u.array().exp().matrix();
            s.v = warm->log_v.array().exp().matrix();
        } else {
            s = *warm;
        }
    } else {
        s = ScalingState::ones(p, n_tasks);
    }

    Matrix kv(p, n_tasks), ktu(p, n_tasks);
    for (Index t = 0; t < n_tasks; ++t) kv.col(t) = kernel.apply(s.v.col(t));

    Vector bar = Vector::Ones(p);
    Vector bar_old = bar;
    for (int it = 0; it < options.max_iter; ++it) {
        const Matrix u_before = s.u;
        const Matrix v_before = s.v;
        for (Index t = 0; t < n_tasks; ++t) {
            s.u.col(t) = ratio_pow(thetas.col(t), kv.col(t), frac);
            ktu.col(t) = kernel.apply_transpose(s.u.col(t));
        }
        bar = power_mean(ktu, 1.0 - frac);
        for (Index t = 0; t < n_tasks; ++t) s.v.col(t) = ratio_pow(bar, ktu.col(t), frac);
        result.iterations = it + 1;
        if (!s.u.allFinite() || !s.v.allFinite() || !bar.allFinite()) {
            result.overflowed = true;
            s.u = u_before;
            s.v = v_before;
            result.barycenter = bar_old;
            return result;
        }
        for (Index t = 0; t < n_tasks; ++t) kv.col(t) = kernel.apply(s.v.col(t));
        const double cstr = relative_change(bar, bar_old);
        bar_old = bar;
        result.constraint_trace.push_back(cstr);
        if (cstr < options.tol) {
            result.converged = true;
            break;
        }
    }
    result.barycenter = bar;
    result.left_marginals = s.u.cwiseProduct(kv);
    if (!result.left_marginals.allFinite()) {
        result.overflowed = true;
        return result;
    }
    result.objective = converged_objective(thetas, bar, result.left_marginals, eps, gamma);
    return result;
}

BarycenterResult barycenter_log(const Matrix& thetas, const Kernel& kernel, double gamma,
                                const SinkhornOptions& options, const ScalingState* warm) {
    check_inputs(thetas, kernel, gamma);
    const Index p = thetas.rows();
    const Index n_tasks = thetas.cols();
    const double eps = kernel.epsilon();
    const double frac = gamma / (gamma + eps);
    const double inv_power = 1.0 / (1.0 - frac);
    const double log_tasks = std::log(static_cast<double>(n_tasks));

    BarycenterResult result;
    ScalingState& s = result.scalings;
    if (warm != nullptr) {
        if (warm->n_features() != p || warm->n_tasks() != n_tasks)
            throw Error(ErrorCode::ShapeMismatch, "warm-start scalings have the wrong shape");
        s = warm->to_log();
    } else {
        s = ScalingState::ones(p, n_tasks).to_log();
    }
    s.u.resize(0, 0);
    s.v.resize(0, 0);

    const Matrix log_thetas = (thetas.array() + kLogFloor).log().matrix();
    Matrix log_kv(p, n_tasks), log_ktu(p, n_tasks);
    for (Index t = 0; t < n_tasks; ++t) log_kv.col(t) = kernel.log_apply(s.log_v.col(t));

    Vector bar = Vector::Ones(p);
    Vector bar_old = bar;
    Vector log_bar(p);
    Vector scratch(n_tasks);
    for (int it = 0; it < options.max_iter; ++it) {
        for (Index t = 0; t < n_tasks; ++t) {
            s.log_u.col(t) = frac * (log_thetas.col(t) - log_kv.col(t));
            log_ktu.col(t) = kernel.log_apply_transpose(s.log_u.col(t));
        }
        for (Index j = 0; j < p; ++j) {
            scratch = (1.0 - frac) * log_ktu.row(j).transpose();
            log_bar[j] = inv_power * (log_sum_exp(scratch) - log_tasks);
        }
        bar = log_bar.array().exp().matrix();
        for (Index t = 0; t < n_tasks; ++t) {
            s.log_v.col(t) = frac * (log_bar - log_ktu.col(t));
            log_kv.col(t) = kernel.log_apply(s.log_v.col(t));
        }
        result.iterations = it + 1;
        const double cstr = relative_change(bar, bar_old);
        bar_old = bar;
        result.constraint_trace.push_back(cstr);
        if (cstr < options.tol) {
            result.converged = true;
            break;
        }
    }
    result.barycenter = bar;
    result.left_marginals = (s.log_u + log_kv).array().exp().matrix();
    result.objective = converged_objective(thetas, bar, result.left_marginals, eps, gamma);
    return result;
}

}  // namespace otmtr::ot
