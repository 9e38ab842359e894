#pragma once

// Reference computations used only by the tests. They are deliberately naive: dense
// matrices, explicit plans and 1-D searches, independent of the library's code paths.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Golden-section search driven by a comparison less(x, y) <=> f(x) < f(y), so callers can
// supply a cancellation-free difference instead of two rounded function values.
inline double golden_section_cmp(const std::function<bool(double, double)>& less, double lo,
                                 double hi, int iters = 400) {
    const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - ratio * (b - a), d = a + ratio * (b - a);
    for (int i = 0; i < iters && b - a > 1e-15 * (1.0 + std::abs(a)); ++i) {
        if (less(c, d)) {
            b = d;
            d = c;
            c = b - ratio * (b - a);
        } else {
            a = c;
            c = d;
            d = a + ratio * (b - a);
        }
    }
    return 0.5 * (a + b);
}

// Minimizer of 1/2 (x - y)^2 + alpha (x - a log x + b x) on [lo, hi].
inline double prox_by_search(double y, double alpha, double a, double b, double lo = 1e-8,
                             double hi = 50.0) {
    // f(x) - f(z) written without cancellation.
    auto less = [&](double x, double z) {
        const double diff = (x - z) * (0.5 * (x + z) - y + alpha * (1.0 + b)) -
                            alpha * a * std::log1p((x - z) / z);
        return diff < 0.0;
    };
    return golden_section_cmp(less, lo, hi);
}

inline double golden_section(const std::function<double(double)>& f, double lo, double hi,
                             int iters = 400) {
    const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - ratio * (b - a), d = a + ratio * (b - a);
    double fc = f(c), fd = f(d);
    for (int i = 0; i < iters && b - a > 1e-15 * (1.0 + std::abs(a)); ++i) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

// Root of an increasing function on (lo, hi) by bisection.
inline double bisect(const std::function<double(double)>& g, double lo, double hi, int iters = 200) {
    for (int i = 0; i < iters; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (g(mid) > 0.0) hi = mid; else lo = mid;
    }
    return 0.5 * (lo + hi);
}

inline double kl(const Vector& x, const Vector& y) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (x[i] > 0.0) {
            if (y[i] <= 0.0) return std::numeric_limits<double>::infinity();
            acc += x[i] * std::log(x[i] / y[i]);
        }
        acc += y[i] - x[i];
    }
    return acc;
}

// G(P, a, b) = <P, M> + eps sum P (log P - 1) + gamma KL(P1 | a) + gamma KL(P^T 1 | b)
inline double G(const Matrix& P, const Vector& a, const Vector& b, const Matrix& M, double eps,
                double gamma) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < P.rows(); ++i)
        for (Eigen::Index j = 0; j < P.cols(); ++j) {
            acc += P(i, j) * M(i, j);
            if (P(i, j) > 0.0) acc += eps * P(i, j) * (std::log(P(i, j)) - 1.0);
        }
    return acc + gamma * kl(P.rowwise().sum(), a) + gamma * kl(P.colwise().sum().transpose(), b);
}

// Cyclic exact coordinate minimization of G over the entries of P. Rows with a_i = 0 and
// columns with b_j = 0 are pinned at 0 (any mass there costs +inf).
inline double min_G(const Vector& a, const Vector& b, const Matrix& M, double eps, double gamma,
                    int sweeps = 3000) {
    const Eigen::Index p = a.size();
    Matrix P = Matrix::Zero(p, p);
    for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index j = 0; j < p; ++j)
            if (a[i] > 0.0 && b[j] > 0.0) P(i, j) = std::sqrt(a[i] * b[j]) / p;
    for (int s = 0; s < sweeps; ++s) {
        for (Eigen::Index i = 0; i < p; ++i)
            for (Eigen::Index j = 0; j < p; ++j) {
                if (P(i, j) == 0.0) continue;
                const double row_rest = P.row(i).sum() - P(i, j);
                const double col_rest = P.col(j).sum() - P(i, j);
                auto deriv = [&](double lx) {
                    const double x = std::exp(lx);
                    return M(i, j) + eps * lx + gamma * std::log((row_rest + x) / a[i]) +
                           gamma * std::log((col_rest + x) / b[j]);
                };
                P(i, j) = std::exp(bisect(deriv, -60.0, 20.0, 120));
            }
    }
    return G(P, a, b, M, eps, gamma);
}

// min over (P^1..P^T, bar) of sum_t G(P^t, theta^t, bar). For fixed plans the optimal bar is
// the mean of the column sums, so only the plans are searched.
inline double min_barycenter_objective(const std::vector<Vector>& thetas, const Matrix& M,
                                       double eps, double gamma, int sweeps = 4000) {
    const std::size_t T = thetas.size();
    const Eigen::Index p = M.rows();
    std::vector<Matrix> P(T, Matrix::Zero(p, p));
    for (std::size_t t = 0; t < T; ++t)
        for (Eigen::Index i = 0; i < p; ++i)
            if (thetas[t][i] > 0.0) P[t].row(i).setConstant(thetas[t][i] / p);
    auto bar_of = [&]() {
        Vector bar = Vector::Zero(p);
        for (const auto& plan : P) bar += plan.colwise().sum().transpose();
        return Vector(bar / static_cast<double>(T));
    };
    for (int s = 0; s < sweeps; ++s)
        for (std::size_t t = 0; t < T; ++t)
            for (Eigen::Index i = 0; i < p; ++i)
                for (Eigen::Index j = 0; j < p; ++j) {
                    if (thetas[t][i] == 0.0) continue;
                    const double row_rest = P[t].row(i).sum() - P[t](i, j);
                    const double col_rest = P[t].col(j).sum() - P[t](i, j);
                    double others = 0.0;
                    for (std::size_t r = 0; r < T; ++r)
                        if (r != t) others += P[r].col(j).sum();
                    auto deriv = [&](double lx) {
                        const double x = std::exp(lx);
                        const double col = col_rest + x;
                        const double bar_j = (others + col) / static_cast<double>(T);
                        return M(i, j) + eps * lx + gamma * std::log((row_rest + x) / thetas[t][i]) +
                               gamma * std::log(col / bar_j);
                    };
                    P[t](i, j) = std::exp(bisect(deriv, -60.0, 20.0, 100));
                }
    const Vector bar = bar_of();
    double total = 0.0;
    for (std::size_t t = 0; t < T; ++t) total += G(P[t], thetas[t], bar, M, eps, gamma);
    return total;
}

// Loss with explicit plans: sum_t [1/(2n)||X^t theta^t - Y^t||^2 + lambda |theta_pos + theta_neg|_1]
// + mu/T sum_t [G(P_pos^t, theta_pos^t, bar_pos) + G(P_neg^t, theta_neg^t, bar_neg)],
// a G term counting 0 when its coefficient or barycenter is zero.
struct ExplicitState {
    Matrix theta_pos, theta_neg;  // p x T
    std::vector<Matrix> plans_pos, plans_neg;
    Vector bar_pos, bar_neg;
};

inline double explicit_loss(const ExplicitState& s, const std::vector<Matrix>& X,
                            const std::vector<Vector>& Y, const Matrix& M, double eps,
                            double gamma_pos, double gamma_neg, double mu, double lambda) {
    const std::size_t T = X.size();
    const double n = static_cast<double>(X.front().rows());
    double loss = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
        const auto k = static_cast<Eigen::Index>(t);
        const Vector theta = s.theta_pos.col(k) - s.theta_neg.col(k);
        loss += (X[t] * theta - Y[t]).squaredNorm() / (2.0 * n);
        loss += lambda * (s.theta_pos.col(k).sum() + s.theta_neg.col(k).sum());
        if (mu == 0.0) continue;
        if (s.theta_pos.col(k).sum() > 0.0 && s.bar_pos.sum() > 0.0)
            loss += mu / T * G(s.plans_pos[t], s.theta_pos.col(k), s.bar_pos, M, eps, gamma_pos);
        if (s.theta_neg.col(k).sum() > 0.0 && s.bar_neg.sum() > 0.0)
            loss += mu / T * G(s.plans_neg[t], s.theta_neg.col(k), s.bar_neg, M, eps, gamma_neg);
    }
    return loss;
}

// Lasso objective minimized by proximal gradient (ISTA) with the exact Lipschitz step.
inline Vector lasso_ista(const Matrix& X, const Vector& y, double lambda, int iters) {
    const double n = static_cast<double>(X.rows());
    const double L = Eigen::SelfAdjointEigenSolver<Matrix>(X.transpose() * X / n).eigenvalues().maxCoeff();
    Vector theta = Vector::Zero(X.cols());
    for (int k = 0; k < iters; ++k) {
        const Vector z = theta - X.transpose() * (X * theta - y) / (n * L);
        for (Eigen::Index j = 0; j < z.size(); ++j)
            theta[j] = std::copysign(std::max(std::abs(z[j]) - lambda / L, 0.0), z[j]);
    }
    return theta;
}

// Dirty objective minimized by joint proximal gradient on (C, S); the gradient is shared by both
// blocks, so the step uses twice the largest per-task curvature.
inline std::pair<Matrix, Matrix> dirty_ista(const std::vector<Matrix>& X, const std::vector<Vector>& Y,
                                            double mu, double lambda, int iters) {
    const auto T = static_cast<Eigen::Index>(X.size());
    const Eigen::Index p = X[0].cols();
    const double n = static_cast<double>(X[0].rows());
    double L = 0.0;
    for (const auto& x : X)
        L = std::max(L, Eigen::SelfAdjointEigenSolver<Matrix>(x.transpose() * x / n).eigenvalues().maxCoeff());
    L *= 2.0;
    Matrix C = Matrix::Zero(p, T), S = Matrix::Zero(p, T), grad(p, T);
    for (int k = 0; k < iters; ++k) {
        for (Eigen::Index t = 0; t < T; ++t) {
            const auto i = static_cast<std::size_t>(t);
            grad.col(t) = X[i].transpose() * (X[i] * (C.col(t) + S.col(t)) - Y[i]) / n;
        }
        Matrix zc = C - grad / L, zs = S - grad / L;
        for (Eigen::Index j = 0; j < p; ++j) {
            const double norm = zc.row(j).norm();
            C.row(j) = (norm > mu / L ? 1.0 - mu / L / norm : 0.0) * zc.row(j);
            for (Eigen::Index t = 0; t < T; ++t)
                S(j, t) = std::copysign(std::max(std::abs(zs(j, t)) - lambda / L, 0.0), zs(j, t));
        }
    }
    return {C, S};
}

inline double average_precision_bruteforce(const Vector& est, const std::vector<Eigen::Index>& truth) {
    // Enumerate every cut "|est| >= level" over the distinct levels, descending.
    std::vector<double> levels;
    for (Eigen::Index j = 0; j < est.size(); ++j) levels.push_back(std::abs(est[j]));
    std::sort(levels.begin(), levels.end(), std::greater<>());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    double prev_recall = 0.0, ap = 0.0;
    for (double level : levels) {
        double selected = 0.0, hits = 0.0;
        for (Eigen::Index j = 0; j < est.size(); ++j) {
            if (std::abs(est[j]) >= level) {
                selected += 1.0;
                if (std::find(truth.begin(), truth.end(), j) != truth.end()) hits += 1.0;
            }
        }
        const double recall = hits / static_cast<double>(truth.size());
        ap += (recall - prev_recall) * hits / selected;
        prev_recall = recall;
    }
    return ap;
}

}  // namespace oracle
