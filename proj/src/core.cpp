#include "otmtr/core.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace otmtr {

const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::NonFinite: return "NonFinite";
        case ErrorCode::Empty: return "Empty";
        case ErrorCode::DegenerateMass: return "DegenerateMass";
        case ErrorCode::ZeroMedian: return "ZeroMedian";
        case ErrorCode::InvalidParameter: return "InvalidParameter";
        case ErrorCode::IndivisibleGrid: return "IndivisibleGrid";
        case ErrorCode::SupportCollision: return "SupportCollision";
        case ErrorCode::EmptyTruth: return "EmptyTruth";
        case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

bool all_finite(const Eigen::Ref<const Matrix>& m) { return m.allFinite(); }

void validate_problem(const MultiTaskProblem& problem) {
    if (problem.designs.empty()) throw Error(ErrorCode::Empty, "no tasks");
    if (problem.targets.size() != problem.designs.size())
        throw Error(ErrorCode::ShapeMismatch, "number of designs and targets differ");
    const Index n = problem.designs.front().rows();
    const Index p = problem.designs.front().cols();
    if (n == 0 || p == 0) throw Error(ErrorCode::Empty, "design has no rows or no columns");
    for (std::size_t t = 0; t < problem.designs.size(); ++t) {
        const auto& x = problem.designs[t];
        const auto& y = problem.targets[t];
        if (x.rows() != n || x.cols() != p)
            throw Error(ErrorCode::ShapeMismatch, "design " + std::to_string(t) + " is " +
                                                      std::to_string(x.rows()) + "x" +
                                                      std::to_string(x.cols()) + ", expected " +
                                                      std::to_string(n) + "x" + std::to_string(p));
        if (y.size() != n)
            throw Error(ErrorCode::ShapeMismatch,
                        "target " + std::to_string(t) + " has length " + std::to_string(y.size()));
        if (!x.allFinite()) throw Error(ErrorCode::NonFinite, "design " + std::to_string(t));
        if (!y.allFinite()) throw Error(ErrorCode::NonFinite, "target " + std::to_string(t));
    }
}

void validate_hyperparams(const MtwHyperparams& params) {
    auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidParameter, what); };
    if (!(params.mu >= 0.0) || !std::isfinite(params.mu)) fail("mu must be >= 0");
    if (!(params.lambda >= 0.0) || !std::isfinite(params.lambda)) fail("lambda must be >= 0");
    if (params.epsilon && !(*params.epsilon > 0.0)) fail("epsilon must be > 0");
    if (params.gamma && !(*params.gamma > 0.0)) fail("gamma must be > 0");
    if (!(params.tau > 0.0 && params.tau < 1.0)) fail("tau must lie in (0, 1)");
    if (!(params.tol_outer > 0.0 && params.tol_sinkhorn > 0.0 && params.tol_cd > 0.0))
        fail("tolerances must be > 0");
    if (params.max_outer < 1 || params.max_sinkhorn < 1 || params.max_cd < 1)
        fail("iteration caps must be >= 1");
}

double resolve_gamma(const MtwHyperparams& params, const std::vector<double>& masses) {
    if (params.gamma) return *params.gamma;
    if (masses.empty()) throw Error(ErrorCode::DegenerateMass, "no masses given");
    double root_sum = 0.0;
    for (double m : masses) {
        if (!(m >= 0.0)) throw Error(ErrorCode::InvalidParameter, "masses must be >= 0");
        root_sum += std::sqrt(m);
    }
    if (root_sum == 0.0) throw Error(ErrorCode::DegenerateMass, "all masses are zero");
    const double mean_root = root_sum / static_cast<double>(masses.size());
    return params.tau * mean_root * mean_root;
}

namespace {

double dense_median(const Matrix& costs) {
    std::vector<double> values(costs.data(), costs.data() + costs.size());
    const std::size_t mid = values.size() / 2;
    std::nth_element(values.begin(), values.begin() + mid, values.end());
    const double upper = values[mid];
    if (values.size() % 2 == 1) return upper;
    const double lower = *std::max_element(values.begin(), values.begin() + mid);
    return 0.5 * (lower + upper);
}

// Exact median of (dr^2 + dc^2) over all ordered pixel pairs, from offset multiplicities.
double grid_median(Index height, Index width) {
    std::map<long long, long long> histogram;
    for (Index dr = -(height - 1); dr <= height - 1; ++dr) {
        for (Index dc = -(width - 1); dc <= width - 1; ++dc) {
            const long long cost = static_cast<long long>(dr * dr + dc * dc);
            histogram[cost] += static_cast<long long>((height - std::abs(dr)) * (width - std::abs(dc)));
        }
    }
    const long long total = static_cast<long long>(height * width) * (height * width);
    // 0-based ranks of the middle order statistics.
    const long long hi_rank = total / 2;
    const long long lo_rank = (total % 2 == 1) ? hi_rank : hi_rank - 1;
    long long seen = 0;
    double lo = 0.0, hi = 0.0;
    bool have_lo = false;
    for (const auto& [cost, count] : histogram) {
        const long long next = seen + count;
        if (!have_lo && lo_rank < next) {
            lo = static_cast<double>(cost);
            have_lo = true;
        }
        if (hi_rank < next) {
            hi = static_cast<double>(cost);
            break;
        }
        seen = next;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

GroundMetric GroundMetric::dense(Matrix costs) {
    if (costs.rows() != costs.cols() || costs.rows() == 0)
        throw Error(ErrorCode::ShapeMismatch, "ground metric must be a non-empty square matrix");
    if (!costs.allFinite()) throw Error(ErrorCode::NonFinite, "ground metric");
    if ((costs.array() < 0.0).any())
        throw Error(ErrorCode::InvalidParameter, "ground metric has negative entries");
    if (costs.diagonal().cwiseAbs().maxCoeff() != 0.0)
        throw Error(ErrorCode::InvalidParameter, "ground metric must have a zero diagonal");
    GroundMetric metric;
    metric.median_ = dense_median(costs);
    metric.costs_ = std::move(costs);
    return metric;
}

GroundMetric GroundMetric::grid2d(Index height, Index width, double scale) {
    if (height < 1 || width < 1) throw Error(ErrorCode::Empty, "grid must be at least 1x1");
    if (!(scale > 0.0) || !std::isfinite(scale))
        throw Error(ErrorCode::InvalidParameter, "grid cost scale must be > 0");
    GroundMetric metric;
    metric.grid_ = true;
    metric.height_ = height;
    metric.width_ = width;
    metric.scale_ = scale;
    metric.median_ = scale * grid_median(height, width);
    return metric;
}

Index GroundMetric::size() const { return grid_ ? height_ * width_ : costs_.rows(); }

double GroundMetric::cost(Index i, Index j) const {
    if (!grid_) return costs_(i, j);
    const Index dr = i / width_ - j / width_;
    const Index dc = i % width_ - j % width_;
    return scale_ * static_cast<double>(dr * dr + dc * dc);
}

Matrix GroundMetric::materialize() const {
    if (!grid_) return costs_;
    const Index p = size();
    Matrix m(p, p);
    for (Index j = 0; j < p; ++j)
        for (Index i = 0; i < p; ++i) m(i, j) = cost(i, j);
    return m;
}

GroundMetric GroundMetric::normalized() const {
    if (median_ <= 0.0) throw Error(ErrorCode::ZeroMedian, "cannot normalize a zero-median metric");
    if (grid_) return grid2d(height_, width_, scale_ / median_);
    return dense(costs_ / median_);
}

double resolve_epsilon(const GroundMetric& metric, Index p) {
    const double s = metric.median_cost();
    if (!(s > 0.0)) throw Error(ErrorCode::ZeroMedian, "median ground cost is zero");
    if (p < 1) throw Error(ErrorCode::Empty, "p must be >= 1");
    return 1.0 / (s * static_cast<double>(p));
}

std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
    // splitmix64 finalizer chained over the path
    auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    std::uint64_t state = mix(master);
    for (std::uint64_t step : path) state = mix(state ^ mix(step + 0x632be59bd9b4e019ULL));
    return state;
}

}  // namespace otmtr
