#include "otmtr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace otmtr::metrics {

namespace {

std::vector<char> membership(Index p, const std::vector<Index>& support) {
    if (support.empty()) throw Error(ErrorCode::EmptyTruth, "true support is empty");
    std::vector<char> in(static_cast<std::size_t>(p), 0);
    for (Index j : support) {
        if (j < 0 || j >= p) throw Error(ErrorCode::ShapeMismatch, "support index out of range");
        in[static_cast<std::size_t>(j)] = 1;
    }
    return in;
}

}  // namespace

double pr_auc(const Vector& estimate, const std::vector<Index>& truth_support) {
    const Index p = estimate.size();
    const std::vector<char> in = membership(p, truth_support);
    if (!estimate.allFinite()) throw Error(ErrorCode::NonFinite, "estimate");
    double positives = 0.0;
    for (char c : in) positives += c;

    std::vector<Index> order(static_cast<std::size_t>(p));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index i, Index j) {
        return std::abs(estimate[i]) > std::abs(estimate[j]);
    });

    double area = 0.0, hits = 0.0;
    std::size_t pos = 0;
    while (pos < order.size()) {
        const double level = std::abs(estimate[order[pos]]);
        double new_hits = 0.0;
        for (; pos < order.size() && std::abs(estimate[order[pos]]) == level; ++pos)
            new_hits += in[static_cast<std::size_t>(order[pos])];
        hits += new_hits;
        if (new_hits > 0.0) area += (new_hits / positives) * (hits / static_cast<double>(pos));
    }
    return area;
}

double mse(const Vector& estimate, const Vector& truth) {
    if (estimate.size() != truth.size()) throw Error(ErrorCode::ShapeMismatch, "mse lengths differ");
    if (estimate.size() == 0) throw Error(ErrorCode::Empty, "mse of empty vectors");
    return (estimate - truth).squaredNorm() / static_cast<double>(estimate.size());
}

double support_f1(const Vector& estimate, const std::vector<Index>& truth_support, double threshold) {
    const std::vector<char> in = membership(estimate.size(), truth_support);
    double selected = 0.0, hits = 0.0;
    for (Index j = 0; j < estimate.size(); ++j) {
        if (std::abs(estimate[j]) > threshold) {
            selected += 1.0;
            hits += in[static_cast<std::size_t>(j)];
        }
    }
    if (hits == 0.0) return 0.0;
    const double precision = hits / selected;
    const double recall = hits / static_cast<double>(truth_support.size());
    return 2.0 * precision * recall / (precision + recall);
}

std::vector<Index> support_of(const Vector& coefficients) {
    std::vector<Index> support;
    for (Index j = 0; j < coefficients.size(); ++j)
        if (coefficients[j] != 0.0) support.push_back(j);
    return support;
}

EvalResult evaluate(const Matrix& estimate, const Matrix& truth, double threshold) {
    if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols())
        throw Error(ErrorCode::ShapeMismatch, "estimate and truth shapes differ");
    EvalResult result;
    for (Index t = 0; t < truth.cols(); ++t) {
        const std::vector<Index> support = support_of(truth.col(t));
        result.auc_pr.push_back(pr_auc(estimate.col(t), support));
        result.mse.push_back(mse(estimate.col(t), truth.col(t)));
        result.support_f1.push_back(support_f1(estimate.col(t), support, threshold));
    }
    result.mean_auc_pr = std::accumulate(result.auc_pr.begin(), result.auc_pr.end(), 0.0) /
                         static_cast<double>(result.auc_pr.size());
    return result;
}

}  // namespace otmtr::metrics
