#pragma once

#include <vector>

#include "otmtr/core.hpp"

namespace otmtr::metrics {

/// Average precision of the ranking by |estimate| against the true support: the sum over
/// distinct |estimate| thresholds of precision times recall gained. Tied features enter
/// together, so an all-zero estimate scores |truth| / p. Throws Error{EmptyTruth}.
double pr_auc(const Vector& estimate, const std::vector<Index>& truth_support);

/// Mean squared difference between two coefficient vectors.
double mse(const Vector& estimate, const Vector& truth);

/// F1 of {j : |estimate_j| > threshold} against the true support.
double support_f1(const Vector& estimate, const std::vector<Index>& truth_support,
                  double threshold = 0.0);

std::vector<Index> support_of(const Vector& coefficients);

struct EvalResult {
    std::vector<double> auc_pr;
    double mean_auc_pr = 0.0;
    std::vector<double> mse;
    std::vector<double> support_f1;
};

/// Column-wise scores of `estimate` (p x T) against `truth` (p x T).
EvalResult evaluate(const Matrix& estimate, const Matrix& truth, double threshold = 0.0);

}  // namespace otmtr::metrics
