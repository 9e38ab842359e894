#pragma once

#include <cstdint>
#include <vector>

#include "otmtr/core.hpp"

// Synthetic image-grid benchmark: sparse coefficients on a 2-D grid observed through a
// Gaussian blur followed by block averaging.
namespace otmtr::simulate {

struct GridScenario {
    Index height = 24;
    Index width = 24;
    Index n_tasks = 3;
    Index sparsity = 4;
    double overlap = 0.0;  // fraction of support positions shared by all tasks
    double snr = 3.0;
    double amp_low = 20.0;
    double amp_high = 30.0;
    double blur_sigma = 1.0;
    Index pool_height = 4;
    Index pool_width = 4;
    std::uint64_t seed = 0;
};

void validate_scenario(const GridScenario& scenario);

struct GroundTruth {
    Matrix coefficients;                        // p x T, nonnegative
    std::vector<std::vector<Index>> supports;   // sorted pixel indices per task
    Matrix design;                              // n x p, shared by all tasks
    std::vector<Vector> targets;
    double sigma2 = 0.0;

    MultiTaskProblem problem() const;
};

/// Blur (Gaussian, truncated at ceil(4 sigma), zero padding with per-pixel renormalization)
/// followed by the mean over pool blocks, as an explicit n x p operator on row-major pixels.
/// sigma = 0 gives pure block averaging. Throws Error{IndivisibleGrid}.
Matrix make_design(Index height, Index width, double blur_sigma, Index pool_height,
                   Index pool_width);

/// k anchors are drawn uniformly without replacement; the first round(overlap k) are shared.
/// Every other anchor is moved, independently per task, by one of the in-bounds axis-aligned
/// shifts of 1 or 2 pixels. Draws are rejected until all positions are distinct
/// (Error{SupportCollision} after 100 attempts). sigma2 = sum_t ||X theta^t||^2 / (T snr^2).
GroundTruth make_truth(const GridScenario& scenario);

}  // namespace otmtr::simulate
