#include "otmtr/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

namespace otmtr::simulate {

namespace {

// 1-D blur along an axis of length n, rows renormalized over the in-bounds taps.
Matrix blur_1d(Index n, double sigma) {
    if (sigma == 0.0) return Matrix::Identity(n, n);
    const Index radius = static_cast<Index>(std::ceil(4.0 * sigma));
    Matrix b = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i) {
        for (Index k = std::max<Index>(0, i - radius); k <= std::min(n - 1, i + radius); ++k) {
            const double d = static_cast<double>(k - i);
            b(i, k) = std::exp(-d * d / (2.0 * sigma * sigma));
        }
        b.row(i) /= b.row(i).sum();
    }
    return b;
}

Matrix pool_1d(Index n, Index block) {
    Matrix a = Matrix::Zero(n / block, n);
    for (Index i = 0; i < n / block; ++i) a.block(i, i * block, 1, block).setConstant(1.0 / block);
    return a;
}

}  // namespace

void validate_scenario(const GridScenario& s) {
    auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidParameter, what); };
    if (s.height < 1 || s.width < 1) fail("grid must be at least 1x1");
    if (s.n_tasks < 1) fail("need at least one task");
    if (s.sparsity < 1 || s.sparsity > s.height * s.width) fail("sparsity must lie in [1, p]");
    if (!(s.overlap >= 0.0 && s.overlap <= 1.0)) fail("overlap must lie in [0, 1]");
    if (!(s.snr > 0.0)) fail("snr must be > 0");
    if (!(s.amp_low > 0.0 && s.amp_low <= s.amp_high)) fail("need 0 < amp_low <= amp_high");
    if (!(s.blur_sigma >= 0.0)) fail("blur_sigma must be >= 0");
    if (s.pool_height < 1 || s.pool_width < 1) fail("pool blocks must be at least 1x1");
    if (s.height % s.pool_height != 0 || s.width % s.pool_width != 0)
        throw Error(ErrorCode::IndivisibleGrid, "grid is not divisible by the pool block");
}

Matrix make_design(Index height, Index width, double blur_sigma, Index pool_height,
                   Index pool_width) {
    if (height < 1 || width < 1 || pool_height < 1 || pool_width < 1)
        throw Error(ErrorCode::InvalidParameter, "grid and pool sizes must be >= 1");
    if (!(blur_sigma >= 0.0)) throw Error(ErrorCode::InvalidParameter, "blur_sigma must be >= 0");
    if (height % pool_height != 0 || width % pool_width != 0)
        throw Error(ErrorCode::IndivisibleGrid, "grid is not divisible by the pool block");
    const Matrix rows = pool_1d(height, pool_height) * blur_1d(height, blur_sigma);
    const Matrix cols = pool_1d(width, pool_width) * blur_1d(width, blur_sigma);
    // Row-major pixels and blocks: the operator is the Kronecker product rows (x) cols.
    Matrix design(rows.rows() * cols.rows(), height * width);
    for (Index bi = 0; bi < rows.rows(); ++bi)
        for (Index bj = 0; bj < cols.rows(); ++bj)
            for (Index r = 0; r < height; ++r)
                for (Index c = 0; c < width; ++c)
                    design(bi * cols.rows() + bj, r * width + c) = rows(bi, r) * cols(bj, c);
    return design;
}

MultiTaskProblem GroundTruth::problem() const {
    MultiTaskProblem p;
    p.designs.assign(targets.size(), design);
    p.targets = targets;
    return p;
}

GroundTruth make_truth(const GridScenario& s) {
    validate_scenario(s);
    const Index p = s.height * s.width;
    const Index T = s.n_tasks;
    const Index k = s.sparsity;
    const Index shared = std::lround(s.overlap * static_cast<double>(k));
    std::mt19937_64 rng(s.seed);

    std::vector<std::vector<Index>> supports(static_cast<std::size_t>(T));
    bool placed = false;
    for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
        std::vector<Index> pixels(static_cast<std::size_t>(p));
        for (Index i = 0; i < p; ++i) pixels[static_cast<std::size_t>(i)] = i;
        // Partial Fisher-Yates: the first k entries become the anchors.
        for (Index i = 0; i < k; ++i) {
            std::uniform_int_distribution<Index> pick(i, p - 1);
            std::swap(pixels[static_cast<std::size_t>(i)], pixels[static_cast<std::size_t>(pick(rng))]);
        }
        std::set<Index> used(pixels.begin(), pixels.begin() + shared);
        for (auto& support : supports) support.assign(pixels.begin(), pixels.begin() + shared);
        placed = true;
        for (Index a = shared; a < k && placed; ++a) {
            const Index anchor = pixels[static_cast<std::size_t>(a)];
            const Index r = anchor / s.width, c = anchor % s.width;
            std::vector<Index> moves;
            for (Index d : {-2, -1, 1, 2}) {
                if (r + d >= 0 && r + d < s.height) moves.push_back((r + d) * s.width + c);
                if (c + d >= 0 && c + d < s.width) moves.push_back(r * s.width + c + d);
            }
            for (auto& support : supports) {
                if (moves.empty()) {
                    placed = false;
                    break;
                }
                std::uniform_int_distribution<std::size_t> pick(0, moves.size() - 1);
                const Index moved = moves[pick(rng)];
                if (!used.insert(moved).second) {
                    placed = false;
                    break;
                }
                support.push_back(moved);
            }
        }
    }
    if (!placed)
        throw Error(ErrorCode::SupportCollision, "could not place distinct supports in 100 attempts");

    GroundTruth truth;
    truth.design = make_design(s.height, s.width, s.blur_sigma, s.pool_height, s.pool_width);
    truth.coefficients = Matrix::Zero(p, T);
    std::uniform_real_distribution<double> amplitude(s.amp_low, s.amp_high);
    for (Index t = 0; t < T; ++t) {
        auto& support = supports[static_cast<std::size_t>(t)];
        for (Index j : support) truth.coefficients(j, t) = amplitude(rng);
        std::sort(support.begin(), support.end());
    }
    truth.supports = supports;

    const Matrix signal = truth.design * truth.coefficients;
    truth.sigma2 = signal.squaredNorm() / (static_cast<double>(T) * s.snr * s.snr);
    const double sd = std::sqrt(truth.sigma2);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (Index t = 0; t < T; ++t) {
        Vector y = signal.col(t);
        for (Index i = 0; i < y.size(); ++i) y[i] += sd * noise(rng);
        truth.targets.push_back(std::move(y));
    }
    return truth;
}

}  // namespace otmtr::simulate
