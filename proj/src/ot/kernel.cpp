#include <cmath>
#include <limits>

#include "otmtr/ot.hpp"

namespace otmtr::ot {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Scalar exp: the vectorized one does not flush to 0 below -708, which would hide underflow.
Matrix exact_exp(const Matrix& x) {
    return x.unaryExpr([](double v) { return std::exp(v); });
}

Matrix squared_offsets(Index n, double scale) {
    Matrix c(n, n);
    for (Index j = 0; j < n; ++j)
        for (Index i = 0; i < n; ++i) c(i, j) = scale * static_cast<double>((i - j) * (i - j));
    return c;
}

// out_i = log sum_j exp(log_k(i, j) + log_x_j)
void log_matvec(const Matrix& log_k, const double* log_x, Index stride, double* out,
                Index out_stride) {
    const Index n = log_k.rows();
    const Index m = log_k.cols();
    for (Index i = 0; i < n; ++i) {
        double peak = kNegInf;
        for (Index j = 0; j < m; ++j) peak = std::max(peak, log_k(i, j) + log_x[j * stride]);
        double value = kNegInf;
        if (peak > kNegInf) {
            double acc = 0.0;
            for (Index j = 0; j < m; ++j) acc += std::exp(log_k(i, j) + log_x[j * stride] - peak);
            value = peak + std::log(acc);
        }
        out[i * out_stride] = value;
    }
}

}  // namespace

Kernel::Kernel(const GroundMetric& metric, double epsilon)
    : form_(metric.is_grid() ? Form::Separable : Form::Dense),
      epsilon_(epsilon),
      size_(metric.size()) {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon))
        throw Error(ErrorCode::InvalidParameter, "epsilon must be > 0");
    if (form_ == Form::Dense) {
        log_gibbs_ = -metric.materialize() / epsilon;
        gibbs_ = exact_exp(log_gibbs_);
        underflowed_ = (gibbs_.array() == 0.0).any();
        return;
    }
    height_ = metric.height();
    width_ = metric.width();
    log_rows_ = -squared_offsets(height_, metric.scale()) / epsilon;
    log_cols_ = -squared_offsets(width_, metric.scale()) / epsilon;
    rows_ = exact_exp(log_rows_);
    cols_ = exact_exp(log_cols_);
    underflowed_ = (rows_.array() == 0.0).any() || (cols_.array() == 0.0).any();
}

Kernel build_kernel(const GroundMetric& metric, double epsilon) { return Kernel(metric, epsilon); }

Vector Kernel::apply(const Vector& x) const {
    if (form_ == Form::Dense) return gibbs_ * x;
    Vector out(size_);
    Eigen::Map<const RowMajor> image(x.data(), height_, width_);
    Eigen::Map<RowMajor> result(out.data(), height_, width_);
    result.noalias() = rows_ * image * cols_.transpose();
    return out;
}

Vector Kernel::apply_transpose(const Vector& x) const {
    if (form_ == Form::Dense) return gibbs_.transpose() * x;
    Vector out(size_);
    Eigen::Map<const RowMajor> image(x.data(), height_, width_);
    Eigen::Map<RowMajor> result(out.data(), height_, width_);
    result.noalias() = rows_.transpose() * image * cols_;
    return out;
}

Vector Kernel::log_apply(const Vector& log_x) const { return log_apply_impl(log_x, false); }

Vector Kernel::log_apply_transpose(const Vector& log_x) const {
    return log_apply_impl(log_x, true);
}

Vector Kernel::log_apply_impl(const Vector& log_x, bool transpose) const {
    Vector out(size_);
    if (form_ == Form::Dense) {
        if (transpose) {
            const Matrix lt = log_gibbs_.transpose();
            log_matvec(lt, log_x.data(), 1, out.data(), 1);
        } else {
            log_matvec(log_gibbs_, log_x.data(), 1, out.data(), 1);
        }
        return out;
    }
    // Grid factors are symmetric: K^T = K.
    RowMajor partial(height_, width_);
    for (Index r = 0; r < height_; ++r)
        log_matvec(log_cols_, log_x.data() + r * width_, 1, partial.data() + r * width_, 1);
    for (Index c = 0; c < width_; ++c)
        log_matvec(log_rows_, partial.data() + c, width_, out.data() + c, width_);
    return out;
}

double Kernel::total() const {
    if (form_ == Form::Dense) return gibbs_.sum();
    return rows_.sum() * cols_.sum();
}

Matrix Kernel::materialize() const {
    if (form_ == Form::Dense) return gibbs_;
    Matrix k(size_, size_);
    for (Index i = 0; i < size_; ++i)
        for (Index j = 0; j < size_; ++j)
            k(i, j) = rows_(i / width_, j / width_) * cols_(i % width_, j % width_);
    return k;
}

}  // namespace otmtr::ot
