#pragma once

// Gaussian-kernel RKHS primitives: kernel sections, Gram matrices and
// functions represented as kernel expansions over a support set.

#include <cmath>
#include <memory>
#include <string>

#include <Eigen/Dense>

#include "kcontrol/error.hpp"

namespace kcontrol {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Points are stored one per row: an n x d matrix holds n points of R^d.
using PointSet = Eigen::MatrixXd;

struct KernelSpec {
    double scale = 1.0;

    explicit KernelSpec(double s = 1.0) : scale(s) {
        if (!(s > 0.0) || !std::isfinite(s)) {
            throw InputError("kernel scale must be positive and finite");
        }
    }
};

/// k(x, y) = exp(-|x - y|^2 / (2 s^2)).
template <typename A, typename B>
[[nodiscard]] double kernel_eval(const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& y,
                                 const KernelSpec& spec) {
    if (x.size() != y.size()) {
        throw InputError("kernel_eval: dimension mismatch (" + std::to_string(x.size()) + " vs " +
                         std::to_string(y.size()) + ")");
    }
    const double sq = (x.derived().reshaped() - y.derived().reshaped()).squaredNorm();
    return std::exp(-sq / (2.0 * spec.scale * spec.scale));
}

/// Entry (i, j) = k(X_i, Y_j) for row-stored point sets.
[[nodiscard]] inline Matrix gram_matrix(const PointSet& X, const PointSet& Y, const KernelSpec& spec) {
    if (X.rows() == 0 || Y.rows() == 0) {
        throw InputError("gram_matrix: empty point set");
    }
    if (X.cols() != Y.cols()) {
        throw InputError("gram_matrix: point dimension mismatch");
    }
    const double inv = 1.0 / (2.0 * spec.scale * spec.scale);
    // |x - y|^2 expanded as |x|^2 + |y|^2 - 2 x.y loses accuracy near the
    // diagonal, so accumulate the differences directly.
    Matrix out(X.rows(), Y.rows());
    for (Eigen::Index j = 0; j < Y.rows(); ++j) {
        for (Eigen::Index i = 0; i < X.rows(); ++i) {
            out(i, j) = std::exp(-(X.row(i) - Y.row(j)).squaredNorm() * inv);
        }
    }
    return out;
}

/// The m support points xi_1..xi_m with their cached Gram matrix.
class SupportSet {
public:
    static constexpr double kDistinctTolerance = 1e-12;

    SupportSet(PointSet points, KernelSpec spec) : points_(std::move(points)), spec_(spec) {
        if (points_.rows() == 0) {
            throw InputError("support set must contain at least one point");
        }
        if (!points_.allFinite()) {
            throw InputError("support points must be finite");
        }
        for (Eigen::Index i = 0; i < points_.rows(); ++i) {
            for (Eigen::Index j = i + 1; j < points_.rows(); ++j) {
                if ((points_.row(i) - points_.row(j)).norm() <= kDistinctTolerance) {
                    throw InputError("support points " + std::to_string(i) + " and " +
                                     std::to_string(j) + " coincide");
                }
            }
        }
        gram_ = gram_matrix(points_, points_, spec_);
    }

    [[nodiscard]] Eigen::Index size() const noexcept { return points_.rows(); }
    [[nodiscard]] Eigen::Index dim() const noexcept { return points_.cols(); }
    [[nodiscard]] const PointSet& points() const noexcept { return points_; }
    [[nodiscard]] const Matrix& gram() const noexcept { return gram_; }
    [[nodiscard]] const KernelSpec& kernel() const noexcept { return spec_; }

    /// kappa(x) = (k(x, xi_1), ..., k(x, xi_m)).
    template <typename Derived>
    [[nodiscard]] Vector section(const Eigen::MatrixBase<Derived>& x) const {
        if (x.size() != dim()) {
            throw InputError("point dimension " + std::to_string(x.size()) +
                             " does not match support dimension " + std::to_string(dim()));
        }
        Vector k(size());
        for (Eigen::Index j = 0; j < size(); ++j) {
            k(j) = kernel_eval(x.derived().reshaped().transpose(), points_.row(j), spec_);
        }
        return k;
    }

    /// Cross-Gram with the support as columns: (n x m), entry (i, j) = k(x_i, xi_j).
    [[nodiscard]] Matrix sections(const PointSet& X) const {
        if (X.cols() != dim()) {
            throw InputError("point dimension " + std::to_string(X.cols()) +
                             " does not match support dimension " + std::to_string(dim()));
        }
        return gram_matrix(X, points_, spec_);
    }

private:
    PointSet points_;
    KernelSpec spec_;
    Matrix gram_;
};

/// h(x) = offset + (1/m) sum_j k(x, xi_j) w_j.
///
/// The 1/m weight of the empirical inner product lives here, so `weights`
/// are the raw accumulated driven states.
struct RkhsFunction {
    double offset = 0.0;
    Vector weights;
    std::shared_ptr<const SupportSet> support;

    RkhsFunction(double c, Vector w, std::shared_ptr<const SupportSet> s)
        : offset(c), weights(std::move(w)), support(std::move(s)) {
        if (!support) {
            throw InputError("RkhsFunction requires a support set");
        }
        if (weights.size() != support->size()) {
            throw InputError("RkhsFunction weights must have one entry per support point");
        }
    }

    [[nodiscard]] const KernelSpec& kernel() const noexcept { return support->kernel(); }
};

template <typename Derived>
[[nodiscard]] double eval_function(const RkhsFunction& f, const Eigen::MatrixBase<Derived>& x) {
    const Vector k = f.support->section(x);
    return f.offset + k.dot(f.weights) / static_cast<double>(f.weights.size());
}

/// Evaluate at every row of X.
[[nodiscard]] inline Vector eval_function_rows(const RkhsFunction& f, const PointSet& X) {
    const Matrix k = f.support->sections(X);
    return (k * f.weights).array() / static_cast<double>(f.weights.size()) + f.offset;
}

}  // namespace kcontrol
