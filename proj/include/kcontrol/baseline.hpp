#pragma once

// Kernel regression benchmark: least squares of the targets on an
// intercept and the m kernel features k(xi_j, x).

#include <cmath>

#include <Eigen/Dense>

#include "kcontrol/dataset.hpp"
#include "kcontrol/error.hpp"
#include "kcontrol/metrics.hpp"
#include "kcontrol/rkhs.hpp"

namespace kcontrol {

struct KernelRidgeModel {
    double intercept = 0.0;
    Vector coefficients;  // one per support point

    [[nodiscard]] Vector predict(const SupportSet& support, const PointSet& X) const {
        return (support.sections(X) * coefficients).array() + intercept;
    }
};

/// Minimizes (1/n)|y - c - Phi a|^2 + ridge |a|^2 (intercept unpenalized).
/// With ridge = 0 the minimum-norm solution is taken from a rank-revealing
/// complete orthogonal decomposition, so rank-deficient feature sets are fine.
[[nodiscard]] inline KernelRidgeModel fit_kernel_ridge(const SupportSet& support, const Dataset& train, double ridge) {
    if (!(ridge >= 0.0) || !std::isfinite(ridge)) throw InputError("ridge must be finite and non-negative");
    if (train.size() < 1) throw InputError("kernel regression needs at least one training point");
    const Eigen::Index n = train.size();
    const Eigen::Index m = support.size();
    const Matrix features = support.sections(train.inputs);
    if (!features.allFinite() || !train.targets.allFinite()) throw InputError("non-finite kernel regression input");

    Matrix A(ridge > 0.0 ? n + m : n, m + 1);
    Vector b = Vector::Zero(A.rows());
    A.topLeftCorner(n, 1).setOnes();
    A.topRightCorner(n, m) = features;
    b.head(n) = train.targets;
    if (ridge > 0.0) {
        // Augmented rows sqrt(n ridge) I reproduce the penalty without forming normal equations.
        A.bottomLeftCorner(m, 1).setZero();
        A.bottomRightCorner(m, m) = Matrix::Identity(m, m) * std::sqrt(static_cast<double>(n) * ridge);
    }
    const Vector sol = Eigen::CompleteOrthogonalDecomposition<Matrix>(A).solve(b);
    return KernelRidgeModel{sol(0), sol.tail(m)};
}

struct BaselineResult {
    KernelRidgeModel model;
    Vector predictions;  // on the test inputs
    Metrics metrics;
};

/// Fit on `train` with the given support and score on `test`. For
/// classification the fitted values are thresholded like the main model's
/// squared-error route.
[[nodiscard]] inline BaselineResult kernel_ridge_baseline(const SupportSet& support, const Dataset& train,
                                                          const Dataset& test, double ridge) {
    BaselineResult r;
    r.model = fit_kernel_ridge(support, train, ridge);
    r.predictions = r.model.predict(support, test.inputs);
    r.metrics = compute_metrics(r.predictions, test.targets, test.task);
    return r;
}

}  // namespace kcontrol
