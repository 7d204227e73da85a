#pragma once

// Linearized subproblems solved once per iterative-regression step:
//
//   ridge:     min_b (1/n) |r + J b|^2 + lambda |b|^2
//   logistic:  min_b (1/n) sum_i [log(1 + e^{a_i + J_i b}) - y_i (a_i + J_i b)] + lambda |b|^2
//
// The logistic form optionally carries an extra least-squares block
// (1/n) |r_e + J_e b|^2 for running costs.

#include <cmath>
#include <optional>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "kcontrol/costs.hpp"
#include "kcontrol/error.hpp"
#include "kcontrol/rkhs.hpp"

namespace kcontrol {

/// Relative singular-value cutoff for the unregularized least-squares path.
inline constexpr double kMinNormCutoff = 1e-10;

namespace detail {

inline void check_finite(const Matrix& J, const Vector& v, const char* what) {
    if (!J.allFinite() || !v.allFinite()) {
        throw InputError(std::string(what) + ": non-finite input");
    }
}

/// Minimum-norm least-squares solution of J b = rhs with a relative
/// singular-value cutoff.
inline Vector min_norm_solve(const Matrix& J, const Vector& rhs) {
    Eigen::BDCSVD<Matrix> svd(J, Eigen::ComputeThinU | Eigen::ComputeThinV);
    svd.setThreshold(kMinNormCutoff);
    return svd.solve(rhs);
}

}  // namespace detail

[[nodiscard]] inline Vector solve_ridge_subproblem(const Matrix& J, const Vector& residual, double lambda) {
    if (J.rows() != residual.size()) {
        throw InputError("ridge subproblem: Jacobian has " + std::to_string(J.rows()) + " rows but residual has " +
                         std::to_string(residual.size()) + " entries");
    }
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw InputError("ridge subproblem: lambda must be finite and non-negative");
    }
    detail::check_finite(J, residual, "ridge subproblem");
    if (residual.isZero(0.0)) {
        return Vector::Zero(J.cols());
    }
    const double n = static_cast<double>(J.rows());
    if (lambda == 0.0) {
        return detail::min_norm_solve(J, -residual);
    }
    Matrix normal = J.transpose() * J / n;
    normal.diagonal().array() += lambda;
    const Vector rhs = -(J.transpose() * residual) / n;
    Eigen::LLT<Matrix> llt(normal);
    if (llt.info() == Eigen::Success) {
        return llt.solve(rhs);
    }
    return normal.ldlt().solve(rhs);
}

struct LeastSquaresBlock {
    Matrix jacobian;
    Vector residual;
};

struct LogisticSolveInfo {
    Vector beta;
    int newton_steps = 0;
    double gradient_norm = 0.0;
    double objective = 0.0;
};

inline constexpr double kLogisticGradientTolerance = 1e-8;
inline constexpr int kLogisticMaxSteps = 50;

/// Objective of the logistic subproblem at beta (exposed for testing).
[[nodiscard]] inline double logistic_subproblem_objective(const Matrix& J, const Vector& offsets, const Vector& labels,
                                                          double lambda, const Vector& beta,
                                                          const std::optional<LeastSquaresBlock>& extra = std::nullopt) {
    const double n = static_cast<double>(J.rows());
    const Vector z = offsets + J * beta;
    double value = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        value += detail::softplus(z(i)) - labels(i) * z(i);
    }
    value /= n;
    value += lambda * beta.squaredNorm();
    if (extra) {
        value += (extra->residual + extra->jacobian * beta).squaredNorm() / n;
    }
    return value;
}

[[nodiscard]] inline LogisticSolveInfo solve_logistic_subproblem_detailed(
    const Matrix& J, const Vector& offsets, const Vector& labels, double lambda,
    const std::optional<LeastSquaresBlock>& extra = std::nullopt) {
    if (J.rows() != offsets.size() || J.rows() != labels.size()) {
        throw InputError("logistic subproblem: inconsistent shapes");
    }
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw InputError("logistic subproblem: lambda must be finite and non-negative");
    }
    detail::check_finite(J, offsets, "logistic subproblem");
    detail::check_binary(labels);
    if (extra) {
        if (extra->jacobian.cols() != J.cols() || extra->jacobian.rows() != extra->residual.size()) {
            throw InputError("logistic subproblem: inconsistent extra block");
        }
        detail::check_finite(extra->jacobian, extra->residual, "logistic subproblem");
    }

    const Eigen::Index p = J.cols();
    const double n = static_cast<double>(J.rows());
    LogisticSolveInfo info{Vector::Zero(p)};

    auto gradient_at = [&](const Vector& beta, Vector& prob) {
        prob = sigmoid(offsets + J * beta);
        Vector g = J.transpose() * (prob - labels) / n + 2.0 * lambda * beta;
        if (extra) {
            g += 2.0 * extra->jacobian.transpose() * (extra->residual + extra->jacobian * beta) / n;
        }
        return g;
    };

    Vector prob;
    Vector grad = gradient_at(info.beta, prob);
    info.objective = logistic_subproblem_objective(J, offsets, labels, lambda, info.beta, extra);
    for (; info.newton_steps < kLogisticMaxSteps; ++info.newton_steps) {
        if (grad.lpNorm<Eigen::Infinity>() < kLogisticGradientTolerance) {
            break;
        }
        const Vector weights = prob.array() * (1.0 - prob.array());
        Matrix hessian = J.transpose() * weights.asDiagonal() * J / n;
        hessian.diagonal().array() += 2.0 * lambda;
        if (extra) {
            hessian += 2.0 * extra->jacobian.transpose() * extra->jacobian / n;
        }
        Vector step;
        Eigen::LLT<Matrix> llt(hessian);
        if (lambda > 0.0 && llt.info() == Eigen::Success) {
            step = -llt.solve(grad);
        } else {
            step = -detail::min_norm_solve(hessian, grad);
        }
        if (!step.allFinite()) {
            break;
        }
        // Armijo backtracking on the true objective.
        const double slope = grad.dot(step);
        double t = 1.0;
        Vector trial = info.beta + step;
        double trial_value = logistic_subproblem_objective(J, offsets, labels, lambda, trial, extra);
        while (trial_value > info.objective + 1e-4 * t * slope && t > 1e-10) {
            t *= 0.5;
            trial = info.beta + t * step;
            trial_value = logistic_subproblem_objective(J, offsets, labels, lambda, trial, extra);
        }
        if (!(trial_value <= info.objective)) {
            break;
        }
        info.beta = std::move(trial);
        info.objective = trial_value;
        grad = gradient_at(info.beta, prob);
    }
    info.gradient_norm = grad.lpNorm<Eigen::Infinity>();
    return info;
}

[[nodiscard]] inline Vector solve_logistic_subproblem(const Matrix& J, const Vector& offsets, const Vector& labels,
                                                      double lambda,
                                                      const std::optional<LeastSquaresBlock>& extra = std::nullopt) {
    return solve_logistic_subproblem_detailed(J, offsets, labels, lambda, extra).beta;
}

}  // namespace kcontrol
