#pragma once

// Terminal and running costs on a minibatch, and their pulled-down
// gradients at the support points.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include <Eigen/Dense>

#include "kcontrol/error.hpp"
#include "kcontrol/rkhs.hpp"

namespace kcontrol {

enum class TerminalKind { SquaredError, CrossEntropy };

inline const char* to_string(TerminalKind kind) {
    return kind == TerminalKind::SquaredError ? "squared" : "cross-entropy";
}

inline TerminalKind terminal_kind_from_string(const std::string& name) {
    if (name == "squared" || name == "l2" || name == "quadratic") return TerminalKind::SquaredError;
    if (name == "cross-entropy" || name == "cross_entropy" || name == "logistic") return TerminalKind::CrossEntropy;
    throw InputError("unknown terminal cost '" + name + "'");
}

/// Minibatch with its kernel sections against the support.
struct Batch {
    PointSet inputs;
    Vector targets;
    Matrix sections;  // n x m, entry (i, j) = k(x_i, xi_j)

    [[nodiscard]] Eigen::Index size() const noexcept { return inputs.rows(); }

    /// K_{xi x}: the m x n cross-Gram.
    [[nodiscard]] auto cross_gram() const { return sections.transpose(); }
};

[[nodiscard]] inline Batch make_batch(const SupportSet& support, PointSet inputs, Vector targets) {
    if (inputs.rows() < 1) {
        throw InputError("batch must contain at least one point");
    }
    if (inputs.rows() != targets.size()) {
        throw InputError("batch inputs and targets differ in length");
    }
    Matrix sections = support.sections(inputs);
    return Batch{std::move(inputs), std::move(targets), std::move(sections)};
}

/// f_t(x) for the state-tracking running term.
using RunningTarget = std::function<double(Eigen::Index t, const Eigen::Ref<const Eigen::RowVectorXd>& x)>;

struct CostModel {
    TerminalKind terminal = TerminalKind::SquaredError;
    RunningTarget running_target;  // empty: no tracking term
    double control_penalty = 0.0;

    [[nodiscard]] bool has_tracking() const noexcept { return static_cast<bool>(running_target); }
    [[nodiscard]] bool has_running_cost() const noexcept { return has_tracking() || control_penalty > 0.0; }

    void validate() const {
        if (!(control_penalty >= 0.0) || !std::isfinite(control_penalty)) {
            throw InputError("control penalty must be a finite non-negative number");
        }
    }
};

namespace detail {

inline double softplus(double h) { return std::max(h, 0.0) + std::log1p(std::exp(-std::abs(h))); }

inline double sigmoid(double h) {
    if (h >= 0.0) {
        return 1.0 / (1.0 + std::exp(-h));
    }
    const double e = std::exp(h);
    return e / (1.0 + e);
}

inline void check_binary(const Vector& y) {
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (y(i) != 0.0 && y(i) != 1.0) {
            throw InputError("cross-entropy requires binary targets; entry " + std::to_string(i) + " is " +
                             std::to_string(y(i)));
        }
    }
}

inline void check_values(const Vector& h, const Batch& batch) {
    if (h.size() != batch.size()) {
        throw InputError("expected " + std::to_string(batch.size()) + " h values, got " + std::to_string(h.size()));
    }
}

}  // namespace detail

[[nodiscard]] inline Vector sigmoid(const Vector& h) { return h.unaryExpr(&detail::sigmoid); }

[[nodiscard]] inline double terminal_cost(TerminalKind kind, const Vector& h, const Batch& batch) {
    detail::check_values(h, batch);
    const double n = static_cast<double>(batch.size());
    if (kind == TerminalKind::SquaredError) {
        return (h - batch.targets).squaredNorm() / n;
    }
    detail::check_binary(batch.targets);
    double total = 0.0;
    for (Eigen::Index i = 0; i < h.size(); ++i) {
        total += detail::softplus(h(i)) - batch.targets(i) * h(i);
    }
    return total / n;
}

/// Derivative of the terminal cost with respect to h(x_i), one entry per sample.
[[nodiscard]] inline Vector terminal_residual(TerminalKind kind, const Vector& h, const Batch& batch) {
    detail::check_values(h, batch);
    const double n = static_cast<double>(batch.size());
    if (kind == TerminalKind::SquaredError) {
        return 2.0 * (h - batch.targets) / n;
    }
    detail::check_binary(batch.targets);
    return (sigmoid(h) - batch.targets) / n;
}

/// g*_T: (2/n) K_{xi x} (h - y) for squared error, (1/n) K_{xi x} (sigma(h) - y) for cross-entropy.
[[nodiscard]] inline Vector terminal_gradient_at_support(TerminalKind kind, const Vector& h, const Batch& batch) {
    return batch.cross_gram() * terminal_residual(kind, h, batch);
}

struct RunningTerms {
    double value = 0.0;
    Vector source;        // m-vector l_t fed to the adjoint recursion
    Vector control_grad;  // q-vector 2 lambda_u u_t
};

/// f_t at every batch input.
[[nodiscard]] inline Vector running_targets_at(const CostModel& model, Eigen::Index t, const Batch& batch) {
    if (!model.has_tracking()) {
        throw InputError("cost model has no running target");
    }
    Vector f(batch.size());
    for (Eigen::Index i = 0; i < batch.size(); ++i) {
        f(i) = model.running_target(t, batch.inputs.row(i));
    }
    return f;
}

template <typename Derived>
[[nodiscard]] RunningTerms running_cost_and_grads(const CostModel& model, Eigen::Index t, const Vector& h,
                                                  const Eigen::MatrixBase<Derived>& u_t, const Batch& batch) {
    model.validate();
    detail::check_values(h, batch);
    RunningTerms out{0.0, Vector::Zero(batch.sections.cols()), Vector::Zero(u_t.size())};
    if (model.has_tracking()) {
        const Vector diff = h - running_targets_at(model, t, batch);
        const double n = static_cast<double>(batch.size());
        out.value += diff.squaredNorm() / n;
        out.source = batch.cross_gram() * (2.0 * diff / n);
    }
    if (model.control_penalty > 0.0) {
        out.value += model.control_penalty * u_t.squaredNorm();
        out.control_grad = 2.0 * model.control_penalty * u_t;
    }
    return out;
}

}  // namespace kcontrol
