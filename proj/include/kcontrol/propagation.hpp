#pragma once

// Pulled-down bilinear control system on R^m:
//
//   g_{t+1} = g_t + (1/m) K B[u_t] g_t,        g_0 = c * 1
//   g*_t    = g*_{t+1} + (1/m) K B*[u_t] g*_{t+1} + l_t,   g*_T given
//
// together with the cost gradient and the control Jacobian of h_t(x).

#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kcontrol/error.hpp"
#include "kcontrol/operators.hpp"
#include "kcontrol/rkhs.hpp"

namespace kcontrol {

/// The q x T control grid; column t is u_t.
class ControlMatrix {
public:
    ControlMatrix() = default;

    explicit ControlMatrix(Matrix values) : values_(std::move(values)) {
        if (values_.rows() < 1 || values_.cols() < 1) {
            throw InputError("control matrix must have shape (q, T) with q >= 1 and T >= 1");
        }
        if (!values_.allFinite()) {
            throw InputError("control matrix entries must be finite");
        }
    }

    static ControlMatrix zeros(Eigen::Index q, Eigen::Index horizon) {
        return ControlMatrix(Matrix::Zero(q, horizon));
    }

    [[nodiscard]] Eigen::Index q() const noexcept { return values_.rows(); }
    [[nodiscard]] Eigen::Index horizon() const noexcept { return values_.cols(); }
    [[nodiscard]] const Matrix& values() const noexcept { return values_; }
    [[nodiscard]] auto column(Eigen::Index t) const { return values_.col(t); }
    [[nodiscard]] double operator()(Eigen::Index i, Eigen::Index t) const { return values_(i, t); }

    /// Column-major flattening: entry (i, s) sits at i + q * s.
    [[nodiscard]] Vector flattened() const { return values_.reshaped(); }

    [[nodiscard]] ControlMatrix plus(const Matrix& step) const { return ControlMatrix(values_ + step); }

    /// Index of entry (i, s) in the flattened layout used by Jacobian columns.
    [[nodiscard]] Eigen::Index flat_index(Eigen::Index i, Eigen::Index s) const noexcept { return i + q() * s; }

private:
    Matrix values_;
};

/// Pulled-down forward solution.
struct Trajectory {
    Matrix states;  // m x (T+1), column t is g_t
    Matrix driven;  // m x T,     column t is B[u_t] g_t
    ControlMatrix control;
    double offset = 1.0;

    [[nodiscard]] Eigen::Index horizon() const noexcept { return driven.cols(); }
    [[nodiscard]] Eigen::Index dim() const noexcept { return states.rows(); }
};

namespace detail {

inline void check_system(const ControlMatrix& control, const OperatorBank& bank, const SupportSet& support) {
    if (control.q() != bank.size()) {
        throw InputError("control has " + std::to_string(control.q()) + " rows but the bank has " +
                         std::to_string(bank.size()) + " operators");
    }
    if (bank.dim() != support.size()) {
        throw InputError("operator dimension " + std::to_string(bank.dim()) + " does not match support size " +
                         std::to_string(support.size()));
    }
}

inline constexpr double kDivergenceBound = 1e12;

}  // namespace detail

[[nodiscard]] inline Trajectory forward_solve(const ControlMatrix& control, const OperatorBank& bank,
                                              const SupportSet& support, double offset) {
    detail::check_system(control, bank, support);
    if (!std::isfinite(offset)) {
        throw InputError("initial offset must be finite");
    }
    const Eigen::Index m = support.size();
    const Eigen::Index T = control.horizon();
    const double inv_m = 1.0 / static_cast<double>(m);

    Trajectory traj{Matrix(m, T + 1), Matrix(m, T), control, offset};
    traj.states.col(0).setConstant(offset);
    for (Eigen::Index t = 0; t < T; ++t) {
        const Vector g = traj.states.col(t);
        traj.driven.col(t) = apply_combination(bank, control.column(t), g);
        traj.states.col(t + 1) = g + inv_m * (support.gram() * traj.driven.col(t));
        const double peak = traj.states.col(t + 1).cwiseAbs().maxCoeff();
        if (!std::isfinite(peak) || peak > detail::kDivergenceBound) {
            throw DivergenceError("forward state diverged at step " + std::to_string(t + 1) +
                                      " (|g|_inf = " + std::to_string(peak) + ")",
                                  static_cast<long>(t + 1));
        }
    }
    return traj;
}

/// h_t as a kernel expansion: weights are the driven states summed over s < t.
[[nodiscard]] inline RkhsFunction h_function(const Trajectory& traj, std::shared_ptr<const SupportSet> support,
                                             Eigen::Index t) {
    if (t < 0 || t > traj.horizon()) {
        throw InputError("time index " + std::to_string(t) + " outside [0, " + std::to_string(traj.horizon()) + "]");
    }
    Vector w = Vector::Zero(traj.dim());
    for (Eigen::Index s = 0; s < t; ++s) {
        w += traj.driven.col(s);
    }
    return RkhsFunction(traj.offset, std::move(w), std::move(support));
}

/// h_t at every row of `sections` (n x m kernel sections), for t = 0..T.
/// Returns an n x (T+1) matrix.
[[nodiscard]] inline Matrix h_values_all_times(const Trajectory& traj, const Matrix& sections) {
    const Eigen::Index T = traj.horizon();
    Matrix cumulative(traj.dim(), T + 1);
    cumulative.col(0).setZero();
    for (Eigen::Index t = 0; t < T; ++t) {
        cumulative.col(t + 1) = cumulative.col(t) + traj.driven.col(t);
    }
    Matrix h = sections * cumulative / static_cast<double>(traj.dim());
    h.array() += traj.offset;
    return h;
}

/// h_T at every row of `sections`.
[[nodiscard]] inline Vector h_terminal_values(const Trajectory& traj, const Matrix& sections) {
    const Vector w = traj.driven.rowwise().sum();
    return (sections * w).array() / static_cast<double>(traj.dim()) + traj.offset;
}

/// K B*[u_t] assembled in O(m^2) from the operator structure.
template <typename Derived>
[[nodiscard]] Matrix kernel_times_adjoint(const Matrix& K, const OperatorBank& bank,
                                          const Eigen::MatrixBase<Derived>& u_t) {
    const Eigen::Index m = K.rows();
    Matrix out = Matrix::Zero(m, m);
    for (Eigen::Index i = 0; i < bank.size(); ++i) {
        const auto& op = bank.ops[static_cast<std::size_t>(i)];
        if (op.kind == OperatorKind::Diagonal) {
            out += u_t(i) * (K * op.vector.asDiagonal());
        } else {
            const Vector kb = K * op.vector;
            out += (u_t(i) / static_cast<double>(m)) * kb * op.vector.transpose();
        }
    }
    return out;
}

/// Backward transitions M_s = I + (1/m) K B*[u_s] and, optionally, the
/// products P_s = M_s M_{s+1} ... M_{T-1} (P_T = I).
struct AdjointBundle {
    std::vector<Matrix> transitions;
    std::optional<std::vector<Matrix>> terminal_products;

    [[nodiscard]] Eigen::Index horizon() const noexcept { return static_cast<Eigen::Index>(transitions.size()); }
    [[nodiscard]] Eigen::Index dim() const noexcept { return transitions.empty() ? 0 : transitions.front().rows(); }

    /// P_s for 0 <= s <= T. Requires products to have been built.
    [[nodiscard]] const Matrix& product(Eigen::Index s) const {
        if (!terminal_products) {
            throw InputError("adjoint bundle was built without terminal products");
        }
        if (s < 0 || s > horizon()) {
            throw InputError("product index out of range");
        }
        return (*terminal_products)[static_cast<std::size_t>(s)];
    }
};

[[nodiscard]] inline AdjointBundle adjoint_transitions(const ControlMatrix& control, const OperatorBank& bank,
                                                       const SupportSet& support, bool with_products = true) {
    detail::check_system(control, bank, support);
    const Eigen::Index m = support.size();
    const Eigen::Index T = control.horizon();
    AdjointBundle bundle;
    bundle.transitions.reserve(static_cast<std::size_t>(T));
    for (Eigen::Index s = 0; s < T; ++s) {
        Matrix M = kernel_times_adjoint(support.gram(), bank, control.column(s)) / static_cast<double>(m);
        M.diagonal().array() += 1.0;
        bundle.transitions.push_back(std::move(M));
    }
    if (with_products) {
        std::vector<Matrix> products(static_cast<std::size_t>(T + 1));
        products[static_cast<std::size_t>(T)] = Matrix::Identity(m, m);
        for (Eigen::Index s = T - 1; s >= 0; --s) {
            products[static_cast<std::size_t>(s)] =
                bundle.transitions[static_cast<std::size_t>(s)] * products[static_cast<std::size_t>(s + 1)];
        }
        bundle.terminal_products = std::move(products);
    }
    return bundle;
}

/// Costates g*_0..g*_T stored as columns of an m x (T+1) matrix.
struct CostateTrajectory {
    Matrix costates;

    [[nodiscard]] Eigen::Index horizon() const noexcept { return costates.cols() - 1; }
};

namespace detail {

inline void check_sources(const std::vector<Vector>& sources, Eigen::Index T, Eigen::Index m) {
    if (!sources.empty() && static_cast<Eigen::Index>(sources.size()) != T) {
        throw InputError("expected " + std::to_string(T) + " adjoint sources, got " + std::to_string(sources.size()));
    }
    for (const auto& l : sources) {
        if (l.size() != m) {
            throw InputError("adjoint source has wrong dimension");
        }
    }
}

}  // namespace detail

/// Direct backward recursion g*_s = M_s g*_{s+1} + l_s. An empty source
/// list means all l_s = 0.
[[nodiscard]] inline CostateTrajectory adjoint_solve(const AdjointBundle& bundle, const Vector& terminal,
                                                     const std::vector<Vector>& sources = {}) {
    const Eigen::Index T = bundle.horizon();
    const Eigen::Index m = terminal.size();
    if (T > 0 && bundle.dim() != m) {
        throw InputError("terminal costate dimension does not match the transitions");
    }
    detail::check_sources(sources, T, m);
    CostateTrajectory out{Matrix(m, T + 1)};
    out.costates.col(T) = terminal;
    for (Eigen::Index s = T - 1; s >= 0; --s) {
        out.costates.col(s) = bundle.transitions[static_cast<std::size_t>(s)] * out.costates.col(s + 1);
        if (!sources.empty()) {
            out.costates.col(s) += sources[static_cast<std::size_t>(s)];
        }
    }
    return out;
}

/// Source-free costates read off the transition products: g*_s = P_s g*_T.
[[nodiscard]] inline CostateTrajectory adjoint_from_products(const AdjointBundle& bundle, const Vector& terminal) {
    const Eigen::Index T = bundle.horizon();
    CostateTrajectory out{Matrix(terminal.size(), T + 1)};
    for (Eigen::Index s = 0; s <= T; ++s) {
        out.costates.col(s) = bundle.product(s) * terminal;
    }
    return out;
}

/// Matrix-free backward recursion, O(T m^2), used inside the optimizers.
[[nodiscard]] inline CostateTrajectory adjoint_sweep(const ControlMatrix& control, const OperatorBank& bank,
                                                     const SupportSet& support, const Vector& terminal,
                                                     const std::vector<Vector>& sources = {}) {
    detail::check_system(control, bank, support);
    const Eigen::Index T = control.horizon();
    const Eigen::Index m = support.size();
    if (terminal.size() != m) {
        throw InputError("terminal costate dimension does not match the support");
    }
    detail::check_sources(sources, T, m);
    const double inv_m = 1.0 / static_cast<double>(m);
    CostateTrajectory out{Matrix(m, T + 1)};
    out.costates.col(T) = terminal;
    for (Eigen::Index s = T - 1; s >= 0; --s) {
        const Vector next = out.costates.col(s + 1);
        out.costates.col(s) = next + inv_m * (support.gram() * apply_adjoint_combination(bank, control.column(s), next));
        if (!sources.empty()) {
            out.costates.col(s) += sources[static_cast<std::size_t>(s)];
        }
    }
    return out;
}

/// DE(u)_{i,t} = (1/m) g*_{t+1}^T B_i g_t + running_control_grad(i, t).
[[nodiscard]] inline Matrix cost_gradient(const Trajectory& traj, const CostateTrajectory& costate,
                                          const OperatorBank& bank,
                                          const std::optional<Matrix>& running_control_grad = std::nullopt) {
    const Eigen::Index T = traj.horizon();
    if (costate.horizon() != T) {
        throw InputError("costate horizon " + std::to_string(costate.horizon()) + " does not match trajectory horizon " +
                         std::to_string(T));
    }
    if (costate.costates.rows() != traj.dim()) {
        throw InputError("costate dimension does not match trajectory");
    }
    const double inv_m = 1.0 / static_cast<double>(traj.dim());
    Matrix grad(bank.size(), T);
    for (Eigen::Index t = 0; t < T; ++t) {
        const Vector g = traj.states.col(t);
        for (Eigen::Index i = 0; i < bank.size(); ++i) {
            grad(i, t) = inv_m * costate.costates.col(t + 1).dot(apply(bank.ops[static_cast<std::size_t>(i)], g));
        }
    }
    if (running_control_grad) {
        if (running_control_grad->rows() != grad.rows() || running_control_grad->cols() != grad.cols()) {
            throw InputError("running control gradient has the wrong shape");
        }
        grad += *running_control_grad;
    }
    return grad;
}

/// Tangent basis S^(t) (m x qT): column (i, s) is M_{t-1}^T ... M_{s+1}^T B_i g_s
/// for s < t and zero otherwise, so that D_{u_{i,s}} h_t(x) = (1/m) kappa(x)^T S e_{(i,s)}.
///
/// Built by forward propagation with M_r^T W = W + (1/m) B[u_r] (K W), one
/// block product per step.
[[nodiscard]] inline Matrix sensitivity_basis(const Trajectory& traj, const OperatorBank& bank,
                                              const SupportSet& support, Eigen::Index t) {
    const Eigen::Index T = traj.horizon();
    if (t < 0 || t > T) {
        throw InputError("time index " + std::to_string(t) + " outside [0, " + std::to_string(T) + "]");
    }
    const Eigen::Index q = bank.size();
    const Eigen::Index m = support.size();
    const double inv_m = 1.0 / static_cast<double>(m);
    Matrix basis = Matrix::Zero(m, q * T);
    for (Eigen::Index r = 0; r < t; ++r) {
        const Eigen::Index active = q * r;  // columns with s < r
        if (active > 0) {
            auto block = basis.leftCols(active);
            const Matrix kw = support.gram() * block;
            Matrix driven = Matrix::Zero(m, active);
            for (Eigen::Index i = 0; i < q; ++i) {
                driven += traj.control(i, r) * apply(bank.ops[static_cast<std::size_t>(i)], kw);
            }
            block += inv_m * driven;
        }
        const Vector g = traj.states.col(r);
        for (Eigen::Index i = 0; i < q; ++i) {
            basis.col(i + q * r) = apply(bank.ops[static_cast<std::size_t>(i)], g);
        }
    }
    return basis;
}

/// D_u h_t at each query point (rows) in the flattened control layout.
[[nodiscard]] inline Matrix control_jacobian(const Trajectory& traj, const OperatorBank& bank,
                                             const SupportSet& support, const PointSet& query_points,
                                             Eigen::Index t) {
    const Matrix basis = sensitivity_basis(traj, bank, support, t);
    return support.sections(query_points) * basis / static_cast<double>(support.size());
}

/// Same Jacobian from precomputed kernel sections (n x m).
[[nodiscard]] inline Matrix control_jacobian_from_sections(const Trajectory& traj, const OperatorBank& bank,
                                                           const SupportSet& support, const Matrix& sections,
                                                           Eigen::Index t) {
    const Matrix basis = sensitivity_basis(traj, bank, support, t);
    return sections * basis / static_cast<double>(support.size());
}

/// Jacobian through backward transition products: for each query, the
/// costate on horizon [0, t] with terminal kappa(x) is P^(t)_{s+1} kappa(x),
/// with P^(t)_s = M_s ... M_{t-1}. For t = T the cached products are reused.
[[nodiscard]] inline Matrix control_jacobian_psi(const Trajectory& traj, const AdjointBundle& bundle,
                                                 const OperatorBank& bank, const SupportSet& support,
                                                 const PointSet& query_points, Eigen::Index t) {
    const Eigen::Index T = traj.horizon();
    if (t < 0 || t > T) {
        throw InputError("time index " + std::to_string(t) + " outside [0, " + std::to_string(T) + "]");
    }
    if (bundle.horizon() != T) {
        throw InputError("adjoint bundle horizon does not match trajectory");
    }
    const Eigen::Index q = bank.size();
    const Eigen::Index m = support.size();
    const Matrix sections = support.sections(query_points);
    Matrix jac = Matrix::Zero(query_points.rows(), q * T);

    const bool cached = t == T && bundle.terminal_products.has_value();
    Matrix product = Matrix::Identity(m, m);  // P^(t)_{s+1}
    for (Eigen::Index s = t - 1; s >= 0; --s) {
        const Matrix& P = cached ? bundle.product(s + 1) : product;
        const Matrix costates = P * sections.transpose();  // m x n, column = g*_{s+1} for one query
        const Vector g = traj.states.col(s);
        for (Eigen::Index i = 0; i < q; ++i) {
            const Vector bg = apply(bank.ops[static_cast<std::size_t>(i)], g);
            jac.col(i + q * s) = costates.transpose() * bg / static_cast<double>(m);
        }
        if (!cached) {
            product = bundle.transitions[static_cast<std::size_t>(s)] * product;
        }
    }
    return jac;
}

}  // namespace kcontrol
