#pragma once

// Shared fixtures and independent oracles for the test suites. Nothing in
// here calls the propagation or optimizer code paths it is used to check.

#include <cmath>
#include <functional>
#include <memory>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "kcontrol/costs.hpp"
#include "kcontrol/operators.hpp"
#include "kcontrol/propagation.hpp"
#include "kcontrol/rkhs.hpp"

namespace kcontrol::testing {

inline PointSet random_points(std::mt19937_64& rng, Eigen::Index n, Eigen::Index d, double lo = -2.0,
                              double hi = 2.0) {
    std::uniform_real_distribution<double> unif(lo, hi);
    PointSet X(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) {
            X(i, j) = unif(rng);
        }
    }
    return X;
}

inline Vector random_vector(std::mt19937_64& rng, Eigen::Index n, double sd = 1.0) {
    std::normal_distribution<double> normal(0.0, sd);
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = normal(rng);
    return v;
}

inline Matrix random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double sd = 1.0) {
    std::normal_distribution<double> normal(0.0, sd);
    Matrix M(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
        for (Eigen::Index i = 0; i < r; ++i) M(i, j) = normal(rng);
    return M;
}

/// A small random control system with a training batch.
struct Instance {
    std::shared_ptr<const SupportSet> support;
    OperatorBank bank;
    ControlMatrix control;
    double offset = 1.0;
    Batch batch;
};

inline Instance make_instance(std::uint64_t seed, Eigen::Index m, Eigen::Index T, Eigen::Index q, Eigen::Index n,
                              Eigen::Index d, double control_sd = 0.5, double scale = 1.0, bool binary = false) {
    std::mt19937_64 rng(seed);
    auto support = std::make_shared<const SupportSet>(random_points(rng, m, d), KernelSpec(scale));
    OperatorBank bank = make_operator_bank(seed + 17, m, q);
    ControlMatrix control(random_matrix(rng, q, T, control_sd));
    PointSet X = random_points(rng, n, d);
    Vector y(n);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (Eigen::Index i = 0; i < n; ++i) {
        y(i) = binary ? (unif(rng) < 0.5 ? 0.0 : 1.0) : std::sin(X(i, 0)) + 0.3 * X.row(i).sum();
    }
    Batch batch = make_batch(*support, X, y);
    return Instance{support, std::move(bank), std::move(control), 1.0, std::move(batch)};
}

/// Dense B[u_t] assembled entrywise from the operator definitions.
inline Matrix dense_combination(const OperatorBank& bank, const Eigen::VectorXd& u_t) {
    const Eigen::Index m = bank.dim();
    Matrix B = Matrix::Zero(m, m);
    for (Eigen::Index i = 0; i < bank.size(); ++i) {
        const auto& op = bank.ops[static_cast<std::size_t>(i)];
        for (Eigen::Index a = 0; a < m; ++a) {
            for (Eigen::Index b = 0; b < m; ++b) {
                if (op.kind == OperatorKind::Diagonal) {
                    B(a, b) += a == b ? u_t(i) * op.vector(a) : 0.0;
                } else {
                    B(a, b) += u_t(i) * op.vector(a) * op.vector(b) / static_cast<double>(m);
                }
            }
        }
    }
    return B;
}

/// Product-form solution g_t = prod_{s<t} (I + (1/m) K B[u_s]) g_0.
inline Vector product_form_state(const Instance& inst, Eigen::Index t) {
    const Eigen::Index m = inst.support->size();
    Matrix P = Matrix::Identity(m, m);
    for (Eigen::Index s = 0; s < t; ++s) {
        const Matrix step = Matrix::Identity(m, m) +
                            inst.support->gram() * dense_combination(inst.bank, inst.control.column(s)) /
                                static_cast<double>(m);
        P = step * P;
    }
    return P * Vector::Constant(m, inst.offset);
}

/// h_T at the batch by brute-force summation over the product-form states.
inline Vector brute_force_h(const Instance& inst, const ControlMatrix& u, const PointSet& X, Eigen::Index t) {
    const Eigen::Index m = inst.support->size();
    Matrix P = Matrix::Identity(m, m);
    Vector w = Vector::Zero(m);
    const Vector g0 = Vector::Constant(m, inst.offset);
    for (Eigen::Index s = 0; s < t; ++s) {
        const Matrix B = dense_combination(inst.bank, u.column(s));
        const Vector g = P * g0;
        w += B * g;
        P = (Matrix::Identity(m, m) + inst.support->gram() * B / static_cast<double>(m)) * P;
    }
    Vector h(X.rows());
    const double inv = 1.0 / (2.0 * inst.support->kernel().scale * inst.support->kernel().scale);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        double acc = 0.0;
        for (Eigen::Index j = 0; j < m; ++j) {
            const double d2 = (X.row(i) - inst.support->points().row(j)).squaredNorm();
            acc += std::exp(-d2 * inv) * w(j);
        }
        h(i) = inst.offset + acc / static_cast<double>(m);
    }
    return h;
}

/// E(u) = F(h_T) + sum_{t<T} [(1/n)|h_t - f_t|^2 + lambda_u |u_t|^2], every h_t by brute force.
inline double brute_force_cost(const Instance& inst, const CostModel& model, const ControlMatrix& u) {
    const PointSet& X = inst.batch.inputs;
    const Vector& y = inst.batch.targets;
    const double n = static_cast<double>(X.rows());
    const Vector hT = brute_force_h(inst, u, X, u.horizon());
    double value = 0.0;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        if (model.terminal == TerminalKind::SquaredError) {
            value += (hT(i) - y(i)) * (hT(i) - y(i));
        } else {
            value += std::log(1.0 + std::exp(hT(i))) - y(i) * hT(i);
        }
    }
    value /= n;
    for (Eigen::Index t = 0; t < u.horizon(); ++t) {
        if (model.running_target) {
            const Vector ht = brute_force_h(inst, u, X, t);
            for (Eigen::Index i = 0; i < X.rows(); ++i) {
                const double d = ht(i) - model.running_target(t, X.row(i));
                value += d * d / n;
            }
        }
        value += model.control_penalty * u.column(t).squaredNorm();
    }
    return value;
}

/// Central finite differences of a scalar function of the control.
inline Matrix finite_difference_gradient(const std::function<double(const ControlMatrix&)>& f, const ControlMatrix& u,
                                         double step = 1e-5) {
    Matrix grad(u.q(), u.horizon());
    for (Eigen::Index t = 0; t < u.horizon(); ++t) {
        for (Eigen::Index i = 0; i < u.q(); ++i) {
            Matrix plus = u.values();
            Matrix minus = u.values();
            plus(i, t) += step;
            minus(i, t) -= step;
            grad(i, t) = (f(ControlMatrix(plus)) - f(ControlMatrix(minus))) / (2.0 * step);
        }
    }
    return grad;
}

/// Relative error with an absolute floor for entries near zero.
inline double relative_error(double a, double b, double floor = 1e-6) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace kcontrol::testing
