#pragma once

// Control operators B_i acting on the pulled-down space R^m, whose inner
// product is <a, b> = (1/m) a^T b.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kcontrol/error.hpp"
#include "kcontrol/rkhs.hpp"

namespace kcontrol {

enum class OperatorKind { Diagonal, RankOne };

inline const char* to_string(OperatorKind kind) {
    return kind == OperatorKind::Diagonal ? "diagonal" : "rank_one";
}

inline OperatorKind operator_kind_from_string(const std::string& name) {
    if (name == "diagonal") return OperatorKind::Diagonal;
    if (name == "rank_one") return OperatorKind::RankOne;
    throw InputError("unknown operator kind '" + name + "'");
}

/// Diagonal: B g = b o g, with |B| = max_j |b_j|.
/// RankOne:  B g = ((1/m) beta^T g) beta, with |B| = (1/m) sum_j beta_j^2.
struct ControlOperator {
    OperatorKind kind = OperatorKind::Diagonal;
    Vector vector;

    [[nodiscard]] Eigen::Index dim() const noexcept { return vector.size(); }

    /// Operator norm on L^2 of the empirical measure.
    [[nodiscard]] double norm() const {
        if (kind == OperatorKind::Diagonal) {
            return vector.cwiseAbs().maxCoeff();
        }
        return vector.squaredNorm() / static_cast<double>(vector.size());
    }

    /// Rescale so that norm() == 1.
    [[nodiscard]] static ControlOperator normalized(OperatorKind kind, Vector raw) {
        if (raw.size() == 0 || !raw.allFinite()) {
            throw InputError("operator vector must be non-empty and finite");
        }
        ControlOperator op{kind, std::move(raw)};
        const double n = op.norm();
        if (!(n > 0.0)) {
            throw InputError("cannot normalize a zero operator vector");
        }
        op.vector /= kind == OperatorKind::Diagonal ? n : std::sqrt(n);
        return op;
    }
};

struct OperatorBank {
    std::vector<ControlOperator> ops;

    OperatorBank() = default;
    explicit OperatorBank(std::vector<ControlOperator> o) : ops(std::move(o)) {
        if (ops.empty()) {
            throw InputError("operator bank needs at least one operator");
        }
        for (const auto& op : ops) {
            if (op.dim() != ops.front().dim()) {
                throw InputError("all operators in a bank must share the dimension m");
            }
        }
    }

    [[nodiscard]] Eigen::Index size() const noexcept { return static_cast<Eigen::Index>(ops.size()); }
    [[nodiscard]] Eigen::Index dim() const noexcept { return ops.empty() ? 0 : ops.front().dim(); }
};

namespace detail {

inline void check_operand(const ControlOperator& op, Eigen::Index n) {
    if (op.dim() != n) {
        throw InputError("operator of dimension " + std::to_string(op.dim()) +
                         " applied to vector of dimension " + std::to_string(n));
    }
}

}  // namespace detail

[[nodiscard]] inline Vector apply(const ControlOperator& op, const Vector& g) {
    detail::check_operand(op, g.size());
    if (op.kind == OperatorKind::Diagonal) {
        return op.vector.cwiseProduct(g);
    }
    return (op.vector.dot(g) / static_cast<double>(g.size())) * op.vector;
}

/// Column-wise application to an m x k block.
[[nodiscard]] inline Matrix apply(const ControlOperator& op, const Matrix& G) {
    detail::check_operand(op, G.rows());
    if (op.kind == OperatorKind::Diagonal) {
        return op.vector.asDiagonal() * G;
    }
    const Eigen::RowVectorXd coeffs = (op.vector.transpose() * G) / static_cast<double>(G.rows());
    return op.vector * coeffs;
}

/// Adjoint under the (1/m)-weighted inner product. Both kinds are
/// self-adjoint there; the switch is kept for operators that are not.
[[nodiscard]] inline Vector apply_adjoint(const ControlOperator& op, const Vector& g) {
    switch (op.kind) {
        case OperatorKind::Diagonal:
        case OperatorKind::RankOne:
            return apply(op, g);
    }
    throw InputError("unsupported operator kind");
}

[[nodiscard]] inline Matrix apply_adjoint(const ControlOperator& op, const Matrix& G) {
    switch (op.kind) {
        case OperatorKind::Diagonal:
        case OperatorKind::RankOne:
            return apply(op, G);
    }
    throw InputError("unsupported operator kind");
}

/// B[u_t] g = sum_i u_{i,t} B_i g.
template <typename Derived>
[[nodiscard]] Vector apply_combination(const OperatorBank& bank, const Eigen::MatrixBase<Derived>& u_t,
                                       const Vector& g) {
    if (u_t.size() != bank.size()) {
        throw InputError("control column has " + std::to_string(u_t.size()) + " entries, bank has " +
                         std::to_string(bank.size()) + " operators");
    }
    Vector out = Vector::Zero(g.size());
    for (Eigen::Index i = 0; i < bank.size(); ++i) {
        out += u_t(i) * apply(bank.ops[static_cast<std::size_t>(i)], g);
    }
    return out;
}

template <typename Derived>
[[nodiscard]] Vector apply_adjoint_combination(const OperatorBank& bank, const Eigen::MatrixBase<Derived>& u_t,
                                               const Vector& g) {
    if (u_t.size() != bank.size()) {
        throw InputError("control column does not match the operator bank");
    }
    Vector out = Vector::Zero(g.size());
    for (Eigen::Index i = 0; i < bank.size(); ++i) {
        out += u_t(i) * apply_adjoint(bank.ops[static_cast<std::size_t>(i)], g);
    }
    return out;
}

template <typename Derived>
[[nodiscard]] Matrix apply_adjoint_combination(const OperatorBank& bank, const Eigen::MatrixBase<Derived>& u_t,
                                               const Matrix& G) {
    if (u_t.size() != bank.size()) {
        throw InputError("control column does not match the operator bank");
    }
    Matrix out = Matrix::Zero(G.rows(), G.cols());
    for (Eigen::Index i = 0; i < bank.size(); ++i) {
        out += u_t(i) * apply_adjoint(bank.ops[static_cast<std::size_t>(i)], G);
    }
    return out;
}

/// Dense matrix of B[u_t] acting on R^m.
template <typename Derived>
[[nodiscard]] Matrix combination_matrix(const OperatorBank& bank, const Eigen::MatrixBase<Derived>& u_t) {
    const Eigen::Index m = bank.dim();
    Matrix out = Matrix::Zero(m, m);
    for (Eigen::Index i = 0; i < bank.size(); ++i) {
        const auto& op = bank.ops[static_cast<std::size_t>(i)];
        if (op.kind == OperatorKind::Diagonal) {
            out.diagonal() += u_t(i) * op.vector;
        } else {
            out += (u_t(i) / static_cast<double>(m)) * op.vector * op.vector.transpose();
        }
    }
    return out;
}

/// Default bank: operator 0 diagonal, operator 1 rank-one, both of unit
/// norm, built from seeded standard-normal draws.
[[nodiscard]] inline OperatorBank make_operator_bank(std::uint64_t seed, Eigen::Index m, Eigen::Index q) {
    if (m < 1 || q < 1) {
        throw InputError("make_operator_bank requires m >= 1 and q >= 1");
    }
    if (q > 2) {
        throw InputError("default operator construction provides q <= 2 (diagonal, rank-one); "
                         "pass an explicit operator list for larger q");
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<ControlOperator> ops;
    const OperatorKind kinds[2] = {OperatorKind::Diagonal, OperatorKind::RankOne};
    for (Eigen::Index i = 0; i < q; ++i) {
        Vector raw(m);
        for (Eigen::Index j = 0; j < m; ++j) {
            raw(j) = normal(rng);
        }
        ops.push_back(ControlOperator::normalized(kinds[i], std::move(raw)));
    }
    return OperatorBank(std::move(ops));
}

}  // namespace kcontrol
