#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "kcontrol/subproblem.hpp"
#include "test_support.hpp"

namespace kc = kcontrol;
using kc::testing::random_matrix;
using kc::testing::random_vector;

TEST(RidgeSubproblem, ZeroResidualGivesZeroStep) {
    std::mt19937_64 rng(1);
    const kc::Matrix J = random_matrix(rng, 10, 4);
    for (double lambda : {0.0, 1e-3, 1.0}) {
        EXPECT_TRUE(kc::solve_ridge_subproblem(J, kc::Vector::Zero(10), lambda).isZero(0.0));
    }
}

TEST(RidgeSubproblem, IdentityInterpolates) {
    std::mt19937_64 rng(2);
    const kc::Vector y = random_vector(rng, 5);
    const kc::Vector beta = kc::solve_ridge_subproblem(kc::Matrix::Identity(5, 5), -y, 0.0);
    EXPECT_TRUE(beta.isApprox(y, 1e-14));
}

// Second implementation: explicit Gram assembly by loops and a Householder QR solve.
TEST(RidgeSubproblem, MatchesIndependentNormalEquations) {
    std::mt19937_64 rng(3);
    const kc::Matrix J = random_matrix(rng, 20, 6);
    const kc::Vector r = random_vector(rng, 20);
    const double lambda = 0.1;
    kc::Matrix G = kc::Matrix::Zero(6, 6);
    kc::Vector rhs = kc::Vector::Zero(6);
    for (int a = 0; a < 6; ++a) {
        for (int b = 0; b < 6; ++b) {
            double s = 0.0;
            for (int i = 0; i < 20; ++i) s += J(i, a) * J(i, b);
            G(a, b) = s / 20.0 + (a == b ? lambda : 0.0);
        }
        double s = 0.0;
        for (int i = 0; i < 20; ++i) s += J(i, a) * r(i);
        rhs(a) = -s / 20.0;
    }
    const kc::Vector expected = G.householderQr().solve(rhs);
    const kc::Vector beta = kc::solve_ridge_subproblem(J, r, lambda);
    EXPECT_LT((beta - expected).lpNorm<Eigen::Infinity>(), 1e-10);
}

TEST(RidgeSubproblem, SatisfiesNormalEquations) {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        const kc::Matrix J = random_matrix(rng, 30, 8, 2.0);
        const kc::Vector r = random_vector(rng, 30);
        const double lambda = std::pow(10.0, -trial * 0.5);
        const kc::Vector beta = kc::solve_ridge_subproblem(J, r, lambda);
        const kc::Vector lhs = (J.transpose() * J / 30.0 + lambda * kc::Matrix::Identity(8, 8)) * beta +
                               J.transpose() * r / 30.0;
        EXPECT_LT(lhs.lpNorm<Eigen::Infinity>(), 1e-9) << "lambda " << lambda;
    }
}

TEST(RidgeSubproblem, RankDeficientUnregularizedIsMinimumNorm) {
    std::mt19937_64 rng(5);
    const kc::Matrix A = random_matrix(rng, 12, 3);
    kc::Matrix J(12, 5);
    J << A, A.col(0) + A.col(1), A.col(2) - A.col(0);  // rank 3
    const kc::Vector r = random_vector(rng, 12);
    const kc::Vector beta = kc::solve_ridge_subproblem(J, r, 0.0);
    // Oracle: pseudo-inverse from an eigen-decomposition of J^T J.
    Eigen::SelfAdjointEigenSolver<kc::Matrix> eig(J.transpose() * J);
    kc::Vector inv = eig.eigenvalues();
    for (int i = 0; i < inv.size(); ++i) inv(i) = inv(i) > 1e-9 * eig.eigenvalues().maxCoeff() ? 1.0 / inv(i) : 0.0;
    const kc::Vector expected = -(eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose()) *
                                (J.transpose() * r);
    EXPECT_LT((beta - expected).lpNorm<Eigen::Infinity>(), 1e-9);
}

TEST(RidgeSubproblem, RejectsBadInput) {
    kc::Matrix J = kc::Matrix::Identity(3, 3);
    EXPECT_THROW((void)kc::solve_ridge_subproblem(J, kc::Vector::Ones(2), 0.1), kc::InputError);
    EXPECT_THROW((void)kc::solve_ridge_subproblem(J, kc::Vector::Ones(3), -1.0), kc::InputError);
    J(1, 1) = std::nan("");
    EXPECT_THROW((void)kc::solve_ridge_subproblem(J, kc::Vector::Ones(3), 0.1), kc::InputError);
}

TEST(LogisticSubproblem, ZeroJacobianGivesZero) {
    std::mt19937_64 rng(6);
    const kc::Vector offsets = random_vector(rng, 8);
    kc::Vector labels(8);
    labels << 0, 1, 1, 0, 1, 0, 0, 1;
    for (double lambda : {0.0, 0.1}) {
        const kc::Vector beta = kc::solve_logistic_subproblem(kc::Matrix::Zero(8, 3), offsets, labels, lambda);
        EXPECT_TRUE(beta.isZero(0.0));
    }
}

TEST(LogisticSubproblem, SeparatedDataStaysFiniteWithRidge) {
    const int n = 20;
    kc::Matrix J(n, 1);
    kc::Vector labels(n);
    for (int i = 0; i < n; ++i) {
        const double x = -1.0 + 2.0 * i / (n - 1.0);
        J(i, 0) = x;
        labels(i) = x > 0.0 ? 1.0 : 0.0;
    }
    const kc::Vector offsets = kc::Vector::Zero(n);
    const double lambda = 0.1;
    const auto info = kc::solve_logistic_subproblem_detailed(J, offsets, labels, lambda);
    ASSERT_TRUE(info.beta.allFinite());
    EXPECT_LT(info.gradient_norm, 1e-8);
    // Dense grid search over [-50, 50] with an independently coded objective.
    auto objective = [&](double b) {
        double v = 0.0;
        for (int i = 0; i < n; ++i) {
            const double z = J(i, 0) * b;
            v += std::log1p(std::exp(z)) - labels(i) * z;
        }
        return v / n + lambda * b * b;
    };
    double best = objective(-50.0);
    double best_b = -50.0;
    for (int k = 0; k <= 1000000; ++k) {
        const double b = -50.0 + 100.0 * k / 1e6;
        const double v = objective(b);
        if (v < best) best = v, best_b = b;
    }
    EXPECT_LE(objective(info.beta(0)), best + 1e-12);
    EXPECT_NEAR(info.beta(0), best_b, 1e-3);
}

TEST(LogisticSubproblem, FittedOffsetsGiveZeroStep) {
    std::mt19937_64 rng(7);
    const kc::Matrix J = random_matrix(rng, 10, 3);
    kc::Vector labels(10), offsets(10);
    for (int i = 0; i < 10; ++i) {
        labels(i) = i % 2;
        offsets(i) = labels(i) == 1.0 ? 40.0 : -40.0;
    }
    const kc::Vector beta = kc::solve_logistic_subproblem(J, offsets, labels, 0.0);
    EXPECT_LT(beta.lpNorm<Eigen::Infinity>(), 1e-6);
}

TEST(LogisticSubproblem, StationaryWithExtraBlock) {
    std::mt19937_64 rng(8);
    const kc::Matrix J = random_matrix(rng, 25, 4);
    const kc::Vector offsets = random_vector(rng, 25, 0.5);
    kc::Vector labels(25);
    std::bernoulli_distribution coin(0.5);
    for (int i = 0; i < 25; ++i) labels(i) = coin(rng) ? 1.0 : 0.0;
    kc::LeastSquaresBlock extra{random_matrix(rng, 6, 4), random_vector(rng, 6)};
    const double lambda = 0.01;
    const auto info = kc::solve_logistic_subproblem_detailed(J, offsets, labels, lambda, extra);
    ASSERT_LT(info.gradient_norm, 1e-8);
    // Central finite differences of the objective vanish at the returned point.
    for (int k = 0; k < 4; ++k) {
        kc::Vector p = info.beta, m = info.beta;
        p(k) += 1e-5;
        m(k) -= 1e-5;
        const double fd = (kc::logistic_subproblem_objective(J, offsets, labels, lambda, p, extra) -
                           kc::logistic_subproblem_objective(J, offsets, labels, lambda, m, extra)) /
                          2e-5;
        EXPECT_LT(std::abs(fd), 1e-7);
    }
}

TEST(LogisticSubproblem, RejectsNonBinaryLabels) {
    const kc::Vector labels = kc::Vector::Constant(4, 0.5);
    EXPECT_THROW((void)kc::solve_logistic_subproblem(kc::Matrix::Identity(4, 2), kc::Vector::Zero(4), labels, 0.1),
                 kc::InputError);
}
