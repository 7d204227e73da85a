#pragma once

// Control-fitting algorithms:
//   - gradient descent on the adjoint gradient,
//   - iterative regression (Gauss-Newton style steps on the linearized h_t),
//   - enhanced iterative regression (adds a final unregularized step and
//     returns the linearized predictor).

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kcontrol/costs.hpp"
#include "kcontrol/dataset.hpp"
#include "kcontrol/error.hpp"
#include "kcontrol/objective.hpp"
#include "kcontrol/operators.hpp"
#include "kcontrol/propagation.hpp"
#include "kcontrol/rkhs.hpp"
#include "kcontrol/seeding.hpp"
#include "kcontrol/subproblem.hpp"

namespace kcontrol {

enum class Algorithm { GradientDescent, IterativeRegression, EnhancedIterativeRegression };

inline const char* to_string(Algorithm a) {
    switch (a) {
        case Algorithm::GradientDescent: return "gradient-descent";
        case Algorithm::IterativeRegression: return "iterative-regression";
        case Algorithm::EnhancedIterativeRegression: return "enhanced-iterative-regression";
    }
    return "unknown";
}

inline Algorithm algorithm_from_string(const std::string& name) {
    if (name == "gradient-descent" || name == "gd" || name == "1") return Algorithm::GradientDescent;
    if (name == "iterative-regression" || name == "ir" || name == "2") return Algorithm::IterativeRegression;
    if (name == "enhanced-iterative-regression" || name == "eir" || name == "3") {
        return Algorithm::EnhancedIterativeRegression;
    }
    throw InputError("unknown algorithm '" + name + "'");
}

struct OptimizerConfig {
    Algorithm algorithm = Algorithm::IterativeRegression;
    double learning_rate = 1e-3;
    double lambda = 1e-3;
    Eigen::Index batch_size = 300;
    long max_iterations = 100;
    double rel_tol = 1e-8;
    double init_mean = 0.0;
    double init_std = 1.0;
    std::uint64_t seed = 0;
    long window = 50;  // iterations between full-training-cost checks

    void validate() const {
        if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
            throw InputError("learning rate must be finite and non-negative");
        }
        if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
            throw InputError("ridge lambda must be finite and non-negative");
        }
        if (batch_size < 1) throw InputError("batch size must be positive");
        if (max_iterations < 0) throw InputError("max_iterations must be non-negative");
        if (!(rel_tol >= 0.0)) throw InputError("rel_tol must be non-negative");
        if (!(init_std >= 0.0) || !std::isfinite(init_mean)) throw InputError("invalid initial-control distribution");
        if (window < 1) throw InputError("stopping window must be positive");
    }
};

/// Support, operators and initial constant shared by every run.
struct ControlSystem {
    std::shared_ptr<const SupportSet> support;
    OperatorBank bank;
    double offset = 1.0;

    void validate() const {
        if (!support) throw InputError("control system has no support set");
        if (bank.dim() != support->size()) throw InputError("operator bank does not match support size");
    }
};

struct FitHistory {
    std::vector<double> minibatch_costs;  // cost on each iteration's minibatch, before its update
    std::vector<double> window_costs;     // full-training cost every `window` iterations
    std::vector<long> window_iterations;
    long iterations = 0;
    bool converged = false;  // stopped on rel_tol rather than max_iterations
};

struct FittedModel {
    ControlMatrix control;
    OperatorBank bank;
    std::shared_ptr<const SupportSet> support;
    double offset = 1.0;
    Trajectory trajectory;
    FitHistory history;
    std::uint64_t seed = 0;

    [[nodiscard]] RkhsFunction terminal_function() const { return h_function(trajectory, support, trajectory.horizon()); }
};

/// h_T(u) + D_u h_T(u) beta, with the Jacobian folded into a weight shift.
struct LinearizedModel {
    FittedModel base;
    Matrix beta;           // q x T
    Matrix basis;          // m x qT tangent basis of h_T at the base control
    Vector weight_shift;   // basis * vec(beta)
    std::vector<Eigen::Index> final_batch;

    [[nodiscard]] static LinearizedModel from_beta(FittedModel base, Matrix beta) {
        if (beta.rows() != base.control.q() || beta.cols() != base.control.horizon()) {
            throw InputError("beta must have the control's shape");
        }
        LinearizedModel lin;
        lin.basis = sensitivity_basis(base.trajectory, base.bank, *base.support, base.trajectory.horizon());
        lin.weight_shift = lin.basis * beta.reshaped();
        lin.beta = std::move(beta);
        lin.base = std::move(base);
        return lin;
    }

    /// D_u h_T(x), computed from the cached basis.
    [[nodiscard]] Eigen::RowVectorXd jacobian_row(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
        return base.support->section(x).transpose() * basis / static_cast<double>(base.support->size());
    }
};

template <typename Derived>
[[nodiscard]] double predict(const FittedModel& model, const Eigen::MatrixBase<Derived>& x) {
    return eval_function(model.terminal_function(), x);
}

template <typename Derived>
[[nodiscard]] double predict(const LinearizedModel& model, const Eigen::MatrixBase<Derived>& x) {
    const Vector k = model.base.support->section(x);
    const RkhsFunction h = model.base.terminal_function();
    return h.offset + k.dot(h.weights + model.weight_shift) / static_cast<double>(k.size());
}

[[nodiscard]] inline Vector predict_rows(const FittedModel& model, const PointSet& X) {
    return eval_function_rows(model.terminal_function(), X);
}

[[nodiscard]] inline Vector predict_rows(const LinearizedModel& model, const PointSet& X) {
    RkhsFunction h = model.base.terminal_function();
    h.weights += model.weight_shift;
    return eval_function_rows(h, X);
}

namespace detail {

enum : std::uint64_t { kStreamInit = 1, kStreamBatch = 2 };

/// Training set with its kernel sections cached once per run.
struct TrainingCache {
    const Dataset& data;
    Matrix sections;  // N x m

    TrainingCache(const Dataset& d, const SupportSet& support) : data(d), sections(support.sections(d.inputs)) {}

    [[nodiscard]] Batch batch(const std::vector<Eigen::Index>& rows) const {
        Batch b;
        const auto n = static_cast<Eigen::Index>(rows.size());
        b.inputs.resize(n, data.dim());
        b.targets.resize(n);
        b.sections.resize(n, sections.cols());
        for (Eigen::Index k = 0; k < n; ++k) {
            const Eigen::Index r = rows[static_cast<std::size_t>(k)];
            b.inputs.row(k) = data.inputs.row(r);
            b.targets(k) = data.targets(r);
            b.sections.row(k) = sections.row(r);
        }
        return b;
    }

    [[nodiscard]] Batch full() const { return Batch{data.inputs, data.targets, sections}; }
};

class MinibatchSampler {
public:
    MinibatchSampler(std::uint64_t seed, Eigen::Index population, Eigen::Index size)
        : rng_(stream_seed(seed, kStreamBatch)), pick_(0, population - 1), size_(size) {}

    std::vector<Eigen::Index> next() {
        std::vector<Eigen::Index> rows(static_cast<std::size_t>(size_));
        for (auto& r : rows) {
            r = pick_(rng_);
        }
        return rows;
    }

private:
    std::mt19937_64 rng_;
    std::uniform_int_distribution<Eigen::Index> pick_;
    Eigen::Index size_;
};

inline void check_training(const Dataset& train, const ControlSystem& system, const CostModel& cost) {
    system.validate();
    cost.validate();
    train.validate();
    if (train.size() < 1) throw InputError("training set is empty");
    if (train.dim() != system.support->dim()) throw InputError("training inputs do not match the support dimension");
    if (cost.terminal == TerminalKind::CrossEntropy) {
        detail::check_binary(train.targets);
    }
}

}  // namespace detail

/// u^(0) with i.i.d. N(mu, sigma^2) entries from the run's seed.
[[nodiscard]] inline ControlMatrix initial_control(const OptimizerConfig& config, Eigen::Index q, Eigen::Index horizon) {
    std::mt19937_64 rng(detail::stream_seed(config.seed, detail::kStreamInit));
    Matrix u(q, horizon);
    if (config.init_std == 0.0) {
        u.setConstant(config.init_mean);
        return ControlMatrix(u);
    }
    std::normal_distribution<double> normal(config.init_mean, config.init_std);
    for (Eigen::Index t = 0; t < horizon; ++t) {
        for (Eigen::Index i = 0; i < q; ++i) {
            u(i, t) = normal(rng);
        }
    }
    return ControlMatrix(u);
}

namespace detail {

/// Runs the fitting loop shared by all algorithms. `step` maps
/// (iteration, control, trajectory, batch) to the new control.
template <typename Step>
FittedModel run_fit(const OptimizerConfig& config, const CostModel& cost, const Dataset& train,
                    const ControlSystem& system, Eigen::Index horizon, Step&& step) {
    config.validate();
    check_training(train, system, cost);
    if (horizon < 1) throw InputError("horizon T must be at least 1");

    ControlMatrix control = initial_control(config, system.bank.size(), horizon);
    const TrainingCache cache(train, *system.support);
    MinibatchSampler sampler(config.seed, train.size(), config.batch_size);
    FitHistory history;

    auto full_cost = [&](const Trajectory& traj) {
        return evaluate_objective(cost, traj, system.bank, *system.support, cache.full(), false).value;
    };

    auto solve = [&](const ControlMatrix& u, long iteration) {
        try {
            return forward_solve(u, system.bank, *system.support, system.offset);
        } catch (const DivergenceError& e) {
            throw FittingError(std::string("iteration ") + std::to_string(iteration) + ": " + e.what(), iteration);
        }
    };

    Trajectory traj = solve(control, 0);
    long i = 0;
    for (; i < config.max_iterations; ++i) {
        if (i % config.window == 0) {
            history.window_costs.push_back(full_cost(traj));
            history.window_iterations.push_back(i);
            const auto w = history.window_costs.size();
            if (w >= 2) {
                const double prev = history.window_costs[w - 2];
                const double cur = history.window_costs[w - 1];
                if (std::abs(prev - cur) <= config.rel_tol * std::abs(prev)) {
                    history.converged = true;
                    break;
                }
            }
        }
        const Batch batch = cache.batch(sampler.next());
        control = step(i, control, traj, batch, history);
        if (!control.values().allFinite()) {
            throw FittingError("iteration " + std::to_string(i) + ": non-finite control update", i);
        }
        traj = solve(control, i + 1);
    }
    history.iterations = i;
    if (history.window_iterations.empty() || history.window_iterations.back() != i) {
        history.window_costs.push_back(full_cost(traj));
        history.window_iterations.push_back(i);
    }
    return FittedModel{control, system.bank, system.support, system.offset, std::move(traj), std::move(history),
                       config.seed};
}

}  // namespace detail

/// Minimizer over beta of the cost of the linearized h_t plus lambda |beta|^2
/// on one batch. Returns beta in the q x T control layout.
[[nodiscard]] inline Matrix linearized_step(const CostModel& cost, const Trajectory& traj, const OperatorBank& bank,
                                            const SupportSet& support, const Batch& batch, double lambda) {
    const Eigen::Index T = traj.horizon();
    const Eigen::Index q = bank.size();
    const Eigen::Index p = q * T;
    const double n = static_cast<double>(batch.size());
    const double inv_m = 1.0 / static_cast<double>(support.size());

    const Matrix h_all = cost.has_tracking() ? h_values_all_times(traj, batch.sections) : Matrix();
    const Vector h_T = cost.has_tracking() ? Vector(h_all.col(T)) : h_terminal_values(traj, batch.sections);
    const Matrix J_T = batch.sections * sensitivity_basis(traj, bank, support, T) * inv_m;

    // Running terms as extra least-squares rows, all carrying the 1/n weight.
    std::vector<Matrix> extra_J;
    std::vector<Vector> extra_r;
    if (cost.has_tracking()) {
        for (Eigen::Index t = 1; t < T; ++t) {
            extra_J.push_back(batch.sections * sensitivity_basis(traj, bank, support, t) * inv_m);
            extra_r.push_back(h_all.col(t) - running_targets_at(cost, t, batch));
        }
    }
    if (cost.control_penalty > 0.0) {
        const double w = std::sqrt(n * cost.control_penalty);
        Matrix J = Matrix::Identity(p, p) * w;
        extra_J.push_back(std::move(J));
        extra_r.push_back(traj.control.flattened() * w);
    }
    Eigen::Index extra_rows = 0;
    for (const auto& J : extra_J) extra_rows += J.rows();

    Vector beta;
    if (cost.terminal == TerminalKind::SquaredError) {
        const Eigen::Index rows = J_T.rows() + extra_rows;
        Matrix J(rows, p);
        Vector r(rows);
        J.topRows(J_T.rows()) = J_T;
        r.head(J_T.rows()) = h_T - batch.targets;
        Eigen::Index at = J_T.rows();
        for (std::size_t k = 0; k < extra_J.size(); ++k) {
            J.middleRows(at, extra_J[k].rows()) = extra_J[k];
            r.segment(at, extra_r[k].size()) = extra_r[k];
            at += extra_J[k].rows();
        }
        // solve_ridge_subproblem averages over its own row count.
        const double scale = std::sqrt(static_cast<double>(rows) / n);
        beta = solve_ridge_subproblem(J * scale, r * scale, lambda);
    } else {
        std::optional<LeastSquaresBlock> extra;
        if (extra_rows > 0) {
            LeastSquaresBlock block{Matrix(extra_rows, p), Vector(extra_rows)};
            Eigen::Index at = 0;
            for (std::size_t k = 0; k < extra_J.size(); ++k) {
                block.jacobian.middleRows(at, extra_J[k].rows()) = extra_J[k];
                block.residual.segment(at, extra_r[k].size()) = extra_r[k];
                at += extra_J[k].rows();
            }
            extra = std::move(block);
        }
        beta = solve_logistic_subproblem(J_T, h_T, batch.targets, lambda, extra);
    }
    return beta.reshaped(q, T);
}

[[nodiscard]] inline FittedModel fit_sgd(const OptimizerConfig& config, const CostModel& cost, const Dataset& train,
                                         const ControlSystem& system, Eigen::Index horizon) {
    if (config.algorithm != Algorithm::GradientDescent) {
        throw InputError("fit_sgd requires the gradient-descent algorithm");
    }
    return detail::run_fit(config, cost, train, system, horizon,
                           [&](long i, const ControlMatrix& u, const Trajectory& traj, const Batch& batch,
                               FitHistory& history) {
                               const ObjectiveEvaluation eval =
                                   evaluate_objective(cost, traj, system.bank, *system.support, batch, true);
                               history.minibatch_costs.push_back(eval.value);
                               if (!eval.gradient.allFinite()) {
                                   throw FittingError("iteration " + std::to_string(i) + ": non-finite gradient", i);
                               }
                               return u.plus(-config.learning_rate * eval.gradient);
                           });
}

[[nodiscard]] inline FittedModel fit_iterative_regression(const OptimizerConfig& config, const CostModel& cost,
                                                          const Dataset& train, const ControlSystem& system,
                                                          Eigen::Index horizon) {
    if (config.algorithm == Algorithm::GradientDescent) {
        throw InputError("fit_iterative_regression requires an iterative-regression algorithm");
    }
    return detail::run_fit(config, cost, train, system, horizon,
                           [&](long i, const ControlMatrix& u, const Trajectory& traj, const Batch& batch,
                               FitHistory& history) {
                               history.minibatch_costs.push_back(
                                   evaluate_objective(cost, traj, system.bank, *system.support, batch, false).value);
                               const Matrix beta =
                                   linearized_step(cost, traj, system.bank, *system.support, batch, config.lambda);
                               if (!beta.allFinite()) {
                                   throw FittingError("iteration " + std::to_string(i) + ": non-finite step", i);
                               }
                               return u.plus(beta);
                           });
}

/// Iterative regression followed by one unregularized step on a fresh
/// minibatch; the result predicts with the linearization around the
/// final control.
[[nodiscard]] inline LinearizedModel fit_enhanced(const OptimizerConfig& config, const CostModel& cost,
                                                  const Dataset& train, const ControlSystem& system,
                                                  Eigen::Index horizon) {
    if (config.algorithm != Algorithm::EnhancedIterativeRegression) {
        throw InputError("fit_enhanced requires the enhanced-iterative-regression algorithm");
    }
    FittedModel base = fit_iterative_regression(config, cost, train, system, horizon);

    // Fresh minibatch: continue the sampler stream past the iterations used.
    detail::MinibatchSampler sampler(config.seed, train.size(), config.batch_size);
    for (long i = 0; i < base.history.iterations; ++i) {
        (void)sampler.next();
    }
    const std::vector<Eigen::Index> rows = sampler.next();
    const detail::TrainingCache cache(train, *system.support);
    const Batch batch = cache.batch(rows);
    const Matrix beta = linearized_step(cost, base.trajectory, system.bank, *system.support, batch, 0.0);
    if (!beta.allFinite()) {
        throw FittingError("final regression step produced a non-finite step", base.history.iterations);
    }
    LinearizedModel lin = LinearizedModel::from_beta(std::move(base), beta);
    lin.final_batch = rows;
    return lin;
}

}  // namespace kcontrol
