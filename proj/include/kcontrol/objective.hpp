#pragma once

// Full cost E(u) = F(h_T) + sum_t L_t(h_t, u_t) on a batch, and its
// adjoint gradient.

#include <vector>

#include "kcontrol/costs.hpp"
#include "kcontrol/propagation.hpp"

namespace kcontrol {

struct ObjectiveEvaluation {
    double value = 0.0;
    double terminal = 0.0;
    Vector h_terminal;  // h_T at the batch inputs
    Matrix gradient;    // q x T, empty unless requested
};

[[nodiscard]] inline ObjectiveEvaluation evaluate_objective(const CostModel& model, const Trajectory& traj,
                                                            const OperatorBank& bank, const SupportSet& support,
                                                            const Batch& batch, bool with_gradient) {
    model.validate();
    const Eigen::Index T = traj.horizon();
    ObjectiveEvaluation out;

    Matrix h_all;
    if (model.has_tracking()) {
        h_all = h_values_all_times(traj, batch.sections);
        out.h_terminal = h_all.col(T);
    } else {
        out.h_terminal = h_terminal_values(traj, batch.sections);
    }

    out.terminal = terminal_cost(model.terminal, out.h_terminal, batch);
    out.value = out.terminal;

    std::vector<Vector> sources;
    Matrix control_grad = Matrix::Zero(bank.size(), T);
    if (model.has_running_cost()) {
        if (model.has_tracking()) {
            sources.reserve(static_cast<std::size_t>(T));
        }
        for (Eigen::Index t = 0; t < T; ++t) {
            const Vector h_t = model.has_tracking() ? Vector(h_all.col(t)) : Vector::Zero(batch.size());
            const RunningTerms terms = running_cost_and_grads(model, t, h_t, traj.control.column(t), batch);
            out.value += terms.value;
            if (model.has_tracking()) {
                sources.push_back(terms.source);
            }
            control_grad.col(t) = terms.control_grad;
        }
    }

    if (with_gradient) {
        const Vector terminal = terminal_gradient_at_support(model.terminal, out.h_terminal, batch);
        const CostateTrajectory costate = adjoint_sweep(traj.control, bank, support, terminal, sources);
        out.gradient = cost_gradient(traj, costate, bank,
                                     model.has_running_cost() ? std::optional<Matrix>(control_grad) : std::nullopt);
    }
    return out;
}

}  // namespace kcontrol
