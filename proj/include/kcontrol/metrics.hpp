#pragma once

#include <cmath>
#include <optional>

#include <Eigen/Dense>

#include "kcontrol/dataset.hpp"
#include "kcontrol/error.hpp"

namespace kcontrol {

struct Metrics {
    std::optional<double> rmse;
    std::optional<double> mape;
    std::optional<double> accuracy;
    std::optional<double> f1;
};

/// Scores at or above this value are classified as 1.
inline constexpr double kDecisionThreshold = 0.5;

/// Regression: rmse, and mape over targets with |y| > 1e-12 (absent if none).
/// Classification: accuracy and F1 of the thresholded scores.
[[nodiscard]] inline Metrics compute_metrics(const Vector& predictions, const Vector& targets, Task task) {
    if (predictions.size() != targets.size()) {
        throw InputError("compute_metrics: " + std::to_string(predictions.size()) + " predictions for " +
                         std::to_string(targets.size()) + " targets");
    }
    if (targets.size() == 0) throw InputError("compute_metrics: empty input");
    Metrics m;
    const double n = static_cast<double>(targets.size());
    if (task == Task::Regression) {
        m.rmse = std::sqrt((predictions - targets).squaredNorm() / n);
        double total = 0.0;
        long counted = 0;
        for (Eigen::Index i = 0; i < targets.size(); ++i) {
            if (std::abs(targets(i)) > 1e-12) {
                total += std::abs(predictions(i) - targets(i)) / std::abs(targets(i));
                ++counted;
            }
        }
        if (counted > 0) m.mape = total / static_cast<double>(counted);
        return m;
    }
    long tp = 0, fp = 0, fn = 0, correct = 0;
    for (Eigen::Index i = 0; i < targets.size(); ++i) {
        const bool predicted = predictions(i) >= kDecisionThreshold;
        const bool actual = targets(i) == 1.0;
        if (predicted == actual) ++correct;
        if (predicted && actual) ++tp;
        if (predicted && !actual) ++fp;
        if (!predicted && actual) ++fn;
    }
    m.accuracy = static_cast<double>(correct) / n;
    const double precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    const double recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    m.f1 = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    return m;
}

}  // namespace kcontrol
