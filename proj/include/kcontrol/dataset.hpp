#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kcontrol/error.hpp"
#include "kcontrol/rkhs.hpp"

namespace kcontrol {

enum class Task { Regression, BinaryClassification };

inline const char* to_string(Task task) {
    return task == Task::Regression ? "regression" : "classification";
}

/// Per-feature z-score statistics.
struct FeatureStats {
    Vector mean;
    Vector stddev;

    [[nodiscard]] PointSet apply(const PointSet& X) const {
        if (X.cols() != mean.size()) {
            throw InputError("feature statistics do not match the data dimension");
        }
        return (X.rowwise() - mean.transpose()).array().rowwise() / stddev.transpose().array();
    }

    /// Population statistics; constant columns keep unit scale.
    [[nodiscard]] static FeatureStats fit(const PointSet& X) {
        if (X.rows() == 0) {
            throw InputError("cannot compute feature statistics of an empty set");
        }
        FeatureStats stats;
        stats.mean = X.colwise().mean().transpose();
        stats.stddev = ((X.rowwise() - stats.mean.transpose()).array().square().colwise().sum() /
                        static_cast<double>(X.rows()))
                           .sqrt()
                           .transpose();
        for (Eigen::Index j = 0; j < stats.stddev.size(); ++j) {
            if (!(stats.stddev(j) > 0.0)) {
                stats.stddev(j) = 1.0;
            }
        }
        return stats;
    }
};

struct Dataset {
    PointSet inputs;
    Vector targets;
    Task task = Task::Regression;
    std::optional<FeatureStats> feature_stats;
    std::vector<std::string> feature_names;
    std::string target_name = "target";

    [[nodiscard]] Eigen::Index size() const noexcept { return inputs.rows(); }
    [[nodiscard]] Eigen::Index dim() const noexcept { return inputs.cols(); }

    void validate() const {
        if (inputs.rows() != targets.size()) {
            throw InputError("dataset inputs and targets differ in length");
        }
        if (task == Task::BinaryClassification) {
            for (Eigen::Index i = 0; i < targets.size(); ++i) {
                if (targets(i) != 0.0 && targets(i) != 1.0) {
                    throw SchemaError("classification target at row " + std::to_string(i) + " is not 0/1");
                }
            }
        }
    }

    [[nodiscard]] Dataset subset(const std::vector<Eigen::Index>& rows) const {
        Dataset out;
        out.inputs.resize(static_cast<Eigen::Index>(rows.size()), dim());
        out.targets.resize(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t k = 0; k < rows.size(); ++k) {
            out.inputs.row(static_cast<Eigen::Index>(k)) = inputs.row(rows[k]);
            out.targets(static_cast<Eigen::Index>(k)) = targets(rows[k]);
        }
        out.task = task;
        out.feature_stats = feature_stats;
        out.feature_names = feature_names;
        out.target_name = target_name;
        return out;
    }

    [[nodiscard]] std::vector<std::string> resolved_feature_names() const {
        if (static_cast<Eigen::Index>(feature_names.size()) == dim()) {
            return feature_names;
        }
        std::vector<std::string> names;
        for (Eigen::Index j = 0; j < dim(); ++j) {
            names.push_back("feature_" + std::to_string(j));
        }
        return names;
    }
};

}  // namespace kcontrol
