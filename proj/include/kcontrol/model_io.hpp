#pragma once

// Versioned JSON persistence for fitted and linearized models.

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kcontrol/costs.hpp"
#include "kcontrol/data.hpp"
#include "kcontrol/dataset.hpp"
#include "kcontrol/error.hpp"
#include "kcontrol/optimize.hpp"

namespace kcontrol {

inline constexpr const char* kModelFormat = "kcontrol-model";
inline constexpr int kModelVersion = 1;

/// Everything a saved model needs to predict on raw (unstandardized) inputs.
struct ModelArtifact {
    FittedModel fitted;
    std::optional<LinearizedModel> linearized;
    Task task = Task::Regression;
    TerminalKind terminal = TerminalKind::SquaredError;
    Algorithm algorithm = Algorithm::IterativeRegression;
    std::uint64_t support_seed = 0;
    std::uint64_t operator_seed = 0;
    std::optional<FeatureStats> feature_stats;
    std::vector<std::string> feature_names;
    std::string target_name = "target";

    /// h_T (or its linearization) at inputs already in model coordinates.
    [[nodiscard]] Vector raw_outputs(const PointSet& X) const {
        return linearized ? predict_rows(*linearized, X) : predict_rows(fitted, X);
    }

    /// Scores on raw inputs: standardization applied first, and the logistic
    /// link for the cross-entropy route.
    [[nodiscard]] Vector scores(const PointSet& raw_inputs) const {
        const PointSet X = feature_stats ? feature_stats->apply(raw_inputs) : raw_inputs;
        const Vector h = raw_outputs(X);
        return terminal == TerminalKind::CrossEntropy ? sigmoid(h) : h;
    }
};

namespace detail {

inline nlohmann::json matrix_to_json(const Matrix& M) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        std::vector<double> row(static_cast<std::size_t>(M.cols()));
        for (Eigen::Index j = 0; j < M.cols(); ++j) row[static_cast<std::size_t>(j)] = M(i, j);
        rows.push_back(row);
    }
    return rows;
}

inline nlohmann::json vector_to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Matrix matrix_from_json(const nlohmann::json& j, const char* what) {
    if (!j.is_array() || j.empty()) throw SchemaError(std::string("model field '") + what + "' must be a non-empty array");
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = static_cast<Eigen::Index>(j.at(0).size());
    Matrix M(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const auto& row = j.at(static_cast<std::size_t>(i));
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
            throw SchemaError(std::string("model field '") + what + "' is not rectangular");
        }
        for (Eigen::Index c = 0; c < cols; ++c) M(i, c) = row.at(static_cast<std::size_t>(c)).get<double>();
    }
    return M;
}

inline Vector vector_from_json(const nlohmann::json& j, const char* what) {
    if (!j.is_array()) throw SchemaError(std::string("model field '") + what + "' must be an array");
    const auto values = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace detail

[[nodiscard]] inline nlohmann::json model_to_json(const ModelArtifact& a) {
    const FittedModel& f = a.fitted;
    nlohmann::json j;
    j["format"] = kModelFormat;
    j["version"] = kModelVersion;
    j["kind"] = a.linearized ? "linearized" : "fitted";
    j["task"] = to_string(a.task);
    j["terminal_cost"] = to_string(a.terminal);
    j["algorithm"] = to_string(a.algorithm);
    j["kernel_scale"] = f.support->kernel().scale;
    j["offset"] = f.offset;
    j["support"] = detail::matrix_to_json(f.support->points());
    nlohmann::json ops = nlohmann::json::array();
    for (const auto& op : f.bank.ops) {
        ops.push_back({{"kind", to_string(op.kind)}, {"vector", detail::vector_to_json(op.vector)}});
    }
    j["operators"] = ops;
    j["control"] = detail::matrix_to_json(f.control.values());
    if (a.linearized) j["beta"] = detail::matrix_to_json(a.linearized->beta);
    j["seeds"] = {{"run", f.seed}, {"support", a.support_seed}, {"operators", a.operator_seed}};
    j["feature_names"] = a.feature_names;
    j["target_name"] = a.target_name;
    if (a.feature_stats) {
        j["feature_stats"] = {{"mean", detail::vector_to_json(a.feature_stats->mean)},
                              {"stddev", detail::vector_to_json(a.feature_stats->stddev)}};
    }
    return j;
}

[[nodiscard]] inline ModelArtifact model_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format").get<std::string>() != kModelFormat) throw SchemaError("not a kcontrol model file");
        const int version = j.at("version").get<int>();
        if (version != kModelVersion) {
            throw SchemaError("unsupported model version " + std::to_string(version));
        }
        ModelArtifact a;
        const std::string task = j.at("task").get<std::string>();
        if (task == "regression") a.task = Task::Regression;
        else if (task == "classification") a.task = Task::BinaryClassification;
        else throw SchemaError("unknown task '" + task + "'");
        a.terminal = terminal_kind_from_string(j.at("terminal_cost").get<std::string>());
        a.algorithm = algorithm_from_string(j.at("algorithm").get<std::string>());

        auto support = std::make_shared<const SupportSet>(detail::matrix_from_json(j.at("support"), "support"),
                                                          KernelSpec(j.at("kernel_scale").get<double>()));
        std::vector<ControlOperator> ops;
        for (const auto& op : j.at("operators")) {
            ops.push_back(ControlOperator{operator_kind_from_string(op.at("kind").get<std::string>()),
                                          detail::vector_from_json(op.at("vector"), "operators.vector")});
        }
        OperatorBank bank(std::move(ops));
        ControlMatrix control(detail::matrix_from_json(j.at("control"), "control"));
        const double offset = j.at("offset").get<double>();
        Trajectory traj = forward_solve(control, bank, *support, offset);
        a.fitted = FittedModel{control, bank, support, offset, std::move(traj), {}, j.at("seeds").at("run").get<std::uint64_t>()};
        a.support_seed = j.at("seeds").at("support").get<std::uint64_t>();
        a.operator_seed = j.at("seeds").at("operators").get<std::uint64_t>();

        const std::string kind = j.at("kind").get<std::string>();
        if (kind == "linearized") {
            a.linearized = LinearizedModel::from_beta(a.fitted, detail::matrix_from_json(j.at("beta"), "beta"));
        } else if (kind != "fitted") {
            throw SchemaError("unknown model kind '" + kind + "'");
        }
        a.feature_names = j.at("feature_names").get<std::vector<std::string>>();
        a.target_name = j.at("target_name").get<std::string>();
        if (j.contains("feature_stats")) {
            a.feature_stats = FeatureStats{detail::vector_from_json(j["feature_stats"].at("mean"), "feature_stats.mean"),
                                           detail::vector_from_json(j["feature_stats"].at("stddev"), "feature_stats.stddev")};
        }
        if (static_cast<Eigen::Index>(a.feature_names.size()) != support->dim()) {
            throw SchemaError("feature_names does not match the support dimension");
        }
        return a;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("malformed model file: ") + e.what());
    }
}

[[nodiscard]] inline std::string model_to_text(const ModelArtifact& a) { return model_to_json(a).dump(1) + "\n"; }

inline void save_model(const ModelArtifact& a, const std::filesystem::path& path) {
    detail::write_file_atomic(path, model_to_text(a));
}

[[nodiscard]] inline ModelArtifact load_model(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(detail::read_text(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError("'" + path.string() + "' is not valid JSON: " + e.what());
    }
    return model_from_json(j);
}

}  // namespace kcontrol
