#pragma once

// Experiment runner: flat `key = value` configs, data preparation, fitting,
// out-of-sample metrics and the three run artifacts (metrics, predictions,
// model).

#include <chrono>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "kcontrol/baseline.hpp"
#include "kcontrol/costs.hpp"
#include "kcontrol/data.hpp"
#include "kcontrol/heston.hpp"
#include "kcontrol/metrics.hpp"
#include "kcontrol/model_io.hpp"
#include "kcontrol/optimize.hpp"
#include "kcontrol/seeding.hpp"

namespace kcontrol {

enum class ExperimentTask { Sine, Linear3, Heston, CsvClassify, Custom };

inline const char* to_string(ExperimentTask t) {
    switch (t) {
        case ExperimentTask::Sine: return "sine";
        case ExperimentTask::Linear3: return "linear3";
        case ExperimentTask::Heston: return "heston";
        case ExperimentTask::CsvClassify: return "csv-classify";
        case ExperimentTask::Custom: return "custom";
    }
    return "unknown";
}

inline ExperimentTask experiment_task_from_string(const std::string& s) {
    if (s == "sine") return ExperimentTask::Sine;
    if (s == "linear3") return ExperimentTask::Linear3;
    if (s == "heston") return ExperimentTask::Heston;
    if (s == "csv-classify") return ExperimentTask::CsvClassify;
    if (s == "custom") return ExperimentTask::Custom;
    throw ConfigError("unknown task '" + s + "' (expected sine, linear3, heston, csv-classify or custom)");
}

struct ExperimentConfig {
    ExperimentTask task = ExperimentTask::Sine;
    std::uint64_t seed = 0;

    double kernel_scale = 1.0;

    Eigen::Index horizon = 20;
    Eigen::Index q = 2;
    Eigen::Index m = 10;
    double offset = 1.0;

    double init_mu = 0.0;
    double init_sigma = 1.0;

    Algorithm algorithm = Algorithm::IterativeRegression;
    double learning_rate = 1e-3;
    double lambda = 1e-3;
    Eigen::Index batch_size = 300;
    long max_iterations = 100;
    double rel_tol = 1e-8;
    long window = 50;

    TerminalKind terminal = TerminalKind::SquaredError;
    double control_penalty = 0.0;

    std::string data_source = "generated";  // generated | csv | synthetic
    std::string data_path;
    Eigen::Index train_size = 10000;
    Eigen::Index test_size = 1000;
    std::string label_column;
    std::vector<std::string> features;
    bool standardize = false;
    Eigen::Index synthetic_dim = 5;
    double synthetic_separation = 0.8;

    double baseline_ridge = 0.0;

    std::string metrics_path;
    std::string predictions_path;
    std::string model_path;

    [[nodiscard]] Task data_task() const {
        return task == ExperimentTask::CsvClassify ? Task::BinaryClassification : Task::Regression;
    }

    [[nodiscard]] OptimizerConfig optimizer() const {
        OptimizerConfig c;
        c.algorithm = algorithm;
        c.learning_rate = learning_rate;
        c.lambda = lambda;
        c.batch_size = batch_size;
        c.max_iterations = max_iterations;
        c.rel_tol = rel_tol;
        c.init_mean = init_mu;
        c.init_std = init_sigma;
        c.window = window;
        c.seed = detail::stream_seed(seed, 16);
        return c;
    }

    [[nodiscard]] CostModel cost() const {
        CostModel c;
        c.terminal = terminal;
        c.control_penalty = control_penalty;
        return c;
    }

    void validate() const;
};

/// Per-task defaults: horizon, support size, kernel scale, initial-control spread, batch and split sizes.
[[nodiscard]] inline ExperimentConfig experiment_defaults(ExperimentTask task) {
    ExperimentConfig c;
    c.task = task;
    switch (task) {
        case ExperimentTask::Sine:
            c.horizon = 20, c.m = 10, c.kernel_scale = std::pow(10.0, 0.7), c.init_mu = 0.0, c.init_sigma = 1.0;
            c.batch_size = 300, c.train_size = 10000, c.test_size = 1000;
            break;
        case ExperimentTask::Linear3:
            c.horizon = 50, c.m = 10, c.kernel_scale = 1.0, c.init_mu = 0.0, c.init_sigma = 0.1;
            c.batch_size = 1000, c.train_size = 10000, c.test_size = 10000;
            break;
        case ExperimentTask::Heston:
            c.horizon = 20, c.m = 500, c.kernel_scale = std::pow(10.0, 0.1), c.init_mu = 0.0, c.init_sigma = 20.0;
            c.batch_size = 1000, c.train_size = 1000, c.test_size = 1000, c.standardize = true;
            break;
        case ExperimentTask::CsvClassify:
            c.horizon = 12, c.m = 100, c.kernel_scale = std::pow(10.0, 1.5), c.init_mu = 0.0, c.init_sigma = 10.0;
            c.batch_size = 1000, c.train_size = 5000, c.test_size = 1000, c.standardize = true;
            c.data_source = "synthetic";
            break;
        case ExperimentTask::Custom:
            c.data_source = "csv", c.train_size = 0, c.test_size = 1000, c.standardize = true;
            break;
    }
    return c;
}

namespace detail {

inline std::string config_double(double v) { return format_double(v); }

inline double config_parse_double(const std::string& key, const std::string& v) {
    const auto d = parse_double(v);
    if (!d || !std::isfinite(*d)) throw ConfigError("key '" + key + "': '" + v + "' is not a finite number");
    return *d;
}

inline long long config_parse_int(const std::string& key, const std::string& v) {
    long long out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
        // Accept integral values written in floating-point form, e.g. 1e5.
        const auto d = parse_double(v);
        if (!d || *d != std::floor(*d) || std::abs(*d) > 9e15) {
            throw ConfigError("key '" + key + "': '" + v + "' is not an integer");
        }
        return static_cast<long long>(*d);
    }
    return out;
}

inline bool config_parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
    if (v == "false" || v == "no" || v == "off" || v == "0") return false;
    throw ConfigError("key '" + key + "': '" + v + "' is not a boolean");
}

inline std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream ss(v);
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

inline std::string join_list(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
    return out;
}

}  // namespace detail

/// Ordered key/value view of a config; the metrics file echoes this.
[[nodiscard]] inline std::vector<std::pair<std::string, std::string>> config_to_pairs(const ExperimentConfig& c) {
    using detail::config_double;
    return {
        {"task", to_string(c.task)},
        {"seed", std::to_string(c.seed)},
        {"kernel.scale", config_double(c.kernel_scale)},
        {"system.T", std::to_string(c.horizon)},
        {"system.q", std::to_string(c.q)},
        {"system.m", std::to_string(c.m)},
        {"system.offset", config_double(c.offset)},
        {"init.mu", config_double(c.init_mu)},
        {"init.sigma", config_double(c.init_sigma)},
        {"optimizer.algorithm", to_string(c.algorithm)},
        {"optimizer.learning_rate", config_double(c.learning_rate)},
        {"optimizer.lambda", config_double(c.lambda)},
        {"optimizer.batch_size", std::to_string(c.batch_size)},
        {"optimizer.max_iterations", std::to_string(c.max_iterations)},
        {"optimizer.rel_tol", config_double(c.rel_tol)},
        {"optimizer.window", std::to_string(c.window)},
        {"cost.terminal", to_string(c.terminal)},
        {"cost.control_penalty", config_double(c.control_penalty)},
        {"data.source", c.data_source},
        {"data.path", c.data_path},
        {"data.train_size", std::to_string(c.train_size)},
        {"data.test_size", std::to_string(c.test_size)},
        {"data.label_column", c.label_column},
        {"data.features", detail::join_list(c.features)},
        {"data.standardize", c.standardize ? "true" : "false"},
        {"data.dim", std::to_string(c.synthetic_dim)},
        {"data.separation", config_double(c.synthetic_separation)},
        {"baseline.ridge", config_double(c.baseline_ridge)},
        {"output.metrics_path", c.metrics_path},
        {"output.predictions_path", c.predictions_path},
        {"output.model_path", c.model_path},
    };
}

/// Build a config from key/value pairs. `task` picks the defaults; every
/// other key overrides one field. Unknown keys are errors.
[[nodiscard]] inline ExperimentConfig config_from_pairs(const std::vector<std::pair<std::string, std::string>>& pairs) {
    std::optional<std::string> task;
    for (const auto& [k, v] : pairs) {
        if (k == "task") task = v;
    }
    if (!task) throw ConfigError("config is missing the 'task' key");
    ExperimentConfig c = experiment_defaults(experiment_task_from_string(*task));

    using namespace detail;
    for (const auto& [k, v] : pairs) {
        if (k == "task") continue;
        else if (k == "seed") {
            const long long s = config_parse_int(k, v);
            if (s < 0) throw ConfigError("seed must be non-negative");
            c.seed = static_cast<std::uint64_t>(s);
        }
        else if (k == "kernel.scale") c.kernel_scale = config_parse_double(k, v);
        else if (k == "system.T") c.horizon = config_parse_int(k, v);
        else if (k == "system.q") c.q = config_parse_int(k, v);
        else if (k == "system.m") c.m = config_parse_int(k, v);
        else if (k == "system.offset") c.offset = config_parse_double(k, v);
        else if (k == "init.mu") c.init_mu = config_parse_double(k, v);
        else if (k == "init.sigma") c.init_sigma = config_parse_double(k, v);
        else if (k == "optimizer.algorithm") {
            try {
                c.algorithm = algorithm_from_string(v);
            } catch (const InputError& e) {
                throw ConfigError(e.what());
            }
        }
        else if (k == "optimizer.learning_rate") c.learning_rate = config_parse_double(k, v);
        else if (k == "optimizer.lambda") c.lambda = config_parse_double(k, v);
        else if (k == "optimizer.batch_size") c.batch_size = config_parse_int(k, v);
        else if (k == "optimizer.max_iterations") c.max_iterations = config_parse_int(k, v);
        else if (k == "optimizer.rel_tol") c.rel_tol = config_parse_double(k, v);
        else if (k == "optimizer.window") c.window = config_parse_int(k, v);
        else if (k == "cost.terminal") {
            try {
                c.terminal = terminal_kind_from_string(v);
            } catch (const InputError& e) {
                throw ConfigError(e.what());
            }
        }
        else if (k == "cost.control_penalty") c.control_penalty = config_parse_double(k, v);
        else if (k == "data.source") c.data_source = v;
        else if (k == "data.path") c.data_path = v;
        else if (k == "data.train_size") c.train_size = config_parse_int(k, v);
        else if (k == "data.test_size") c.test_size = config_parse_int(k, v);
        else if (k == "data.label_column") c.label_column = v;
        else if (k == "data.features") c.features = split_list(v);
        else if (k == "data.standardize") c.standardize = config_parse_bool(k, v);
        else if (k == "data.dim") c.synthetic_dim = config_parse_int(k, v);
        else if (k == "data.separation") c.synthetic_separation = config_parse_double(k, v);
        else if (k == "baseline.ridge") c.baseline_ridge = config_parse_double(k, v);
        else if (k == "output.metrics_path") c.metrics_path = v;
        else if (k == "output.predictions_path") c.predictions_path = v;
        else if (k == "output.model_path") c.model_path = v;
        else throw ConfigError("unknown config key '" + k + "'");
    }
    c.validate();
    return c;
}

/// `key = value` lines; '#' starts a comment; blank lines are ignored.
[[nodiscard]] inline ExperimentConfig parse_config(const std::string& text) {
    std::vector<std::pair<std::string, std::string>> pairs;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
        }
        std::string key = detail::trim(line.substr(0, eq));
        std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
        for (const auto& [k, v] : pairs) {
            if (k == key) throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
        }
        pairs.emplace_back(std::move(key), std::move(value));
    }
    return config_from_pairs(pairs);
}

[[nodiscard]] inline ExperimentConfig load_config(const std::filesystem::path& path) {
    return parse_config(detail::read_text(path));
}

inline void ExperimentConfig::validate() const {
    if (!(kernel_scale > 0.0)) throw ConfigError("kernel.scale must be positive");
    if (horizon < 1) throw ConfigError("system.T must be at least 1");
    if (q < 1 || q > 2) throw ConfigError("system.q must be 1 or 2");
    if (m < 1) throw ConfigError("system.m must be positive");
    if (!(init_sigma >= 0.0)) throw ConfigError("init.sigma must be non-negative");
    if (!(learning_rate >= 0.0)) throw ConfigError("optimizer.learning_rate must be non-negative");
    if (!(lambda >= 0.0)) throw ConfigError("optimizer.lambda must be non-negative");
    if (batch_size < 1) throw ConfigError("optimizer.batch_size must be positive");
    if (max_iterations < 0) throw ConfigError("optimizer.max_iterations must be non-negative");
    if (!(rel_tol >= 0.0)) throw ConfigError("optimizer.rel_tol must be non-negative");
    if (window < 1) throw ConfigError("optimizer.window must be positive");
    if (!(control_penalty >= 0.0)) throw ConfigError("cost.control_penalty must be non-negative");
    if (train_size < 0 || test_size < 1) throw ConfigError("data sizes must be positive");
    if (!(baseline_ridge >= 0.0)) throw ConfigError("baseline.ridge must be non-negative");
    if (terminal == TerminalKind::CrossEntropy && task != ExperimentTask::CsvClassify) {
        throw ConfigError("cost.terminal = cross-entropy needs a classification task");
    }
    const bool generated = task == ExperimentTask::Sine || task == ExperimentTask::Linear3;
    if (generated && data_source != "generated") {
        throw ConfigError("task " + std::string(to_string(task)) + " only supports data.source = generated");
    }
    if (task == ExperimentTask::Heston && data_source != "generated" && data_source != "csv") {
        throw ConfigError("heston supports data.source = generated or csv");
    }
    if (task == ExperimentTask::CsvClassify && data_source != "csv" && data_source != "synthetic") {
        throw ConfigError("csv-classify supports data.source = csv or synthetic");
    }
    if (task == ExperimentTask::Custom && data_source != "csv") {
        throw ConfigError("custom supports data.source = csv only");
    }
    if (data_source == "csv" && data_path.empty()) throw ConfigError("data.path is required for data.source = csv");
    if (data_source == "generated" || data_source == "synthetic") {
        if (train_size < 1) throw ConfigError("data.train_size must be positive for generated data");
    }
    if (synthetic_dim < 1) throw ConfigError("data.dim must be positive");
}

/// Train/test data plus the control system built from them.
struct PreparedExperiment {
    Dataset train;
    Dataset test;
    PointSet test_raw_inputs;  // before standardization, for the predictions file
    std::shared_ptr<const SupportSet> support;
    OperatorBank bank;
    std::uint64_t support_seed = 0;
    std::uint64_t operator_seed = 0;

    [[nodiscard]] ControlSystem system(double offset) const { return ControlSystem{support, bank, offset}; }
};

enum : std::uint64_t {
    kStreamTrainData = 10,
    kStreamTestData = 11,
    kStreamSplit = 12,
    kStreamSupport = 13,
    kStreamOperators = 14,
    kStreamGrid = 15,
};

[[nodiscard]] inline PreparedExperiment prepare_experiment(const ExperimentConfig& c) {
    c.validate();
    using detail::stream_seed;
    PreparedExperiment p;
    switch (c.task) {
        case ExperimentTask::Sine:
            p.train = toy_sine(c.train_size, stream_seed(c.seed, kStreamTrainData));
            p.test = toy_sine(c.test_size, stream_seed(c.seed, kStreamTestData));
            break;
        case ExperimentTask::Linear3:
            p.train = toy_linear3(c.train_size, stream_seed(c.seed, kStreamTrainData));
            p.test = toy_linear3(c.test_size, stream_seed(c.seed, kStreamTestData));
            break;
        case ExperimentTask::Heston:
        case ExperimentTask::CsvClassify:
        case ExperimentTask::Custom: {
            Dataset all;
            if (c.data_source == "csv") {
                CsvOptions opt;
                opt.label_column = c.label_column;
                opt.feature_columns = c.features;
                opt.task = c.data_task();
                all = load_csv(c.data_path, opt);
            } else if (c.data_source == "synthetic") {
                all = two_gaussians(c.train_size + c.test_size, c.synthetic_dim, c.synthetic_separation,
                                    stream_seed(c.seed, kStreamTrainData));
            } else {
                all = generate_heston_grid(HestonRanges{}, c.train_size + c.test_size, stream_seed(c.seed, kStreamGrid));
            }
            auto [train, test] = split_dataset(all, c.train_size, c.test_size, stream_seed(c.seed, kStreamSplit));
            p.train = std::move(train);
            p.test = std::move(test);
            break;
        }
    }
    p.test_raw_inputs = p.test.inputs;
    if (c.standardize) standardize_splits(p.train, p.test);
    p.support_seed = stream_seed(c.seed, kStreamSupport);
    p.operator_seed = stream_seed(c.seed, kStreamOperators);
    p.support = sample_support(p.train, c.m, p.support_seed, KernelSpec(c.kernel_scale));
    p.bank = make_operator_bank(p.operator_seed, c.m, c.q);
    return p;
}

struct ExperimentReport {
    Metrics metrics;
    Metrics naive_metrics;
    double naive_cost = 0.0;
    double test_cost = 0.0;
    std::optional<Metrics> kernel_ridge;
    FitHistory history;
    long iterations = 0;
    double wall_time_s = 0.0;
    Vector test_scores;
    ModelArtifact model;

    std::string metrics_text;
    std::string predictions_text;
    std::string model_text;
};

namespace detail {

inline nlohmann::json metrics_to_json(const Metrics& m) {
    nlohmann::json j = nlohmann::json::object();
    if (m.rmse) j["rmse"] = *m.rmse;
    if (m.mape) j["mape"] = *m.mape;
    if (m.accuracy) j["accuracy"] = *m.accuracy;
    if (m.f1) j["f1"] = *m.f1;
    return j;
}

inline std::string predictions_csv(const std::vector<std::string>& names, const PointSet& X, const Vector& y, const Vector& pred) {
    std::string out;
    for (const auto& n : names) out += n + ",";
    out += "y,prediction,error\n";
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        for (Eigen::Index j = 0; j < X.cols(); ++j) out += format_double(X(i, j)) + ",";
        out += format_double(y(i)) + "," + format_double(pred(i)) + "," + format_double(pred(i) - y(i)) + "\n";
    }
    return out;
}

/// Write every (path, content) pair or none: all go to temporaries first,
/// then are renamed into place.
inline void write_all_or_none(const std::vector<std::pair<std::filesystem::path, std::string>>& files) {
    std::vector<std::filesystem::path> temps;
    std::error_code ec;
    auto cleanup = [&] {
        for (const auto& t : temps) std::filesystem::remove(t, ec);
    };
    for (const auto& [path, content] : files) {
        std::filesystem::path tmp = path;
        tmp += ".tmp";
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            cleanup();
            throw IoError("cannot write '" + tmp.string() + "'");
        }
        temps.push_back(tmp);
        out << content;
        out.close();
        if (!out) {
            cleanup();
            throw IoError("write to '" + tmp.string() + "' failed");
        }
    }
    std::vector<std::filesystem::path> done;
    for (std::size_t i = 0; i < files.size(); ++i) {
        std::filesystem::rename(temps[i], files[i].first, ec);
        if (ec) {
            for (const auto& d : done) std::filesystem::remove(d, ec);
            cleanup();
            throw IoError("cannot move output into '" + files[i].first.string() + "'");
        }
        done.push_back(files[i].first);
    }
}

inline std::string compact_echo(const ExperimentConfig& c) {
    std::string out;
    for (const auto& [k, v] : config_to_pairs(c)) {
        if (k.rfind("output.", 0) == 0 || v.empty()) continue;
        out += (out.empty() ? "" : " ") + k + "=" + v;
    }
    return out;
}

}  // namespace detail

/// Fit and evaluate without touching the filesystem (beyond reading a CSV source).
[[nodiscard]] inline ExperimentReport evaluate_experiment(const ExperimentConfig& c) {
    const auto start = std::chrono::steady_clock::now();
    const PreparedExperiment prep = prepare_experiment(c);
    const ControlSystem system = prep.system(c.offset);
    const OptimizerConfig opt = c.optimizer();
    const CostModel cost = c.cost();
    const Task task = c.data_task();

    ExperimentReport r;
    auto scores_of = [&](const Vector& h) { return c.terminal == TerminalKind::CrossEntropy ? sigmoid(h) : h; };
    const Batch test_batch = make_batch(*system.support, prep.test.inputs, prep.test.targets);

    // Naive benchmark: the model at the initial control.
    {
        const ControlMatrix u0 = initial_control(opt, c.q, c.horizon);
        Trajectory traj0;
        try {
            traj0 = forward_solve(u0, system.bank, *system.support, system.offset);
        } catch (const DivergenceError& e) {
            throw FittingError(std::string("initial control: ") + e.what() + " [config: " + detail::compact_echo(c) + "]",
                               0);
        }
        const Vector h0 = h_terminal_values(traj0, test_batch.sections);
        r.naive_cost = terminal_cost(c.terminal, h0, test_batch);
        r.naive_metrics = compute_metrics(scores_of(h0), prep.test.targets, task);
    }

    ModelArtifact& model = r.model;
    try {
        if (c.algorithm == Algorithm::GradientDescent) {
            model.fitted = fit_sgd(opt, cost, prep.train, system, c.horizon);
        } else if (c.algorithm == Algorithm::IterativeRegression) {
            model.fitted = fit_iterative_regression(opt, cost, prep.train, system, c.horizon);
        } else {
            LinearizedModel lin = fit_enhanced(opt, cost, prep.train, system, c.horizon);
            model.fitted = lin.base;
            model.linearized = std::move(lin);
        }
    } catch (const FittingError& e) {
        throw FittingError(std::string(e.what()) + " [config: " + detail::compact_echo(c) + "]", e.iteration());
    }
    model.task = task;
    model.terminal = c.terminal;
    model.algorithm = c.algorithm;
    model.support_seed = prep.support_seed;
    model.operator_seed = prep.operator_seed;
    model.feature_stats = prep.train.feature_stats;
    model.feature_names = prep.train.resolved_feature_names();
    model.target_name = prep.train.target_name;

    const Vector h = model.raw_outputs(prep.test.inputs);
    r.test_cost = terminal_cost(c.terminal, h, test_batch);
    r.test_scores = scores_of(h);
    r.metrics = compute_metrics(r.test_scores, prep.test.targets, task);
    r.history = model.fitted.history;
    r.iterations = model.fitted.history.iterations;
    r.kernel_ridge = kernel_ridge_baseline(*system.support, prep.train, prep.test, c.baseline_ridge).metrics;

    nlohmann::json j;
    j["task"] = to_string(c.task);
    j["algorithm"] = to_string(c.algorithm);
    j["terminal_cost"] = to_string(c.terminal);
    j["metrics"] = detail::metrics_to_json(r.metrics);
    j["test_cost"] = r.test_cost;
    j["naive_cost"] = r.naive_cost;
    j["naive_metrics"] = detail::metrics_to_json(r.naive_metrics);
    j["kernel_ridge"] = detail::metrics_to_json(*r.kernel_ridge);
    j["iterations"] = r.iterations;
    j["converged"] = r.history.converged;
    j["history"] = {{"window_iterations", r.history.window_iterations}, {"window_costs", r.history.window_costs}};
    j["train_size"] = prep.train.size();
    j["test_size"] = prep.test.size();
    nlohmann::json echo = nlohmann::json::object();
    for (const auto& [k, v] : config_to_pairs(c)) echo[k] = v;
    j["config"] = echo;
    r.metrics_text = j.dump(1) + "\n";
    r.predictions_text = detail::predictions_csv(model.feature_names, prep.test_raw_inputs,
                                                 prep.test.targets, r.test_scores);
    r.model_text = model_to_text(model);
    r.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

/// Evaluate and write the declared artifacts (all of them or none).
inline ExperimentReport run_experiment(const ExperimentConfig& c) {
    if (c.metrics_path.empty()) throw ConfigError("output.metrics_path is required");
    ExperimentReport r = evaluate_experiment(c);
    std::vector<std::pair<std::filesystem::path, std::string>> files;
    files.emplace_back(c.metrics_path, r.metrics_text);
    if (!c.predictions_path.empty()) files.emplace_back(c.predictions_path, r.predictions_text);
    if (!c.model_path.empty()) files.emplace_back(c.model_path, r.model_text);
    detail::write_all_or_none(files);
    return r;
}

/// Reconstruct the config recorded in a metrics file.
[[nodiscard]] inline ExperimentConfig config_from_metrics_json(const nlohmann::json& metrics) {
    std::vector<std::pair<std::string, std::string>> pairs;
    for (const auto& [k, v] : metrics.at("config").items()) pairs.emplace_back(k, v.get<std::string>());
    return config_from_pairs(pairs);
}

}  // namespace kcontrol
