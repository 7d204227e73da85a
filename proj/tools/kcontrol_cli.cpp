// kcontrol: run experiments, generate pricing data, score baselines and saved models.

#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "kcontrol/kcontrol.hpp"

namespace kc = kcontrol;

namespace {

nlohmann::json metrics_json(const kc::Metrics& m) { return kc::detail::metrics_to_json(m); }

int cmd_run(const std::string& config_path) {
    const kc::ExperimentConfig config = kc::load_config(config_path);
    const kc::ExperimentReport r = kc::run_experiment(config);
    nlohmann::json out;
    out["metrics"] = metrics_json(r.metrics);
    out["naive_cost"] = r.naive_cost;
    out["naive_metrics"] = metrics_json(r.naive_metrics);
    out["kernel_ridge"] = metrics_json(*r.kernel_ridge);
    out["iterations"] = r.iterations;
    out["converged"] = r.history.converged;
    out["wall_time_s"] = r.wall_time_s;
    out["metrics_path"] = config.metrics_path;
    std::cout << out.dump(1) << "\n";
    return 0;
}

int cmd_generate_heston(long count, std::uint64_t seed, const std::string& out_path) {
    const kc::HestonRanges ranges;
    const kc::FftSettings settings;
    const kc::Dataset grid = kc::generate_heston_grid(ranges, count, seed, settings);
    kc::write_csv(grid, out_path, kc::heston_grid_comments(ranges, seed, settings));
    std::cout << "wrote " << grid.size() << " rows to " << out_path << "\n";
    return 0;
}

int cmd_baseline(const std::string& config_path) {
    const kc::ExperimentConfig config = kc::load_config(config_path);
    const kc::PreparedExperiment prep = kc::prepare_experiment(config);
    const kc::BaselineResult r = kc::kernel_ridge_baseline(*prep.support, prep.train, prep.test, config.baseline_ridge);
    nlohmann::json out;
    out["baseline"] = "kernel-ridge";
    out["ridge"] = config.baseline_ridge;
    out["metrics"] = metrics_json(r.metrics);
    out["train_size"] = prep.train.size();
    out["test_size"] = prep.test.size();
    std::cout << out.dump(1) << "\n";
    return 0;
}

int cmd_eval(const std::string& model_path, const std::string& data_path, const std::string& out_path) {
    const kc::ModelArtifact model = kc::load_model(model_path);
    kc::CsvOptions opt;
    opt.label_column = model.target_name;
    opt.feature_columns = model.feature_names;
    opt.task = model.task;
    const kc::Dataset data = kc::load_csv(data_path, opt);
    const kc::Vector scores = model.scores(data.inputs);
    const kc::Metrics m = kc::compute_metrics(scores, data.targets, model.task);
    if (!out_path.empty()) {
        kc::detail::write_file_atomic(out_path,
                                      kc::detail::predictions_csv(model.feature_names, data.inputs, data.targets, scores));
    }
    nlohmann::json out;
    out["metrics"] = metrics_json(m);
    out["rows"] = data.size();
    std::cout << out.dump(1) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"kcontrol: function learning with bilinear control systems on a kernel space"};
    app.require_subcommand(1);

    std::string config_path;
    auto* run = app.add_subcommand("run", "fit a configured experiment and write its artifacts");
    run->add_option("--config", config_path, "experiment config file")->required();

    long count = 0;
    std::uint64_t seed = 0;
    std::string out_path;
    auto* generate = app.add_subcommand("generate", "generate datasets");
    generate->require_subcommand(1);
    auto* heston = generate->add_subcommand("heston", "Heston call-price grid priced by FFT");
    heston->add_option("--count", count, "number of rows")->required()->check(CLI::PositiveNumber);
    heston->add_option("--seed", seed, "sampling seed")->required();
    heston->add_option("--out", out_path, "output CSV")->required();

    auto* baseline = app.add_subcommand("baseline", "benchmarks");
    baseline->require_subcommand(1);
    auto* ridge = baseline->add_subcommand("kernel-ridge", "regression on the support kernel features");
    ridge->add_option("--config", config_path, "experiment config file")->required();

    std::string model_path, data_path;
    auto* eval = app.add_subcommand("eval", "score a saved model on a CSV file");
    eval->add_option("--model", model_path, "model file")->required();
    eval->add_option("--data", data_path, "CSV with the model's feature and target columns")->required();
    eval->add_option("--out", out_path, "optional predictions CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::fprintf(stderr, "error: usage_error: %s\n", e.what());
        return 2;
    }

    try {
        if (*run) return cmd_run(config_path);
        if (*heston) return cmd_generate_heston(count, seed, out_path);
        if (*ridge) return cmd_baseline(config_path);
        if (*eval) return cmd_eval(model_path, data_path, out_path);
    } catch (const kc::Error& e) {
        std::fprintf(stderr, "error: %s: %s\n", e.kind().c_str(), e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: internal_error: %s\n", e.what());
        return 1;
    }
    return 1;
}
