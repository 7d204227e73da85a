#include <filesystem>
#include <fstream>
#include <memory>

#include <gtest/gtest.h>

#include "kcontrol/data.hpp"
#include "kcontrol/model_io.hpp"

namespace kc = kcontrol;
namespace fs = std::filesystem;

namespace {

struct Fixture {
    kc::Dataset train;
    kc::ControlSystem system;
    kc::OptimizerConfig config;
};

Fixture make_fixture(kc::Algorithm algorithm) {
    Fixture f;
    f.train = kc::toy_linear3(200, 4);
    f.system.support = kc::sample_support(f.train, 8, 5, kc::KernelSpec(2.0));
    f.system.bank = kc::make_operator_bank(6, 8, 2);
    f.config.algorithm = algorithm;
    f.config.batch_size = 50;
    f.config.max_iterations = 5;
    f.config.init_std = 0.1;
    f.config.seed = 7;
    return f;
}

kc::ModelArtifact artifact_for(kc::Algorithm algorithm) {
    const Fixture f = make_fixture(algorithm);
    kc::ModelArtifact a;
    a.algorithm = algorithm;
    if (algorithm == kc::Algorithm::EnhancedIterativeRegression) {
        a.linearized = kc::fit_enhanced(f.config, {}, f.train, f.system, 6);
        a.fitted = a.linearized->base;
    } else {
        a.fitted = kc::fit_iterative_regression(f.config, {}, f.train, f.system, 6);
    }
    a.support_seed = 5;
    a.operator_seed = 6;
    a.feature_names = f.train.feature_names;
    a.target_name = f.train.target_name;
    a.feature_stats = kc::FeatureStats::fit(f.train.inputs);
    return a;
}

fs::path temp_file(const std::string& name) {
    return fs::temp_directory_path() / ("kcontrol_model_" + name + "_" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name() + ".json");
}

void expect_reload_matches(const kc::ModelArtifact& a) {
    const fs::path p = temp_file("rt");
    kc::save_model(a, p);
    const kc::ModelArtifact b = kc::load_model(p);
    fs::remove(p);
    const kc::PointSet X = kc::toy_linear3(100, 99).inputs;
    EXPECT_LE((a.scores(X) - b.scores(X)).lpNorm<Eigen::Infinity>(), 1e-12);
    EXPECT_EQ(a.fitted.control.values(), b.fitted.control.values());
    EXPECT_EQ(a.fitted.support->points(), b.fitted.support->points());
    EXPECT_EQ(b.feature_names, a.feature_names);
    EXPECT_EQ(b.support_seed, 5u);
    EXPECT_EQ(b.operator_seed, 6u);
    EXPECT_EQ(b.linearized.has_value(), a.linearized.has_value());
    EXPECT_EQ(kc::model_to_text(a), kc::model_to_text(b));
}

kc::ModelArtifact load_text(const std::string& text) {
    const fs::path p = temp_file("bad");
    std::ofstream(p) << text;
    try {
        auto a = kc::load_model(p);
        fs::remove(p);
        return a;
    } catch (...) {
        fs::remove(p);
        throw;
    }
}

}  // namespace

TEST(ModelIo, FittedRoundTrip) { expect_reload_matches(artifact_for(kc::Algorithm::IterativeRegression)); }

TEST(ModelIo, LinearizedRoundTrip) { expect_reload_matches(artifact_for(kc::Algorithm::EnhancedIterativeRegression)); }

TEST(ModelIo, ScoresApplyStandardization) {
    const auto a = artifact_for(kc::Algorithm::IterativeRegression);
    const kc::PointSet X = kc::toy_linear3(10, 3).inputs;
    const kc::Vector direct = kc::predict_rows(a.fitted, a.feature_stats->apply(X));
    EXPECT_LE((a.scores(X) - direct).lpNorm<Eigen::Infinity>(), 1e-14);
}

TEST(ModelIo, SchemaErrors) {
    const nlohmann::json good = kc::model_to_json(artifact_for(kc::Algorithm::IterativeRegression));
    EXPECT_NO_THROW((void)load_text(good.dump()));

    auto bad = good;
    bad["format"] = "something-else";
    EXPECT_THROW((void)load_text(bad.dump()), kc::SchemaError);
    bad = good;
    bad["version"] = kc::kModelVersion + 1;
    EXPECT_THROW((void)load_text(bad.dump()), kc::SchemaError);
    bad = good;
    bad.erase("control");
    EXPECT_THROW((void)load_text(bad.dump()), kc::SchemaError);
    bad = good;
    bad["support"][1] = nlohmann::json::array({1.0});
    EXPECT_THROW((void)load_text(bad.dump()), kc::SchemaError);
    bad = good;
    bad["feature_names"] = nlohmann::json::array({"a"});
    EXPECT_THROW((void)load_text(bad.dump()), kc::SchemaError);
    bad = good;
    bad["kind"] = "mystery";
    EXPECT_THROW((void)load_text(bad.dump()), kc::SchemaError);
    EXPECT_THROW((void)load_text("{ not json"), kc::SchemaError);
    EXPECT_THROW((void)kc::load_model(temp_file("absent")), kc::IoError);
}
