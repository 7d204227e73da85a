// Acceptance run: one PASS/FAIL line per criterion. The exit status is 0
// whenever every check ran to completion; the lines carry the verdicts.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "kcontrol/kcontrol.hpp"
#include "test_support.hpp"

namespace kc = kcontrol;
namespace fs = std::filesystem;
using kc::testing::Instance;
using kc::testing::make_instance;
using kc::testing::relative_error;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) { return std::chrono::duration<double>(Clock::now() - start).count(); }

int failures = 0;

void report(int id, bool pass, const std::string& detail) {
    if (!pass) ++failures;
    std::printf("criterion %d: %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* format, double a) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), format, a);
    return buf;
}

kc::ExperimentConfig config_file(const std::string& name) {
    auto c = kc::load_config(fs::path(KCONTROL_CONFIG_DIR) / name);
    c.metrics_path.clear();
    c.predictions_path.clear();
    c.model_path.clear();
    return c;
}

std::string read(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// 1: adjoint gradient against central differences of a brute-force cost.
void gradient_correctness() {
    const auto start = Clock::now();
    double worst = 0.0;
    int checked = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        for (int kind = 0; kind < 2; ++kind) {
            const bool binary = kind == 1;
            const Instance inst = make_instance(1000 + seed, 5, 4, 2, 7, 2, 0.5, 1.0, binary);
            for (int running = 0; running < 2; ++running) {
                kc::CostModel model;
                model.terminal = binary ? kc::TerminalKind::CrossEntropy : kc::TerminalKind::SquaredError;
                if (running == 1) {
                    model.control_penalty = 0.05;
                    model.running_target = [](Eigen::Index t, const Eigen::Ref<const Eigen::RowVectorXd>& x) {
                        return std::sin(x(0)) * (1.0 + 0.1 * static_cast<double>(t));
                    };
                }
                const auto traj = kc::forward_solve(inst.control, inst.bank, *inst.support, inst.offset);
                const auto eval = kc::evaluate_objective(model, traj, inst.bank, *inst.support, inst.batch, true);
                const kc::Matrix fd = kc::testing::finite_difference_gradient(
                    [&](const kc::ControlMatrix& u) { return kc::testing::brute_force_cost(inst, model, u); },
                    inst.control);
                for (Eigen::Index t = 0; t < 4; ++t)
                    for (Eigen::Index i = 0; i < 2; ++i) {
                        worst = std::max(worst, relative_error(eval.gradient(i, t), fd(i, t)));
                        ++checked;
                    }
            }
        }
    }
    const double elapsed = seconds_since(start);
    report(1, worst < 1e-5 && elapsed < 10.0,
           "max relative error " + fmt("%.2e", worst) + " over " + std::to_string(checked) + " entries (both costs, " +
               "with and without running term), " + fmt("%.2f s", elapsed));
}

// 2: control Jacobian against differences of brute-force h_t; causality.
void jacobian_correctness() {
    double worst = 0.0;
    bool causal = true;
    const Eigen::Index T = 4, q = 2;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Instance inst = make_instance(2000 + seed, 5, T, q, 3, 2);
        const auto traj = kc::forward_solve(inst.control, inst.bank, *inst.support, inst.offset);
        for (Eigen::Index t : {Eigen::Index{1}, T / 2, T}) {
            const kc::Matrix J = kc::control_jacobian(traj, inst.bank, *inst.support, inst.batch.inputs, t);
            for (Eigen::Index x = 0; x < inst.batch.size(); ++x) {
                const kc::Matrix fd = kc::testing::finite_difference_gradient(
                    [&](const kc::ControlMatrix& u) { return kc::testing::brute_force_h(inst, u, inst.batch.inputs, t)(x); },
                    inst.control);
                for (Eigen::Index s = 0; s < T; ++s)
                    for (Eigen::Index i = 0; i < q; ++i) {
                        const double a = J(x, i + q * s);
                        if (s >= t) {
                            causal = causal && a == 0.0;
                        } else {
                            worst = std::max(worst, relative_error(a, fd(i, s)));
                        }
                    }
            }
        }
    }
    report(2, worst < 1e-5 && causal,
           "max relative error " + fmt("%.2e", worst) + ", columns s >= t " + (causal ? "exactly zero" : "NOT zero"));
}

// 3: product-form forward solution and Psi-basis adjoint against the recursions.
void lemma_equivalences() {
    double forward_err = 0.0;
    double adjoint_err = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Instance inst = make_instance(3000 + seed, 5, 5, 2, 3, 2, 0.5);
        const auto traj = kc::forward_solve(inst.control, inst.bank, *inst.support, inst.offset);
        for (Eigen::Index t = 0; t <= 5; ++t) {
            forward_err = std::max(forward_err,
                                   (traj.states.col(t) - kc::testing::product_form_state(inst, t)).cwiseAbs().maxCoeff());
        }
    }
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Eigen::Index m = 2 + static_cast<Eigen::Index>(seed % 3);
        const Instance inst = make_instance(3100 + seed, m, 5, 2, 3, 2, 0.4);
        std::mt19937_64 rng(seed);
        const kc::Vector terminal = kc::testing::random_vector(rng, m);
        std::vector<kc::Vector> sources;
        for (int s = 0; s < 5; ++s) sources.push_back(kc::testing::random_vector(rng, m));
        const auto bundle = kc::adjoint_transitions(inst.control, inst.bank, *inst.support);
        const auto recursive = kc::adjoint_solve(bundle, terminal, sources);
        // Psi_t = M_t ... M_{T-1}; g*_t = Psi_t (g*_T + sum_{s >= t} Psi_s^{-1} l_s).
        for (Eigen::Index t = 0; t <= 5; ++t) {
            kc::Vector acc = terminal;
            for (Eigen::Index s = t; s < 5; ++s) {
                acc += bundle.product(s).fullPivLu().solve(sources[static_cast<std::size_t>(s)]);
            }
            adjoint_err = std::max(adjoint_err, (recursive.costates.col(t) - bundle.product(t) * acc).cwiseAbs().maxCoeff());
        }
        const auto no_sources = kc::adjoint_solve(bundle, terminal);
        adjoint_err = std::max(adjoint_err,
                               (no_sources.costates - kc::adjoint_from_products(bundle, terminal).costates).cwiseAbs().maxCoeff());
    }
    report(3, forward_err < 1e-11 && adjoint_err < 1e-9,
           "forward product form " + fmt("%.2e", forward_err) + " (< 1e-11), Psi-basis adjoint " +
               fmt("%.2e", adjoint_err) + " (< 1e-9)");
}

// The scalar instance: m = 1, one diagonal operator, offset 1, target 0 at x = 0.
struct ScalarProblem {
    kc::ControlSystem system;
    kc::Dataset train;

    ScalarProblem() {
        auto support = std::make_shared<const kc::SupportSet>(kc::PointSet::Zero(1, 1), kc::KernelSpec(1.0));
        system = kc::ControlSystem{
            support, kc::OperatorBank({kc::ControlOperator{kc::OperatorKind::Diagonal, kc::Vector::Ones(1)}}), 1.0};
        train.inputs = kc::PointSet::Zero(1, 1);
        train.targets = kc::Vector::Zero(1);
    }

    [[nodiscard]] kc::ObjectiveEvaluation evaluate(const kc::ControlMatrix& u, bool gradient) const {
        const auto traj = kc::forward_solve(u, system.bank, *system.support, system.offset);
        const auto batch = kc::make_batch(*system.support, train.inputs, train.targets);
        return kc::evaluate_objective({}, traj, system.bank, *system.support, batch, gradient);
    }
};

// 4: finite-difference Hessian of the scalar cost at u = 0.
void non_convexity() {
    const ScalarProblem p;
    auto cost = [&](double a, double b) {
        kc::Matrix u(1, 2);
        u << a, b;
        return p.evaluate(kc::ControlMatrix(u), false).value;
    };
    const double h = 1e-4;
    kc::Matrix H(2, 2);
    H(0, 0) = (cost(h, 0) - 2 * cost(0, 0) + cost(-h, 0)) / (h * h);
    H(1, 1) = (cost(0, h) - 2 * cost(0, 0) + cost(0, -h)) / (h * h);
    H(0, 1) = H(1, 0) = (cost(h, h) - cost(h, -h) - cost(-h, h) + cost(-h, -h)) / (4 * h * h);
    kc::Matrix expected(2, 2);
    expected << 2, 4, 4, 2;
    const double err = (H - expected).cwiseAbs().maxCoeff();
    const double det = H.determinant();
    std::ostringstream ss;
    ss.precision(6);
    ss << "H = [[" << H(0, 0) << ", " << H(0, 1) << "], [" << H(1, 0) << ", " << H(1, 1) << "]], det " << det;
    report(4, err < 1e-4 && std::abs(det + 12.0) < 0.01, ss.str());
}

// 5: sine experiment with the three algorithms and the kernel baseline.
void sine_experiment() {
    const auto start = Clock::now();
    auto base = config_file("sine.conf");
    auto ir = base;
    ir.algorithm = kc::Algorithm::IterativeRegression;
    ir.max_iterations = 100;
    const auto r2 = kc::evaluate_experiment(ir);

    auto eir = base;
    eir.algorithm = kc::Algorithm::EnhancedIterativeRegression;
    eir.max_iterations = 100;
    const auto r3 = kc::evaluate_experiment(eir);

    auto gd = base;
    gd.algorithm = kc::Algorithm::GradientDescent;
    gd.learning_rate = 0.1;
    gd.max_iterations = 100000;
    gd.rel_tol = 0.0;
    gd.window = 1000;
    const auto r1 = kc::evaluate_experiment(gd);
    const double elapsed = seconds_since(start);

    const double rmse2 = *r2.metrics.rmse, rmse3 = *r3.metrics.rmse, rmse1 = *r1.metrics.rmse;
    const double naive = *r2.naive_metrics.rmse;
    const double kr = *r2.kernel_ridge->rmse;
    const bool ok2 = rmse2 < 2e-2, ok3 = rmse3 < 5e-3, ok1 = rmse1 < 0.3 && rmse1 < naive, okk = kr < 1e-3;
    report(5, ok1 && ok2 && ok3 && okk && elapsed < 300.0,
           "alg2 rmse " + fmt("%.3e", rmse2) + (ok2 ? " ok" : " (needs < 2e-2)") + "; alg3 rmse " +
               fmt("%.3e", rmse3) + (ok3 ? " ok" : " (needs < 5e-3)") + "; alg1 rmse " + fmt("%.3e", rmse1) +
               " vs naive " + fmt("%.3f", naive) + (ok1 ? " ok" : " (needs < 0.3)") + "; kernel ridge " +
               fmt("%.2e", kr) + (okk ? " ok" : " (needs < 1e-3)") + "; " + fmt("%.1f s", elapsed));
}

// 6: three-dimensional linear toy problem.
void linear3_experiment() {
    const auto start = Clock::now();
    auto c = config_file("linear3.conf");
    c.algorithm = kc::Algorithm::IterativeRegression;
    c.max_iterations = 2000;
    c.rel_tol = 0.0;
    const auto r = kc::evaluate_experiment(c);
    const double elapsed = seconds_since(start);
    bool monotone = true;
    const auto& w = r.history.window_costs;
    for (std::size_t k = 1; k < w.size(); ++k) monotone = monotone && w[k] <= w[k - 1];
    const double rmse = *r.metrics.rmse, kr = *r.kernel_ridge->rmse;
    const bool ok = rmse < 5e-2 && monotone && kr < 1e-3 && elapsed < 600.0;
    report(6, ok,
           "alg2 rmse " + fmt("%.3e", rmse) + " on " + std::to_string(c.test_size) + " test points (needs < 5e-2); " +
               "window costs " + (monotone ? "non-increasing" : "INCREASE") + " over " + std::to_string(w.size()) +
               " windows; kernel ridge " + fmt("%.2e", kr) + "; " + fmt("%.1f s", elapsed));
}

// 7: pricing engine against Monte Carlo and closed form, then the pricing regression.
void heston_experiment() {
    const auto start = Clock::now();
    const kc::HestonRanges box;
    std::mt19937_64 rng(kc::detail::stream_seed(7, 1));
    auto draw = [&](const double (&r)[2]) { return std::uniform_real_distribution<double>(r[0], r[1])(rng); };
    kc::HestonFftPricer pricer;
    double worst_z = 0.0;
    for (int k = 0; k < 10; ++k) {
        kc::HestonParams p;
        p.strike = draw(box.strike), p.maturity = draw(box.maturity), p.rate = draw(box.rate);
        p.kappa = draw(box.kappa), p.theta = draw(box.theta), p.rho = draw(box.rho);
        p.sigma_v = draw(box.sigma_v), p.v0 = draw(box.v0), p.spot = box.spot;
        kc::FftSettings fine;
        fine.spacing = 0.1;
        const double fft = kc::heston_fft_price(p, fine);
        const auto mc = kc::heston_mc_price(p, 200000, 200, kc::detail::stream_seed(7, 100 + k));
        worst_z = std::max(worst_z, std::abs(fft - mc.price) / mc.standard_error);
    }
    // sigma_v -> 0 with V_0 = theta is Black-Scholes with volatility sqrt(V_0).
    double worst_bs = 0.0;
    for (double K : {70.0, 100.0, 130.0}) {
        kc::HestonParams p;
        p.strike = K, p.sigma_v = 1e-8, p.v0 = p.theta = 0.04;
        const double sd = std::sqrt(p.v0 * p.maturity);
        const double d1 = (std::log(p.spot / K) + p.rate * p.maturity + 0.5 * sd * sd) / sd;
        auto N = [](double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); };
        const double bs = p.spot * N(d1) - K * std::exp(-p.rate * p.maturity) * N(d1 - sd);
        worst_bs = std::max(worst_bs, std::abs(pricer.price(p) - bs));
    }
    const bool ok_a = worst_z < 3.0 && worst_bs < 1e-4;

    auto c = config_file("heston.conf");
    const auto r = kc::evaluate_experiment(c);
    const double mape = *r.metrics.mape;
    const double ratio = r.naive_cost / r.test_cost;
    const bool ok_b = mape < 0.25 && ratio >= 5.0;
    const double elapsed = seconds_since(start);
    report(7, ok_a && ok_b && elapsed < 900.0,
           "(a) max |fft - mc| / se " + fmt("%.2f", worst_z) + ", closed-form error " + fmt("%.1e", worst_bs) +
               (ok_a ? " ok" : " FAIL") + "; (b) alg2 " + std::to_string(c.max_iterations) + " iterations mape " +
               fmt("%.3f", mape) + " (needs < 0.25), naive/test cost " + fmt("%.1f", ratio) + "x (needs >= 5); " +
               fmt("%.1f s", elapsed));
}

// 8: synthetic two-Gaussian classification, both cost routes.
void classification_experiment() {
    auto c = config_file("classify.conf");
    const auto quad = kc::evaluate_experiment(c);
    const double acc = *quad.metrics.accuracy, f1 = *quad.metrics.f1;

    auto ce = c;
    ce.terminal = kc::TerminalKind::CrossEntropy;
    ce.algorithm = kc::Algorithm::IterativeRegression;
    const auto cross = kc::evaluate_experiment(ce);
    const bool ce_ran = cross.metrics.accuracy.has_value() && std::isfinite(cross.test_cost);
    const bool ok = acc >= 0.9 && f1 >= 0.85 && ce_ran;
    report(8, ok,
           std::string(kc::to_string(c.algorithm)) + " quadratic: accuracy " + fmt("%.3f", acc) + ", F1 " +
               fmt("%.3f", f1) + "; cross-entropy route: accuracy " + fmt("%.3f", *cross.metrics.accuracy) +
               ", F1 " + fmt("%.3f", *cross.metrics.f1) + "; cross-entropy gradient covered by criterion 1");
}

// 9: byte-identical artifacts when the same config is run twice.
void determinism() {
    const fs::path dir = fs::temp_directory_path() / "kcontrol_acceptance_determinism";
    fs::remove_all(dir);
    fs::create_directories(dir);
    bool same = true;
    for (const char* name : {"sine.conf", "classify.conf"}) {
        auto c = config_file(name);
        c.metrics_path = (dir / "metrics.json").string();
        c.predictions_path = (dir / "predictions.csv").string();
        c.model_path = (dir / "model.json").string();
        std::vector<std::string> first;
        (void)kc::run_experiment(c);
        for (const auto& p : {c.metrics_path, c.predictions_path, c.model_path}) first.push_back(read(p));
        (void)kc::run_experiment(c);
        std::size_t k = 0;
        for (const auto& p : {c.metrics_path, c.predictions_path, c.model_path}) {
            same = same && !first[k].empty() && first[k] == read(p);
            ++k;
        }
    }
    fs::remove_all(dir);
    report(9, same, same ? "sine and classification artifacts byte-identical across two runs"
                         : "artifacts differ between identical runs");
}

// 10: gradient descent on the scalar instance drives the gradient to zero.
void first_order_conditions() {
    const ScalarProblem p;
    kc::OptimizerConfig c;
    c.algorithm = kc::Algorithm::GradientDescent;
    c.learning_rate = 0.05;
    c.init_mean = 0.1;
    c.init_std = 0.0;
    c.batch_size = 1;
    c.max_iterations = 200000;
    c.rel_tol = 0.0;
    const auto f = kc::fit_sgd(c, {}, p.train, p.system, 2);
    const double g = p.evaluate(f.control, true).gradient.lpNorm<Eigen::Infinity>();
    report(10, g < 1e-6,
           "|DE(u)|_inf " + fmt("%.2e", g) + " after " + std::to_string(f.history.iterations) + " iterations");
}

}  // namespace

int main() {
    const std::vector<std::pair<int, std::function<void()>>> checks = {
        {1, gradient_correctness}, {2, jacobian_correctness}, {3, lemma_equivalences},
        {4, non_convexity},        {5, sine_experiment},      {6, linear3_experiment},
        {7, heston_experiment},    {8, classification_experiment}, {9, determinism},
        {10, first_order_conditions}};
    int crashed = 0;
    for (const auto& [id, check] : checks) {
        try {
            check();
        } catch (const std::exception& e) {
            report(id, false, std::string("error: ") + e.what());
            ++crashed;
        }
    }
    std::printf("summary: %d of %zu criteria passed\n", static_cast<int>(checks.size()) - failures, checks.size());
    return crashed == 0 ? 0 : 1;
}
