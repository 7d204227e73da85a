#pragma once

// European calls under the Heston model:
//
//   dS_t = S_t (r dt + sqrt(V_t) dW1),   dV_t = kappa (theta - V_t) dt + sigma sqrt(V_t) dW2,
//   d<W1, W2>_t = rho dt
//
// priced with the Carr-Madan damped Fourier transform (FFTW), plus a
// full-truncation Euler Monte Carlo used to check it.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <future>
#include <mutex>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <fftw3.h>

#include "kcontrol/dataset.hpp"
#include "kcontrol/error.hpp"
#include "kcontrol/seeding.hpp"

namespace kcontrol {

struct HestonParams {
    double strike = 100.0;
    double maturity = 1.0;
    double rate = 0.02;
    double kappa = 2.0;
    double theta = 0.6;
    double rho = -0.6;
    double sigma_v = 0.06;
    double v0 = 0.06;
    double spot = 100.0;

    /// sigma_v = 0 is accepted: the variance then follows its ODE deterministically.
    void validate() const {
        const double all[] = {strike, maturity, rate, kappa, theta, rho, sigma_v, v0, spot};
        for (double v : all) {
            if (!std::isfinite(v)) throw InputError("Heston parameters must be finite");
        }
        if (!(strike > 0.0)) throw InputError("strike must be positive");
        if (!(maturity > 0.0)) throw InputError("maturity must be positive");
        if (!(spot > 0.0)) throw InputError("spot must be positive");
        if (!(v0 > 0.0)) throw InputError("initial variance must be positive");
        if (!(kappa > 0.0)) throw InputError("mean-reversion speed must be positive");
        if (!(theta >= 0.0)) throw InputError("mean-reversion level must be non-negative");
        if (!(sigma_v >= 0.0)) throw InputError("vol-of-vol must be non-negative");
        if (std::abs(rho) > 1.0) throw InputError("correlation must lie in [-1, 1]");
    }

    /// 2 kappa theta <= sigma^2: the variance can touch zero.
    [[nodiscard]] bool feller_violated() const { return 2.0 * kappa * theta <= sigma_v * sigma_v; }

    [[nodiscard]] std::string describe() const {
        std::ostringstream ss;
        ss.precision(17);
        ss << "K=" << strike << " T=" << maturity << " r=" << rate << " kappa=" << kappa << " theta=" << theta
           << " rho=" << rho << " sigma=" << sigma_v << " v0=" << v0 << " S0=" << spot;
        return ss.str();
    }
};

struct FftSettings {
    double damping = 1.5;     // Carr-Madan alpha
    int nodes = 4096;         // N
    double spacing = 0.25;    // eta, integration-grid step
    bool center_on_strike = true;  // place ln K on a grid node; otherwise centre on ln S0 and interpolate

    void validate() const {
        if (!(damping > 0.0) || !std::isfinite(damping)) throw ConfigError("FFT damping must be positive");
        if (nodes < 16 || nodes % 2 != 0) throw ConfigError("FFT node count must be even and at least 16");
        if (!(spacing > 0.0) || !std::isfinite(spacing)) throw ConfigError("FFT grid spacing must be positive");
    }

    /// Log-strike step lambda = 2 pi / (N eta).
    [[nodiscard]] double log_strike_step() const { return 2.0 * std::numbers::pi / (nodes * spacing); }
};

namespace detail {

using cplx = std::complex<double>;

/// log(1 + z) without cancellation for small |z|.
inline cplx log1p_complex(cplx z) {
    const cplx w = 1.0 + z;
    if (w == cplx(1.0, 0.0)) return z;
    return std::log(w) * z / (w - 1.0);
}

}  // namespace detail

/// E[exp(i u ln S_T)] for complex u.
///
/// Written so that no term divides by sigma^2 directly: with
/// xi = kappa - i rho sigma u, a = u^2 + i u and d = sqrt(xi^2 + sigma^2 a),
/// xi - d = -sigma^2 a / (xi + d). The sigma -> 0 limit is then the
/// deterministic-variance Gaussian characteristic function.
[[nodiscard]] inline std::complex<double> heston_log_cf(const HestonParams& p, std::complex<double> u) {
    using detail::cplx;
    const cplx i(0.0, 1.0);
    const double s2 = p.sigma_v * p.sigma_v;
    const cplx a = u * u + i * u;
    const cplx xi = p.kappa - i * p.rho * p.sigma_v * u;
    const cplx d = std::sqrt(xi * xi + s2 * a);
    const cplx sum = xi + d;
    const cplx edt = std::exp(-d * p.maturity);
    const cplx g_over_s2 = -a / (sum * sum);  // g = (xi - d) / (xi + d) = s2 * g_over_s2
    const cplx g = s2 * g_over_s2;
    const cplx ratio = (1.0 - edt) / (1.0 - g);
    // log((1 - g e^{-dT}) / (1 - g)) / sigma^2
    const cplx z = g * ratio;
    const cplx log_term = z == cplx(0.0, 0.0) ? g_over_s2 * ratio : detail::log1p_complex(z) / s2;
    const cplx C = p.kappa * p.theta * (-a * p.maturity / sum - 2.0 * log_term);
    const cplx D = -a / sum * (1.0 - edt) / (1.0 - g * edt);
    return std::exp(i * u * (std::log(p.spot) + p.rate * p.maturity) + C + D * p.v0);
}

/// Reusable Carr-Madan engine; holds an FFTW plan and its buffers. Not
/// safe to share between threads, create one per thread.
class HestonFftPricer {
public:
    explicit HestonFftPricer(FftSettings settings = {}) : settings_(settings) {
        settings_.validate();
        const auto N = static_cast<std::size_t>(settings_.nodes);
        in_ = fftw_alloc_complex(N);
        out_ = fftw_alloc_complex(N);
        if (in_ == nullptr || out_ == nullptr) throw std::bad_alloc();
        std::lock_guard<std::mutex> lock(plan_mutex());
        plan_ = fftw_plan_dft_1d(settings_.nodes, in_, out_, FFTW_FORWARD, FFTW_ESTIMATE);
    }

    HestonFftPricer(const HestonFftPricer&) = delete;
    HestonFftPricer& operator=(const HestonFftPricer&) = delete;

    ~HestonFftPricer() {
        std::lock_guard<std::mutex> lock(plan_mutex());
        fftw_destroy_plan(plan_);
        fftw_free(in_);
        fftw_free(out_);
    }

    [[nodiscard]] const FftSettings& settings() const noexcept { return settings_; }

    /// Call prices on the log-strike grid k_0 + j lambda, j = 0..N-1.
    struct Curve {
        std::vector<double> log_strikes;
        std::vector<double> prices;
    };

    [[nodiscard]] Curve curve(const HestonParams& p, double k0) {
        p.validate();
        using detail::cplx;
        const int N = settings_.nodes;
        const double eta = settings_.spacing;
        const double alpha = settings_.damping;
        const double lambda = settings_.log_strike_step();
        const double discount = std::exp(-p.rate * p.maturity);
        const cplx i(0.0, 1.0);
        for (int j = 0; j < N; ++j) {
            const double v = j * eta;
            const cplx phi = heston_log_cf(p, cplx(v, -(alpha + 1.0)));
            const cplx denom(alpha * alpha + alpha - v * v, (2.0 * alpha + 1.0) * v);
            const cplx psi = discount * phi / denom;
            // Simpson weights 1/3, 4/3, 2/3, 4/3, ...
            const double w = j == 0 ? 1.0 / 3.0 : (j % 2 == 1 ? 4.0 / 3.0 : 2.0 / 3.0);
            const cplx x = std::exp(-i * v * k0) * psi * eta * w;
            in_[j][0] = x.real();
            in_[j][1] = x.imag();
        }
        fftw_execute(plan_);
        Curve c;
        c.log_strikes.resize(static_cast<std::size_t>(N));
        c.prices.resize(static_cast<std::size_t>(N));
        for (int u = 0; u < N; ++u) {
            const double k = k0 + u * lambda;
            c.log_strikes[static_cast<std::size_t>(u)] = k;
            c.prices[static_cast<std::size_t>(u)] = std::exp(-alpha * k) / std::numbers::pi * out_[u][0];
        }
        return c;
    }

    [[nodiscard]] double price(const HestonParams& p) {
        p.validate();
        const int N = settings_.nodes;
        const double lambda = settings_.log_strike_step();
        const double k = std::log(p.strike);
        if (settings_.center_on_strike) {
            const Curve c = curve(p, k - (N / 2) * lambda);
            return c.prices[static_cast<std::size_t>(N / 2)];
        }
        const double k0 = std::log(p.spot) - (N / 2) * lambda;
        const double pos = (k - k0) / lambda;
        if (!(pos >= 0.0) || !(pos <= N - 1)) {
            throw ConfigError("log-strike grid [" + std::to_string(k0) + ", " + std::to_string(k0 + (N - 1) * lambda) +
                              "] does not bracket ln K = " + std::to_string(k));
        }
        const Curve c = curve(p, k0);
        const auto lo = static_cast<std::size_t>(std::min(std::floor(pos), static_cast<double>(N - 2)));
        const double frac = pos - static_cast<double>(lo);
        return (1.0 - frac) * c.prices[lo] + frac * c.prices[lo + 1];
    }

private:
    static std::mutex& plan_mutex() {
        static std::mutex m;
        return m;
    }

    FftSettings settings_;
    fftw_complex* in_ = nullptr;
    fftw_complex* out_ = nullptr;
    fftw_plan plan_ = nullptr;
};

[[nodiscard]] inline double heston_fft_price(const HestonParams& p, const FftSettings& settings = {}) {
    HestonFftPricer pricer(settings);
    return pricer.price(p);
}

struct McEstimate {
    double price = 0.0;
    double standard_error = 0.0;
};

/// Log-Euler scheme with full truncation of the variance. Paths are split
/// into fixed chunks with their own seed streams, so the estimate does not
/// depend on the number of threads.
[[nodiscard]] inline McEstimate heston_mc_price(const HestonParams& p, long paths, int steps, std::uint64_t seed) {
    p.validate();
    if (paths < 2 || steps < 1) throw InputError("Monte Carlo needs at least 2 paths and 1 step");
    constexpr long kChunk = 4096;
    const long chunks = (paths + kChunk - 1) / kChunk;
    const double dt = p.maturity / steps;
    const double sqdt = std::sqrt(dt);
    const double rho_c = std::sqrt(std::max(0.0, 1.0 - p.rho * p.rho));
    const double discount = std::exp(-p.rate * p.maturity);

    struct Sums {
        double s1 = 0.0;
        double s2 = 0.0;
    };
    auto run_chunk = [&](long c) {
        std::mt19937_64 rng(detail::stream_seed(seed, static_cast<std::uint64_t>(c)));
        std::normal_distribution<double> normal(0.0, 1.0);
        const long count = std::min(kChunk, paths - c * kChunk);
        Sums s;
        for (long k = 0; k < count; ++k) {
            double x = std::log(p.spot);
            double v = p.v0;
            for (int n = 0; n < steps; ++n) {
                const double z1 = normal(rng);
                const double z2 = p.rho * z1 + rho_c * normal(rng);
                const double vp = std::max(v, 0.0);
                const double sv = std::sqrt(vp) * sqdt;
                x += (p.rate - 0.5 * vp) * dt + sv * z1;
                v += p.kappa * (p.theta - vp) * dt + p.sigma_v * sv * z2;
            }
            const double payoff = discount * std::max(std::exp(x) - p.strike, 0.0);
            s.s1 += payoff;
            s.s2 += payoff * payoff;
        }
        return s;
    };

    std::vector<Sums> partial(static_cast<std::size_t>(chunks));
    const unsigned workers = std::max(1u, std::min(std::thread::hardware_concurrency(), 16u));
    for (long base = 0; base < chunks; base += workers) {
        std::vector<std::future<Sums>> jobs;
        for (long c = base; c < std::min(chunks, base + static_cast<long>(workers)); ++c) {
            jobs.push_back(std::async(std::launch::async, run_chunk, c));
        }
        for (std::size_t j = 0; j < jobs.size(); ++j) partial[static_cast<std::size_t>(base) + j] = jobs[j].get();
    }
    double s1 = 0.0, s2 = 0.0;
    for (const auto& s : partial) {
        s1 += s.s1;
        s2 += s.s2;
    }
    const double n = static_cast<double>(paths);
    const double mean = s1 / n;
    const double var = std::max(0.0, (s2 - n * mean * mean) / (n - 1.0));
    return {mean, std::sqrt(var / n)};
}

/// Sampling box for the pricing experiment.
struct HestonRanges {
    double strike[2] = {50.0, 150.0};
    double maturity[2] = {11.0 / 12.0, 1.0};
    double rate[2] = {0.015, 0.025};
    double kappa[2] = {1.5, 2.5};
    double theta[2] = {0.5, 0.7};
    double rho[2] = {-0.7, -0.5};
    double sigma_v[2] = {0.02, 0.1};
    double v0[2] = {0.02, 0.1};
    double spot = 100.0;

    [[nodiscard]] bool contains(const HestonParams& p) const {
        auto in = [](double v, const double (&r)[2]) { return v >= r[0] && v <= r[1]; };
        return in(p.strike, strike) && in(p.maturity, maturity) && in(p.rate, rate) && in(p.kappa, kappa) &&
               in(p.theta, theta) && in(p.rho, rho) && in(p.sigma_v, sigma_v) && in(p.v0, v0) && p.spot == spot;
    }
};

inline const std::vector<std::string>& heston_feature_names() {
    static const std::vector<std::string> names = {"strike", "maturity", "rate",    "kappa",
                                                   "theta",  "rho",      "sigma_v", "v0"};
    return names;
}

inline HestonParams heston_params_from_row(const Eigen::Ref<const Eigen::RowVectorXd>& row, double spot) {
    if (row.size() != 8) throw InputError("a Heston feature row has 8 entries");
    return HestonParams{row(0), row(1), row(2), row(3), row(4), row(5), row(6), row(7), spot};
}

/// `count` tuples drawn uniformly from the box, each priced by FFT.
[[nodiscard]] inline Dataset generate_heston_grid(const HestonRanges& ranges, Eigen::Index count, std::uint64_t seed,
                                                  const FftSettings& settings = {}) {
    if (count < 1) throw InputError("grid count must be at least 1");
    std::mt19937_64 rng(seed);
    auto draw = [&](const double (&r)[2]) { return std::uniform_real_distribution<double>(r[0], r[1])(rng); };
    Dataset d;
    d.inputs.resize(count, 8);
    d.targets.resize(count);
    d.feature_names = heston_feature_names();
    d.target_name = "price";
    HestonFftPricer pricer(settings);
    for (Eigen::Index i = 0; i < count; ++i) {
        HestonParams p;
        p.strike = draw(ranges.strike);
        p.maturity = draw(ranges.maturity);
        p.rate = draw(ranges.rate);
        p.kappa = draw(ranges.kappa);
        p.theta = draw(ranges.theta);
        p.rho = draw(ranges.rho);
        p.sigma_v = draw(ranges.sigma_v);
        p.v0 = draw(ranges.v0);
        p.spot = ranges.spot;
        double price = 0.0;
        try {
            price = pricer.price(p);
        } catch (const Error& e) {
            throw Error(e.kind(), std::string(e.what()) + " [row " + std::to_string(i) + ": " + p.describe() + "]");
        }
        if (!std::isfinite(price)) {
            throw InputError("non-finite price [row " + std::to_string(i) + ": " + p.describe() + "]");
        }
        d.inputs.row(i) << p.strike, p.maturity, p.rate, p.kappa, p.theta, p.rho, p.sigma_v, p.v0;
        d.targets(i) = price;
    }
    return d;
}

/// Comment lines recorded at the top of generated grid files.
[[nodiscard]] inline std::vector<std::string> heston_grid_comments(const HestonRanges& ranges, std::uint64_t seed,
                                                                   const FftSettings& s) {
    std::ostringstream fft;
    fft.precision(17);
    fft << "fft damping=" << s.damping << " nodes=" << s.nodes << " spacing=" << s.spacing
        << " center_on_strike=" << (s.center_on_strike ? "true" : "false");
    std::ostringstream spot;
    spot.precision(17);
    spot << "spot=" << ranges.spot;
    return {"heston call-price grid", spot.str(), "seed=" + std::to_string(seed), fft.str()};
}

}  // namespace kcontrol
