#pragma once

// Reproducible simulation harness: noisy quantized records for DC and
// coherent sine stimuli, estimator sweeps over theta grids and record
// lengths, and bias/std/MSE summaries. Every record draws from a stream
// derived from (master seed, grid point, record index), and aggregation runs
// in record order with compensated summation, so results do not depend on
// the worker count.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "qblue/counting.hpp"
#include "qblue/estimators.hpp"
#include "qblue/quantizer.hpp"
#include "qblue/rng.hpp"

namespace qblue {

enum class SweepModel { dc1, dc2, sine3 };
enum class EstimatorKind { quantile, mean, lse };

inline const char* to_string(SweepModel model) {
    switch (model) {
    case SweepModel::dc1: return "dc1";
    case SweepModel::dc2: return "dc2";
    case SweepModel::sine3: return "sine3";
    }
    return "?";
}

inline const char* to_string(EstimatorKind kind) {
    switch (kind) {
    case EstimatorKind::quantile: return "quantile";
    case EstimatorKind::mean: return "mean";
    case EstimatorKind::lse: return "lse";
    }
    return "?";
}

inline SweepModel sweep_model_from_string(const std::string& name) {
    if (name == "dc1") return SweepModel::dc1;
    if (name == "dc2") return SweepModel::dc2;
    if (name == "sine3") return SweepModel::sine3;
    throw std::invalid_argument("unknown model '" + name + "' (expected dc1|dc2|sine3)");
}

inline EstimatorKind estimator_from_string(const std::string& name) {
    if (name == "quantile") return EstimatorKind::quantile;
    if (name == "mean") return EstimatorKind::mean;
    if (name == "lse") return EstimatorKind::lse;
    throw std::invalid_argument("unknown estimator '" + name + "' (expected quantile|mean|lse)");
}

struct SweepConfig {
    SweepModel model = SweepModel::dc1;
    int bits = 10;
    double sigma_norm = 0.2;                   // sigma / step
    std::vector<double> theta_grid;            // theta/step values (DC models)
    std::array<double, 3> sine_theta{};        // theta/step triple (sine3)
    std::vector<std::int64_t> record_lengths;  // N values (DC models)
    int samples_per_period = 0;                // sine3
    int periods = 0;                           // sine3
    int records = 2000;
    InlProfile inl{};
    std::uint64_t seed = 0;
    std::vector<EstimatorKind> estimators{EstimatorKind::quantile, EstimatorKind::mean};
};

// One summary row. All errors are normalized to the quantization step
// (step^2 for the MSE). For sine3 sweeps theta_over_delta holds the phase
// index instead, one row per phase, and the error is the reconstructed
// signal residual at that phase.
struct SweepRow {
    double theta_over_delta = 0.0;
    std::int64_t n = 0;
    std::string estimator;
    double mean_error = 0.0;
    double std_error = 0.0;
    double mse = 0.0;
    double fallback_rate = 0.0;
};

struct SweepResult {
    std::vector<SweepRow> rows;
};

struct CrlbRow {
    double theta_over_delta = 0.0;
    double crlb_normalized = 0.0; // CRLB / step^2
};

// --- record simulation -------------------------------------------------------

inline std::vector<int> simulate_dc_record(double theta, double sigma,
                                           const QuantizerSpec& spec, std::int64_t n_samples,
                                           std::uint64_t record_seed) {
    if (n_samples < 1) {
        throw std::invalid_argument("simulate_dc_record: N must be >= 1");
    }
    if (!(sigma >= 0.0)) {
        throw std::invalid_argument("simulate_dc_record: sigma must be nonnegative");
    }
    std::vector<int> codes(static_cast<std::size_t>(n_samples));
    SplitMix64 rng(record_seed);
    for (auto& code : codes) {
        const double x = sigma == 0.0 ? theta : theta + sigma * rng.next_gaussian();
        code = quantize(x, spec);
    }
    return codes;
}

inline std::vector<int> simulate_sine_record(const SineDesign& design,
                                             const std::array<double, 3>& theta,
                                             const QuantizerSpec& spec,
                                             std::uint64_t record_seed) {
    const auto total = static_cast<std::size_t>(design.total_samples());
    std::vector<double> s(static_cast<std::size_t>(design.samples_per_period));
    for (std::size_t n = 0; n < s.size(); ++n) {
        s[n] = theta[0] + theta[1] * design.x1[n] + theta[2] * design.x2[n];
    }
    std::vector<int> codes(total);
    SplitMix64 rng(record_seed);
    for (std::size_t m = 0; m < total; ++m) {
        const double clean = s[m % s.size()];
        const double x = design.sigma == 0.0 ? clean : clean + design.sigma * rng.next_gaussian();
        codes[m] = quantize(x, spec);
    }
    return codes;
}

// --- aggregation -------------------------------------------------------------

namespace detail {

struct KahanSum {
    double sum = 0.0;
    double carry = 0.0;
    void add(double x) noexcept {
        const double y = x - carry;
        const double t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
};

struct Moments {
    double mean = std::numeric_limits<double>::quiet_NaN();
    double std_dev = std::numeric_limits<double>::quiet_NaN();
    double mse = std::numeric_limits<double>::quiet_NaN();
    std::int64_t count = 0;
};

// NaN entries mark records without a usable estimate and are skipped.
inline Moments compute_moments(std::span<const double> values) {
    Moments m;
    KahanSum sum;
    KahanSum sq;
    for (double v : values) {
        if (std::isnan(v)) continue;
        sum.add(v);
        sq.add(v * v);
        ++m.count;
    }
    if (m.count == 0) return m;
    m.mean = sum.sum / static_cast<double>(m.count);
    m.mse = sq.sum / static_cast<double>(m.count);
    if (m.count > 1) {
        KahanSum centered;
        for (double v : values) {
            if (std::isnan(v)) continue;
            const double d = v - m.mean;
            centered.add(d * d);
        }
        m.std_dev = std::sqrt(centered.sum / static_cast<double>(m.count - 1));
    } else {
        m.std_dev = 0.0;
    }
    return m;
}

inline unsigned worker_count(std::size_t items) {
    unsigned workers = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("QBLUE_THREADS")) {
        char* end = nullptr;
        const unsigned long parsed = std::strtoul(env, &end, 10);
        if (end != env && parsed >= 1) {
            workers = static_cast<unsigned>(std::min(parsed, 256ul));
        }
    }
    return static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(items, 1)));
}

// Results are written to per-index slots, so the schedule cannot affect them.
template <typename Fn>
inline void parallel_for(std::size_t count, Fn&& fn) {
    const unsigned workers = worker_count(count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto body = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            fn(i);
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (unsigned w = 1; w < workers; ++w) pool.emplace_back(body);
    body();
    for (auto& t : pool) t.join();
}

} // namespace detail

// --- sweeps --------------------------------------------------------------------

namespace detail {

inline void run_dc_sweep(const SweepConfig& config, const QuantizerSpec& spec,
                         SweepResult& result) {
    const double delta = spec.step;
    const double sigma = config.sigma_norm * delta;
    bool want_quantile = false;
    bool want_mean = false;
    for (EstimatorKind kind : config.estimators) {
        if (kind == EstimatorKind::quantile) want_quantile = true;
        else if (kind == EstimatorKind::mean) want_mean = true;
        else throw std::invalid_argument("run_sweep: DC models support quantile and mean only");
    }

    const auto records = static_cast<std::size_t>(config.records);
    const std::size_t n_count = config.record_lengths.size();
    for (std::size_t ti = 0; ti < config.theta_grid.size(); ++ti) {
        for (std::size_t ni = 0; ni < n_count; ++ni) {
            const double theta = config.theta_grid[ti] * delta;
            const std::int64_t n_samples = config.record_lengths[ni];
            const std::uint64_t grid_index = static_cast<std::uint64_t>(ti * n_count + ni);

            constexpr double nan = std::numeric_limits<double>::quiet_NaN();
            std::vector<double> q_err(records, nan);
            std::vector<double> q_sigma_err(records, nan);
            std::vector<double> m_err(records, nan);
            std::vector<unsigned char> q_degraded(records, 0); // fallback or failure

            parallel_for(records, [&](std::size_t r) {
                const std::uint64_t seed = derive_stream(config.seed, grid_index,
                                                         static_cast<std::uint64_t>(r));
                const std::vector<int> codes =
                    simulate_dc_record(theta, sigma, spec, n_samples, seed);
                const CodeHistogram hist = histogram(codes, spec.level_count);
                if (want_mean) {
                    m_err[r] = (arithmetic_mean(hist, spec) - theta) / delta;
                }
                if (want_quantile) {
                    try {
                        const EstimateReport report =
                            config.model == SweepModel::dc1
                                ? estimate_dc_known_sigma(hist, spec, DcModelKnownSigma{sigma})
                                : estimate_dc_unknown_sigma(hist, spec);
                        q_err[r] = (report.theta_hat(0) - theta) / delta;
                        if (config.model == SweepModel::dc2 && !report.fallback) {
                            q_sigma_err[r] = (report.theta_hat(1) - sigma) / delta;
                        }
                        if (report.fallback) q_degraded[r] = 1;
                    } catch (const std::exception&) {
                        q_degraded[r] = 1; // hard failure, excluded from moments
                    }
                }
            });

            const double theta_over_delta = config.theta_grid[ti];
            if (want_quantile) {
                std::int64_t degraded = 0;
                for (unsigned char flag : q_degraded) degraded += flag;
                const double rate = static_cast<double>(degraded) / static_cast<double>(records);
                const Moments mom = compute_moments(q_err);
                result.rows.push_back({theta_over_delta, n_samples, "quantile", mom.mean,
                                       mom.std_dev, mom.mse, rate});
                if (config.model == SweepModel::dc2) {
                    const Moments smom = compute_moments(q_sigma_err);
                    result.rows.push_back({theta_over_delta, n_samples, "quantile_sigma",
                                           smom.mean, smom.std_dev, smom.mse, rate});
                }
            }
            if (want_mean) {
                const Moments mom = compute_moments(m_err);
                result.rows.push_back(
                    {theta_over_delta, n_samples, "mean", mom.mean, mom.std_dev, mom.mse, 0.0});
            }
        }
    }
}

inline void run_sine_sweep(const SweepConfig& config, const QuantizerSpec& spec,
                           SweepResult& result) {
    const double delta = spec.step;
    const double sigma = config.sigma_norm * delta;
    bool want_quantile = false;
    bool want_lse = false;
    for (EstimatorKind kind : config.estimators) {
        if (kind == EstimatorKind::quantile) want_quantile = true;
        else if (kind == EstimatorKind::lse) want_lse = true;
        else throw std::invalid_argument("run_sweep: sine3 supports quantile and lse only");
    }

    const SineDesign design =
        SineDesign::coherent(config.samples_per_period, config.periods, sigma);
    const std::array<double, 3> theta{config.sine_theta[0] * delta, config.sine_theta[1] * delta,
                                      config.sine_theta[2] * delta};
    const auto phases = static_cast<std::size_t>(design.samples_per_period);
    std::vector<double> s_true(phases);
    for (std::size_t n = 0; n < phases; ++n) {
        s_true[n] = theta[0] + theta[1] * design.x1[n] + theta[2] * design.x2[n];
    }

    const auto records = static_cast<std::size_t>(config.records);
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> q_resid(records * phases, nan);
    std::vector<double> l_resid(records * phases, nan);
    std::vector<unsigned char> q_degraded(records, 0);

    parallel_for(records, [&](std::size_t r) {
        const std::uint64_t seed = derive_stream(config.seed, 0, static_cast<std::uint64_t>(r));
        const std::vector<int> codes = simulate_sine_record(design, theta, spec, seed);
        if (want_quantile) {
            const std::vector<CodeHistogram> folded = fold_coherent(
                codes, design.samples_per_period, design.periods, spec.level_count);
            try {
                const EstimateReport report = estimate_sine(folded, design, spec);
                if (report.fallback) q_degraded[r] = 1;
                for (std::size_t n = 0; n < phases; ++n) {
                    const double fit = report.theta_hat(0) + report.theta_hat(1) * design.x1[n] +
                                       report.theta_hat(2) * design.x2[n];
                    q_resid[r * phases + n] = (fit - s_true[n]) / delta;
                }
            } catch (const std::exception&) {
                q_degraded[r] = 1;
            }
        }
        if (want_lse) {
            const Eigen::Vector3d fit_theta = lse_sinefit(codes, spec, design);
            for (std::size_t n = 0; n < phases; ++n) {
                const double fit =
                    fit_theta(0) + fit_theta(1) * design.x1[n] + fit_theta(2) * design.x2[n];
                l_resid[r * phases + n] = (fit - s_true[n]) / delta;
            }
        }
    });

    std::int64_t degraded = 0;
    for (unsigned char flag : q_degraded) degraded += flag;
    const double rate = static_cast<double>(degraded) / static_cast<double>(records);

    std::vector<double> column(records);
    auto emit = [&](const char* name, const std::vector<double>& resid, double fb_rate) {
        for (std::size_t n = 0; n < phases; ++n) {
            for (std::size_t r = 0; r < records; ++r) column[r] = resid[r * phases + n];
            const Moments mom = compute_moments(column);
            result.rows.push_back({static_cast<double>(n),
                                   static_cast<std::int64_t>(config.periods), name, mom.mean,
                                   mom.std_dev, mom.mse, fb_rate});
        }
    };
    if (want_quantile) emit("quantile", q_resid, rate);
    if (want_lse) emit("lse", l_resid, 0.0);
}

} // namespace detail

inline SweepResult run_sweep(const SweepConfig& config) {
    if (config.records < 1) {
        throw std::invalid_argument("run_sweep: need at least one record");
    }
    if (!(config.sigma_norm >= 0.0)) {
        throw std::invalid_argument("run_sweep: sigma_norm must be nonnegative");
    }
    if (config.estimators.empty()) {
        throw std::invalid_argument("run_sweep: no estimators selected");
    }
    const QuantizerSpec spec = apply_inl(make_uniform(config.bits, -1.0, 1.0), config.inl);

    SweepResult result;
    if (config.model == SweepModel::sine3) {
        detail::run_sine_sweep(config, spec, result);
    } else {
        if (config.theta_grid.empty() || config.record_lengths.empty()) {
            throw std::invalid_argument("run_sweep: DC sweep needs a theta grid and N values");
        }
        detail::run_dc_sweep(config, spec, result);
    }
    return result;
}

// Deterministic CRLB table over a theta/step grid for the known-sigma DC
// model, normalized to step^2.
inline std::vector<CrlbRow> crlb_sweep(int bits, double sigma_norm, std::int64_t n_samples,
                                       const std::vector<double>& theta_grid) {
    const QuantizerSpec spec = make_uniform(bits, -1.0, 1.0);
    const double delta = spec.step;
    std::vector<CrlbRow> rows;
    rows.reserve(theta_grid.size());
    for (double theta_nd : theta_grid) {
        const double bound = crlb_dc(theta_nd * delta, sigma_norm * delta, spec, n_samples);
        rows.push_back({theta_nd, bound / (delta * delta)});
    }
    return rows;
}

inline void write_sweep_csv(const SweepResult& result, std::ostream& out) {
    out << "theta_over_delta,n,estimator,mean_error,std_error,mse,fallback_rate\n";
    char buf[512];
    for (const SweepRow& row : result.rows) {
        std::snprintf(buf, sizeof buf, "%.12g,%lld,%s,%.12g,%.12g,%.12g,%.12g\n",
                      row.theta_over_delta, static_cast<long long>(row.n),
                      row.estimator.c_str(), row.mean_error, row.std_error, row.mse,
                      row.fallback_rate);
        out << buf;
    }
}

} // namespace qblue
