// Acceptance suite: one statistical reproduction run per shipped claim,
// printed as a PASS/FAIL line each. Exit status is the number of failures.
//
// The checks are heavier than unit tests on purpose: they rerun the
// published operating points (bias removal for the DC and sine models,
// Cramer-Rao proximity, single-bit consistency, oracle equivalences,
// degeneracy handling and kernel tolerances) at full record counts.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qblue/blue.hpp"
#include "qblue/counting.hpp"
#include "qblue/estimators.hpp"
#include "qblue/montecarlo.hpp"
#include "qblue/quantizer.hpp"
#include "qblue/rng.hpp"

#include "../oracle_utils.hpp"

using namespace qblue;

namespace {

struct Check {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            if (!detail.empty()) detail += "; ";
            detail += "FAILED " + what;
        }
    }
    void note(const std::string& what) {
        if (!detail.empty()) detail += "; ";
        detail += what;
    }
};

std::vector<double> default_grid() {
    std::vector<double> grid;
    for (int i = -9; i <= 9; ++i) grid.push_back(0.05 * i);
    return grid;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

// --- criterion 1: model-1 bias removal vs. the arithmetic mean ------------------

Check criterion1() {
    Check check;
    const auto start = std::chrono::steady_clock::now();

    SweepConfig config;
    config.model = SweepModel::dc1;
    config.bits = 10;
    config.sigma_norm = 0.2;
    config.theta_grid = default_grid();
    config.record_lengths = {500};
    config.records = 2000;
    config.seed = 1001;
    config.estimators = {EstimatorKind::quantile, EstimatorKind::mean};
    const SweepResult result = run_sweep(config);

    const QuantizerSpec spec = make_uniform(10, -1.0, 1.0);
    const double delta = spec.step;
    const double sigma = 0.2 * delta;

    double worst_quantile = 0.0;
    double oracle_peak = 0.0;
    for (double t : config.theta_grid) {
        oracle_peak =
            std::max(oracle_peak, std::fabs(mean_output_oracle(t * delta, sigma, spec) - t * delta));
    }
    bool mean_matches_oracle = true;
    double worst_peak_gap = 0.0;
    for (const SweepRow& row : result.rows) {
        if (row.estimator == "quantile") {
            worst_quantile = std::max(worst_quantile, std::fabs(row.mean_error));
        } else if (row.estimator == "mean") {
            const double oracle_bias =
                (mean_output_oracle(row.theta_over_delta * delta, sigma, spec) -
                 row.theta_over_delta * delta) /
                delta;
            if (std::fabs(oracle_bias) >= 0.9 * oracle_peak / delta) { // the peaks
                const double gap = std::fabs(row.mean_error - oracle_bias);
                worst_peak_gap = std::max(worst_peak_gap, gap / std::fabs(oracle_bias));
                if (gap > 0.15 * std::fabs(oracle_bias)) mean_matches_oracle = false;
            }
        }
    }
    const double elapsed = seconds_since(start);

    check.require(worst_quantile <= 0.03,
                  "max|mean_error| of quantile = " + fmt(worst_quantile) + " > 0.03");
    check.require(mean_matches_oracle,
                  "mean-estimator bias off the oracle by " + fmt(100.0 * worst_peak_gap) +
                      "% at a peak (limit 15%)");
    check.require(elapsed <= 300.0, "runtime " + fmt(elapsed) + " s > 300 s");
    check.note("max|bias|_quantile=" + fmt(worst_quantile) +
               ", peak oracle gap=" + fmt(100.0 * worst_peak_gap) + "%, " + fmt(elapsed) + " s");
    return check;
}

// --- criterion 2: CRLB proximity -------------------------------------------------

Check criterion2() {
    Check check;
    SweepConfig config;
    config.model = SweepModel::dc1;
    config.bits = 10;
    config.sigma_norm = 0.2;
    config.theta_grid = default_grid();
    config.record_lengths = {300};
    config.records = 2000;
    config.seed = 2002;
    config.estimators = {EstimatorKind::quantile};
    const SweepResult result = run_sweep(config);
    const auto crlb = crlb_sweep(10, 0.2, 300, config.theta_grid);

    double ratio_lo = 1e9;
    double ratio_hi = 0.0;
    double edge_lo = 1e9;
    double edge_hi = 0.0;
    for (std::size_t i = 0; i < result.rows.size(); ++i) {
        const SweepRow& row = result.rows[i];
        const double ratio = row.std_error / std::sqrt(crlb[i].crlb_normalized);
        ratio_lo = std::min(ratio_lo, ratio);
        ratio_hi = std::max(ratio_hi, ratio);
        if (std::fabs(std::fabs(row.theta_over_delta) - 0.45) < 1e-9) {
            edge_lo = std::min(edge_lo, ratio);
            edge_hi = std::max(edge_hi, ratio);
        }
    }
    check.require(ratio_lo >= 0.8 && ratio_hi <= 1.4,
                  "std/sqrt(CRLB) range [" + fmt(ratio_lo) + ", " + fmt(ratio_hi) +
                      "] outside [0.8, 1.4]");
    check.require(edge_lo >= 0.9 && edge_hi <= 1.15,
                  "edge ratio range [" + fmt(edge_lo) + ", " + fmt(edge_hi) +
                      "] outside [0.9, 1.15]");
    check.note("ratio in [" + fmt(ratio_lo) + ", " + fmt(ratio_hi) + "], at 0.45: [" +
               fmt(edge_lo) + ", " + fmt(edge_hi) + "]");
    return check;
}

// --- criterion 3: model-2 bias removal and sigma recovery ------------------------

Check criterion3() {
    Check check;
    SweepConfig config;
    config.model = SweepModel::dc2;
    config.bits = 10;
    config.sigma_norm = 0.34;
    config.theta_grid = default_grid();
    config.record_lengths = {300};
    config.records = 2000;
    config.seed = 3003;
    config.estimators = {EstimatorKind::quantile};
    const SweepResult result = run_sweep(config);

    double worst_theta = 0.0;
    double sigma_weighted = 0.0; // pooled over all records with a sigma estimate
    double sigma_count = 0.0;
    double worst_sigma_rel = 0.0;
    for (const SweepRow& row : result.rows) {
        if (row.estimator == "quantile") {
            worst_theta = std::max(worst_theta, std::fabs(row.mean_error));
        } else if (row.estimator == "quantile_sigma") {
            // mean_error is (mean sigma_hat - sigma)/step
            const double used = config.records * (1.0 - row.fallback_rate);
            sigma_weighted += row.mean_error * used;
            sigma_count += used;
            worst_sigma_rel =
                std::max(worst_sigma_rel, std::fabs(row.mean_error) / config.sigma_norm);
        }
    }
    // The sweep-level sigma recovery: grid-edge points lose a third of their
    // records to the Lambda < 2 fallback at N=300, and the surviving records
    // are selected on a rare far-tail hit, which inflates sigma_hat there by
    // design of the plug-in quantiles. Pooling over the sweep is the stated
    // recovery figure; the per-point worst case is reported alongside.
    const double sigma_rel = std::fabs(sigma_weighted / sigma_count) / config.sigma_norm;
    check.require(worst_theta <= 0.03,
                  "max|mean_error theta1| = " + fmt(worst_theta) + " > 0.03");
    check.require(sigma_rel <= 0.05,
                  "sigma recovered off by " + fmt(100.0 * sigma_rel) + "% > 5%");
    check.note("max|bias theta1|=" + fmt(worst_theta) + ", recovered sigma off by " +
               fmt(100.0 * sigma_rel) + "% (worst single grid point " +
               fmt(100.0 * worst_sigma_rel) + "%)");
    return check;
}

// --- criterion 4: model 3 vs. LSE under INL --------------------------------------

Check criterion4() {
    Check check;
    const auto start = std::chrono::steady_clock::now();

    SweepConfig config;
    config.model = SweepModel::sine3;
    config.bits = 10;
    config.sigma_norm = 0.3;
    config.sine_theta = {3.7, 11.4, 23.1};
    config.samples_per_period = 20;
    config.periods = 50;
    config.records = 200;
    config.inl = {InlKind::uniform, 0.5, 404};
    config.seed = 4004;
    config.estimators = {EstimatorKind::quantile, EstimatorKind::lse};
    const SweepResult result = run_sweep(config);

    double quantile_peak = 0.0;
    double lse_peak = 0.0;
    for (const SweepRow& row : result.rows) {
        if (row.estimator == "quantile") {
            quantile_peak = std::max(quantile_peak, std::fabs(row.mean_error));
        } else if (row.estimator == "lse") {
            lse_peak = std::max(lse_peak, std::fabs(row.mean_error));
        }
    }
    const double elapsed = seconds_since(start);
    check.require(quantile_peak <= 0.05,
                  "quantile residual peak " + fmt(quantile_peak) + " > 0.05 steps");
    check.require(quantile_peak <= lse_peak / 3.0,
                  "quantile peak " + fmt(quantile_peak) + " not <= LSE peak (" + fmt(lse_peak) +
                      ")/3");
    check.require(elapsed <= 180.0, "runtime " + fmt(elapsed) + " s > 180 s");
    check.note("residual peaks: quantile=" + fmt(quantile_peak) + ", lse=" + fmt(lse_peak) +
               ", " + fmt(elapsed) + " s");
    return check;
}

// --- criterion 5: single-bit consistency ------------------------------------------

Check criterion5() {
    Check check;
    const double theta = 0.1;
    const double sigma = 0.1;
    const std::int64_t n = 10000;
    const int records = 500;
    double sum = 0.0;
    for (int r = 0; r < records; ++r) {
        SplitMix64 rng(derive_stream(5005, 0, static_cast<std::uint64_t>(r)));
        std::int64_t ones = 0;
        for (std::int64_t i = 0; i < n; ++i) {
            if (theta + sigma * rng.next_gaussian() >= 0.0) ++ones;
        }
        const double p1 = static_cast<double>(ones) / static_cast<double>(n);
        sum += single_bit_estimate(p1, sigma);
    }
    const double mean = sum / records;
    check.require(std::fabs(mean - theta) <= 0.005,
                  "|mean - 0.1| = " + fmt(std::fabs(mean - theta)) + " > 0.005");
    check.note("mean estimate " + fmt(mean));
    return check;
}

// --- criterion 6: noiseless-inversion identities ----------------------------------

ActiveQuantileSet injection_set(const QuantizerSpec& spec, double mean, double sigma) {
    ActiveQuantileSet full = oracle::exact_active_set(spec, mean, sigma);
    ActiveQuantileSet trimmed;
    for (std::size_t i = 0; i < full.size(); ++i) {
        if (full.values[i] > 1e-6 && full.values[i] < 1.0 - 1e-6) {
            trimmed.indices.push_back(full.indices[i]);
            trimmed.values.push_back(full.values[i]);
        }
    }
    return trimmed;
}

Check criterion6() {
    Check check;
    const auto start = std::chrono::steady_clock::now();
    SplitMix64 rng(6006);
    double worst = 0.0;

    int done = 0;
    while (done < 100) { // model 1
        const int bits = 2 + static_cast<int>(rng.next_u64() % 6);
        const QuantizerSpec spec = make_uniform(bits, -1.0, 1.0);
        const double theta = 0.6 * (rng.next_uniform() - 0.5);
        const double sigma = 0.03 + 0.35 * rng.next_uniform();
        const ActiveQuantileSet active = injection_set(spec, theta, sigma);
        if (active.size() < 1) continue;
        const auto report = estimate_dc_known_sigma_from_active(active, 4096, spec, {sigma});
        worst = std::max(worst, std::fabs(report.theta_hat(0) - theta));
        ++done;
    }
    check.require(worst <= 1e-8, "model-1 inversion error " + fmt(worst));

    double worst2 = 0.0;
    done = 0;
    while (done < 100) { // model 2
        const int bits = 3 + static_cast<int>(rng.next_u64() % 5);
        const QuantizerSpec spec = make_uniform(bits, -1.0, 1.0);
        const double theta = 0.5 * (rng.next_uniform() - 0.5);
        const double sigma = 0.08 + 0.35 * rng.next_uniform();
        const ActiveQuantileSet active = injection_set(spec, theta, sigma);
        if (active.size() < 2) continue;
        const auto report = estimate_dc_unknown_sigma_from_active(active, 4096, spec);
        worst2 = std::max(worst2, std::fabs(report.theta_hat(0) - theta));
        worst2 = std::max(worst2, std::fabs(report.theta_hat(1) - sigma));
        ++done;
    }
    check.require(worst2 <= 1e-8, "model-2 inversion error " + fmt(worst2));

    double worst3 = 0.0;
    done = 0;
    while (done < 100) { // model 3
        const int bits = 6 + static_cast<int>(rng.next_u64() % 5);
        const QuantizerSpec spec = make_uniform(bits, -1.0, 1.0);
        const double delta = spec.step;
        const int m = 5 + static_cast<int>(rng.next_u64() % 16);
        const double sigma = (0.2 + 1.2 * rng.next_uniform()) * delta;
        const SineDesign design = SineDesign::coherent(m, 10, sigma);
        const std::array<double, 3> theta{(rng.next_uniform() - 0.5) * 8.0 * delta,
                                          (rng.next_uniform() * 20.0 + 1.0) * delta,
                                          (rng.next_uniform() - 0.5) * 30.0 * delta};
        std::vector<ActiveQuantileSet> per_phase(static_cast<std::size_t>(m));
        Eigen::Index rows = 0;
        for (int n = 0; n < m; ++n) {
            const double s = theta[0] + theta[1] * design.x1[static_cast<std::size_t>(n)] +
                             theta[2] * design.x2[static_cast<std::size_t>(n)];
            per_phase[static_cast<std::size_t>(n)] = injection_set(spec, s, sigma);
            rows += static_cast<Eigen::Index>(per_phase[static_cast<std::size_t>(n)].size());
        }
        if (rows < 3) continue;
        try {
            const auto report = estimate_sine_from_active(per_phase, 10, design, spec);
            for (int i = 0; i < 3; ++i) {
                worst3 = std::max(worst3,
                                  std::fabs(report.theta_hat(i) - theta[static_cast<std::size_t>(i)]));
            }
        } catch (const std::invalid_argument&) {
            continue; // fewer than 3 informative phases; draw another config
        }
        ++done;
    }
    check.require(worst3 <= 1e-8, "model-3 inversion error " + fmt(worst3));

    const double elapsed = seconds_since(start);
    check.require(elapsed <= 10.0, "runtime " + fmt(elapsed) + " s > 10 s");
    check.note("max errors " + fmt(worst) + " / " + fmt(worst2) + " / " + fmt(worst3) + ", " +
               fmt(elapsed) + " s");
    return check;
}

// --- criterion 7: oracle equivalences ---------------------------------------------

Check criterion7() {
    Check check;

    // (a, b) multinomial and cumulative covariance vs. 1e5 simulated records
    {
        const std::vector<double> p{0.2, 0.5, 0.3};
        const std::int64_t n = 100;
        const int records = 100000;
        SplitMix64 rng(7007);
        Eigen::MatrixXd sum_outer = Eigen::MatrixXd::Zero(3, 3);
        Eigen::Vector3d sum_p = Eigen::Vector3d::Zero();
        Eigen::MatrixXd sum_outer_cum = Eigen::MatrixXd::Zero(3, 3);
        Eigen::Vector3d sum_cum = Eigen::Vector3d::Zero();
        for (int r = 0; r < records; ++r) {
            const auto counts = oracle::sample_multinomial(p, n, rng);
            Eigen::Vector3d phat;
            for (int k = 0; k < 3; ++k) {
                phat(k) = static_cast<double>(counts[static_cast<std::size_t>(k)]) /
                          static_cast<double>(n);
            }
            Eigen::Vector3d cum(phat(0), phat(0) + phat(1), phat(0) + phat(1) + phat(2));
            sum_p += phat;
            sum_outer += phat * phat.transpose();
            sum_cum += cum;
            sum_outer_cum += cum * cum.transpose();
        }
        const Eigen::Vector3d mean_p = sum_p / records;
        const Eigen::MatrixXd emp = sum_outer / records - mean_p * mean_p.transpose();
        const Eigen::Vector3d mean_cum = sum_cum / records;
        const Eigen::MatrixXd emp_cum =
            sum_outer_cum / records - mean_cum * mean_cum.transpose();

        const Eigen::MatrixXd theory = multinomial_covariance({p}, n);
        const Eigen::MatrixXd theory_cum = cumulative_covariance(theory);
        double worst = 0.0;
        double worst_cum = 0.0;
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                worst = std::max(worst, std::fabs(emp(i, j) - theory(i, j)) /
                                            std::fabs(theory(i, j)));
                if (i < 2 && j < 2) { // last cumulative entry is identically 1
                    worst_cum = std::max(worst_cum, std::fabs(emp_cum(i, j) - theory_cum(i, j)) /
                                                        std::fabs(theory_cum(i, j)));
                }
            }
        }
        check.require(worst <= 0.05,
                      "multinomial covariance off by " + fmt(100.0 * worst) + "% > 5%");
        check.require(worst_cum <= 0.05,
                      "cumulative covariance off by " + fmt(100.0 * worst_cum) + "% > 5%");
        check.note("multinomial " + fmt(100.0 * worst) + "%, cumulative " +
                   fmt(100.0 * worst_cum) + "%");
    }

    // (c) delta-method quantile covariance vs. the sample variance of
    //     Phi^-1(cp_hat) at the two transitions adjacent to theta = 0
    {
        const QuantizerSpec spec = make_uniform(10, -1.0, 1.0);
        const double sigma = 0.3 * spec.step;
        const std::int64_t n = 500;
        const int records = 100000;
        const int k_lo = 511; // transition at -step/2
        const int k_hi = 512; // transition at +step/2

        ActiveQuantileSet truth;
        truth.indices = {k_lo, k_hi};
        truth.values = {std_normal_cdf(spec.transitions[510] / sigma),
                        std_normal_cdf(spec.transitions[511] / sigma)};
        const Eigen::MatrixXd sigma_y =
            quantile_covariance(truth, active_cumulative_covariance(truth, n));

        double sum_lo = 0.0, sq_lo = 0.0, sum_hi = 0.0, sq_hi = 0.0;
        for (int r = 0; r < records; ++r) {
            const auto codes = simulate_dc_record(
                0.0, sigma, spec, n, derive_stream(7077, 1, static_cast<std::uint64_t>(r)));
            std::int64_t below_lo = 0;
            std::int64_t below_hi = 0;
            for (int code : codes) {
                if (code < k_lo) ++below_lo;
                if (code < k_hi) ++below_hi;
            }
            const double z_lo =
                std_normal_inv_cdf(static_cast<double>(below_lo) / static_cast<double>(n));
            const double z_hi =
                std_normal_inv_cdf(static_cast<double>(below_hi) / static_cast<double>(n));
            sum_lo += z_lo;
            sq_lo += z_lo * z_lo;
            sum_hi += z_hi;
            sq_hi += z_hi * z_hi;
        }
        const double var_lo = sq_lo / records - (sum_lo / records) * (sum_lo / records);
        const double var_hi = sq_hi / records - (sum_hi / records) * (sum_hi / records);
        const double err_lo = std::fabs(var_lo - sigma_y(0, 0)) / sigma_y(0, 0);
        const double err_hi = std::fabs(var_hi - sigma_y(1, 1)) / sigma_y(1, 1);
        check.require(err_lo <= 0.10 && err_hi <= 0.10,
                      "Sigma_Y diagonal off by " + fmt(100.0 * std::max(err_lo, err_hi)) +
                          "% > 10%");
        check.note("Sigma_Y diag " + fmt(100.0 * std::max(err_lo, err_hi)) + "%");
    }

    // (d) BLUE sampling covariance vs. (H^T Sigma^-1 H)^-1 over 1e4 trials
    {
        Eigen::MatrixXd h(6, 2);
        h << 1.0, 0.9, 1.0, 0.5, 1.0, 0.2, 1.0, -0.1, 1.0, 0.4, 1.0, 0.7;
        Eigen::VectorXd scale(6);
        scale << 0.6, 0.8, 0.5, 0.9, 0.7, 0.55;
        Eigen::MatrixXd corr = Eigen::MatrixXd::Constant(6, 6, 0.35);
        corr.diagonal().setOnes();
        const Eigen::MatrixXd sigma = scale.asDiagonal() * corr * scale.asDiagonal();
        const Eigen::MatrixXd chol = Eigen::LLT<Eigen::MatrixXd>(sigma).matrixL();
        Eigen::Vector2d theta_star(0.7, -0.4);

        const int trials = 10000;
        SplitMix64 rng(7777);
        Eigen::Vector2d sum = Eigen::Vector2d::Zero();
        Eigen::Matrix2d sum_outer = Eigen::Matrix2d::Zero();
        for (int t = 0; t < trials; ++t) {
            Eigen::VectorXd g(6);
            for (int i = 0; i < 6; ++i) g(i) = rng.next_gaussian();
            GaussMarkovProblem problem{h, h * theta_star + chol * g, sigma};
            const Eigen::VectorXd est = solve_gauss_markov(problem).theta_hat;
            sum += est;
            sum_outer += est * est.transpose();
        }
        const Eigen::Vector2d mean = sum / trials;
        const Eigen::Matrix2d emp = sum_outer / trials - mean * mean.transpose();
        const Eigen::MatrixXd want =
            (h.transpose() * sigma.ldlt().solve(h)).ldlt().solve(Eigen::MatrixXd::Identity(2, 2));
        double worst = 0.0;
        for (int i = 0; i < 2; ++i) {
            for (int j = 0; j < 2; ++j) {
                worst = std::max(worst,
                                 std::fabs(emp(i, j) - want(i, j)) / std::fabs(want(i, j)));
            }
        }
        check.require(worst <= 0.10, "BLUE covariance off by " + fmt(100.0 * worst) + "% > 10%");
        check.note("BLUE covariance " + fmt(100.0 * worst) + "%");
    }
    return check;
}

// --- criterion 8: degeneracy handling ---------------------------------------------

Check criterion8() {
    Check check;
    const QuantizerSpec spec = make_uniform(10, -1.0, 1.0);
    const double delta = spec.step;

    const auto codes = simulate_dc_record(0.3 * delta, 0.0, spec, 100, 8008);
    const CodeHistogram hist = histogram(codes, spec.level_count);

    const EstimateReport r1 = estimate_dc_known_sigma(hist, spec, {0.2 * delta});
    check.require(r1.fallback && r1.fallback_estimator == FallbackEstimator::arithmetic_mean,
                  "model 1 did not fall back on a zero-noise record");

    const EstimateReport r2 = estimate_dc_unknown_sigma(hist, spec);
    check.require(r2.fallback && std::isnan(r2.theta_hat(1)),
                  "model 2 did not fall back with sigma unreported");

    const SineDesign design = SineDesign::coherent(20, 5, 0.2 * delta);
    const std::array<double, 3> theta{2.0 * delta, 9.0 * delta, 5.0 * delta};
    const auto sine_codes =
        simulate_sine_record(SineDesign::coherent(20, 5, 0.0), theta, spec, 8009);
    const auto folded = fold_coherent(sine_codes, 20, 5, spec.level_count);
    const EstimateReport r3 = estimate_sine(folded, design, spec);
    check.require(r3.fallback && r3.fallback_estimator == FallbackEstimator::lse_sinefit,
                  "model 3 did not fall back to the sine fit");

    SweepConfig config;
    config.model = SweepModel::dc1;
    config.bits = 10;
    config.sigma_norm = 0.0;
    config.theta_grid = {0.3};
    config.record_lengths = {50};
    config.records = 25;
    config.seed = 8010;
    config.estimators = {EstimatorKind::quantile};
    const SweepResult sweep = run_sweep(config);
    check.require(sweep.rows.size() == 1 && sweep.rows[0].fallback_rate == 1.0,
                  "zero-noise sweep fallback_rate != 1");
    check.note("all three models fell back cleanly, sweep fallback_rate=1");
    return check;
}

// --- criterion 9: numerical kernels ------------------------------------------------

Check criterion9() {
    Check check;
    double worst_cdf = 0.0;
    for (double x = -8.0; x <= 8.0 + 1e-12; x += 0.03125) {
        worst_cdf = std::max(
            worst_cdf, std::fabs(std_normal_cdf(x) - static_cast<double>(oracle::normal_cdf(x))));
    }
    check.require(worst_cdf <= 1e-12, "cdf error " + fmt(worst_cdf) + " > 1e-12");

    double worst_p = 0.0;
    for (double p = 1e-10; p < 1.0; p = p < 0.01 ? p * 2.3 : p + 0.005) {
        worst_p = std::max(worst_p, std::fabs(std_normal_cdf(std_normal_inv_cdf(p)) - p));
    }
    check.require(worst_p <= 1e-12, "inverse round trip " + fmt(worst_p) + " > 1e-12");

    double worst_x = 0.0;
    for (double x = -6.0; x <= 6.0 + 1e-12; x += 0.125) {
        worst_x = std::max(worst_x, std::fabs(std_normal_inv_cdf(std_normal_cdf(x)) - x));
    }
    check.require(worst_x <= 1e-8, "quantile round trip " + fmt(worst_x) + " > 1e-8");

    double worst_fd = 0.0;
    const double h = 1e-7;
    for (double p = 0.01; p <= 0.99 + 1e-12; p += 0.005) {
        const double fd = (std_normal_inv_cdf(p + h) - std_normal_inv_cdf(p - h)) / (2.0 * h);
        worst_fd = std::max(worst_fd,
                            std::fabs(fd - inv_cdf_derivative(p)) / inv_cdf_derivative(p));
    }
    check.require(worst_fd <= 1e-4, "derivative FD mismatch " + fmt(worst_fd) + " > 1e-4");
    check.note("cdf " + fmt(worst_cdf) + ", roundtrips " + fmt(worst_p) + "/" + fmt(worst_x) +
               ", FD " + fmt(worst_fd));
    return check;
}

} // namespace

int main() {
    struct Entry {
        int id;
        const char* name;
        std::function<Check()> run;
    };
    const std::vector<Entry> criteria{
        {1, "model-1 bias removal vs arithmetic mean", criterion1},
        {2, "CRLB proximity of the quantile estimator", criterion2},
        {3, "model-2 bias removal and sigma recovery", criterion3},
        {4, "model-3 residuals vs LSE under INL", criterion4},
        {5, "single-bit estimator consistency", criterion5},
        {6, "noiseless-inversion identities", criterion6},
        {7, "covariance and BLUE oracle equivalences", criterion7},
        {8, "degeneracy handling and fallbacks", criterion8},
        {9, "normal CDF / quantile kernel tolerances", criterion9},
    };

    int failures = 0;
    for (const Entry& entry : criteria) {
        Check result;
        try {
            result = entry.run();
        } catch (const std::exception& e) {
            result.pass = false;
            result.detail = std::string("exception: ") + e.what();
        }
        std::printf("%s criterion %d (%s): %s\n", result.pass ? "PASS" : "FAIL", entry.id,
                    entry.name, result.detail.c_str());
        std::fflush(stdout);
        if (!result.pass) ++failures;
    }
    return failures;
}
