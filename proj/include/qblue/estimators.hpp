#pragma once

// Quantile-based Gauss-Markov estimators for quantized, noisy signals:
//   - DC value with known noise sigma (single-parameter BLUE on the
//     pre-distorted quantiles),
//   - DC value with unknown sigma (two-parameter BLUE on a reciprocal
//     reparametrization),
//   - coherently sampled sine (offset, cosine and sine amplitudes, phase-
//     folded records with a block-diagonal weight matrix),
// plus the conventional baselines (arithmetic mean, three-parameter
// least-squares sine fit), the exact mean-output expectation used as a bias
// oracle, and the Cramer-Rao bound for the known-sigma DC model.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "qblue/blue.hpp"
#include "qblue/counting.hpp"
#include "qblue/gaussian.hpp"
#include "qblue/quantizer.hpp"

namespace qblue {

struct DcModelKnownSigma {
    double sigma = 0.0; // noise standard deviation (volts), > 0
};

enum class FallbackEstimator { none, arithmetic_mean, lse_sinefit };

struct EstimateReport {
    Eigen::VectorXd theta_hat;
    Eigen::MatrixXd covariance; // NaN-filled when the fallback path was taken
    long lambda_used = 0;       // quantile rows used in the solve (post-dedup)
    bool fallback = false;
    FallbackEstimator fallback_estimator = FallbackEstimator::none;
    double ridge_used = 0.0;
};

// Coherent sampling design: periods full periods of M samples each, with
// known per-phase sequences x1 and x2 (canonically cosine/sine).
struct SineDesign {
    int samples_per_period = 0; // M >= 3
    int periods = 0;            // >= 1
    std::vector<double> x1;
    std::vector<double> x2;
    double sigma = 0.0; // noise standard deviation (volts)

    static SineDesign coherent(int samples_per_period, int periods, double sigma) {
        if (samples_per_period < 3) {
            throw std::invalid_argument("SineDesign: need at least 3 samples per period");
        }
        if (periods < 1) {
            throw std::invalid_argument("SineDesign: need at least one period");
        }
        SineDesign design;
        design.samples_per_period = samples_per_period;
        design.periods = periods;
        design.sigma = sigma;
        design.x1.resize(static_cast<std::size_t>(samples_per_period));
        design.x2.resize(static_cast<std::size_t>(samples_per_period));
        for (int n = 0; n < samples_per_period; ++n) {
            const double phase = 2.0 * std::numbers::pi * n / samples_per_period;
            design.x1[static_cast<std::size_t>(n)] = std::cos(phase);
            design.x2[static_cast<std::size_t>(n)] = std::sin(phase);
        }
        return design;
    }

    std::int64_t total_samples() const noexcept {
        return static_cast<std::int64_t>(samples_per_period) * periods;
    }
};

namespace detail {

inline Eigen::MatrixXd nan_matrix(Eigen::Index rows, Eigen::Index cols) {
    return Eigen::MatrixXd::Constant(rows, cols, std::numeric_limits<double>::quiet_NaN());
}

// Sigma_Y for an already deduplicated active set.
inline Eigen::MatrixXd sigma_y(const ActiveQuantileSet& active, std::int64_t n_samples) {
    return quantile_covariance(active, active_cumulative_covariance(active, n_samples));
}

} // namespace detail

inline double arithmetic_mean(const CodeHistogram& hist, const QuantizerSpec& spec) {
    if (hist.total < 1) {
        throw std::invalid_argument("arithmetic_mean: empty record");
    }
    if (hist.counts.size() != spec.output_levels.size()) {
        throw std::invalid_argument("arithmetic_mean: histogram does not match quantizer");
    }
    double sum = 0.0;
    for (std::size_t k = 0; k < hist.counts.size(); ++k) {
        if (hist.counts[k] != 0) {
            sum += static_cast<double>(hist.counts[k]) * spec.output_levels[k];
        }
    }
    return sum / static_cast<double>(hist.total);
}

inline double arithmetic_mean(std::span<const int> codes, const QuantizerSpec& spec) {
    return arithmetic_mean(histogram(codes, spec.level_count), spec);
}

// Single-bit (comparator with threshold 0) inversion: theta_hat =
// -sigma * Phi^{-1}(1 - p1_hat) where p1_hat is the observed fraction of
// ones.
inline double single_bit_estimate(double p1_hat, double sigma) {
    if (!(p1_hat > 0.0 && p1_hat < 1.0)) {
        throw std::invalid_argument("single_bit_estimate: degenerate comparator record");
    }
    if (!(sigma > 0.0)) {
        throw std::invalid_argument("single_bit_estimate: sigma must be positive");
    }
    return -sigma * std_normal_inv_cdf(1.0 - p1_hat);
}

// --- model 1: DC, known sigma ------------------------------------------------

// BLUE on the active quantiles. Each active transition k contributes the row
// T_k - sigma * Phi^{-1}(cp_k), all regressing on a column of ones; the
// noise covariance is sigma^2 * Sigma_Y. Callers must handle the empty
// active set (use the histogram overload for the fallback behavior).
inline EstimateReport estimate_dc_known_sigma_from_active(const ActiveQuantileSet& active_in,
                                                          std::int64_t n_samples,
                                                          const QuantizerSpec& spec,
                                                          DcModelKnownSigma model) {
    if (!(model.sigma > 0.0) || !std::isfinite(model.sigma)) {
        throw std::invalid_argument("estimate_dc_known_sigma: sigma must be positive and finite");
    }
    const ActiveQuantileSet active = dedup_repeated_quantiles(active_in);
    const auto rows = static_cast<Eigen::Index>(active.size());
    if (rows < 1) {
        throw std::invalid_argument("estimate_dc_known_sigma: empty active quantile set");
    }

    GaussMarkovProblem problem;
    problem.H = Eigen::MatrixXd::Ones(rows, 1);
    problem.X.resize(rows);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const auto k = static_cast<std::size_t>(i);
        problem.X(i) = spec.transitions[static_cast<std::size_t>(active.indices[k] - 1)] -
                       model.sigma * std_normal_inv_cdf(active.values[k]);
    }
    problem.Sigma = model.sigma * model.sigma * detail::sigma_y(active, n_samples);

    const BlueSolution solution = solve_gauss_markov(problem);
    EstimateReport report;
    report.theta_hat = solution.theta_hat;
    report.covariance = solution.covariance;
    report.lambda_used = static_cast<long>(rows);
    report.ridge_used = solution.ridge_used;
    return report;
}

// Histogram front end; a record confined to one code bin carries no quantile
// information and falls back to the arithmetic mean (flagged, never silent).
inline EstimateReport estimate_dc_known_sigma(const CodeHistogram& hist,
                                              const QuantizerSpec& spec,
                                              DcModelKnownSigma model) {
    const ActiveQuantileSet active = dedup_repeated_quantiles(cumulative_and_active(hist));
    if (active.size() == 0) {
        EstimateReport report;
        report.theta_hat = Eigen::VectorXd::Constant(1, arithmetic_mean(hist, spec));
        report.covariance = detail::nan_matrix(1, 1);
        report.fallback = true;
        report.fallback_estimator = FallbackEstimator::arithmetic_mean;
        return report;
    }
    return estimate_dc_known_sigma_from_active(active, hist.total, spec, model);
}

// --- model 2: DC, unknown sigma ----------------------------------------------

// Linear in gamma = [1/theta2, theta1/theta2]: rows [T_k, -1] against
// Phi^{-1}(cp_k) with covariance Sigma_Y. The (theta1, theta2) covariance is
// the first-order transform of the gamma covariance through the inverse map.
inline EstimateReport estimate_dc_unknown_sigma_from_active(const ActiveQuantileSet& active_in,
                                                            std::int64_t n_samples,
                                                            const QuantizerSpec& spec) {
    const ActiveQuantileSet active = dedup_repeated_quantiles(active_in);
    const auto rows = static_cast<Eigen::Index>(active.size());
    if (rows < 2) {
        throw std::invalid_argument("estimate_dc_unknown_sigma: need at least 2 active quantiles");
    }

    GaussMarkovProblem problem;
    problem.H.resize(rows, 2);
    problem.X.resize(rows);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const auto k = static_cast<std::size_t>(i);
        problem.H(i, 0) = spec.transitions[static_cast<std::size_t>(active.indices[k] - 1)];
        problem.H(i, 1) = -1.0;
        problem.X(i) = std_normal_inv_cdf(active.values[k]);
    }
    problem.Sigma = detail::sigma_y(active, n_samples);

    const BlueSolution solution = solve_gauss_markov(problem);
    const double gamma1 = solution.theta_hat(0);
    const double gamma2 = solution.theta_hat(1);
    if (!(gamma1 > 0.0)) {
        throw std::runtime_error("estimate_dc_unknown_sigma: non-physical sigma (gamma1 <= 0)");
    }

    EstimateReport report;
    report.theta_hat.resize(2);
    report.theta_hat(0) = gamma2 / gamma1; // theta1
    report.theta_hat(1) = 1.0 / gamma1;    // theta2 = sigma
    Eigen::Matrix2d jac;
    jac << -gamma2 / (gamma1 * gamma1), 1.0 / gamma1, //
        -1.0 / (gamma1 * gamma1), 0.0;
    report.covariance = jac * solution.covariance * jac.transpose();
    report.lambda_used = static_cast<long>(rows);
    report.ridge_used = solution.ridge_used;
    return report;
}

inline EstimateReport estimate_dc_unknown_sigma(const CodeHistogram& hist,
                                                const QuantizerSpec& spec) {
    const ActiveQuantileSet active = dedup_repeated_quantiles(cumulative_and_active(hist));
    if (active.size() < 2) {
        EstimateReport report;
        report.theta_hat.resize(2);
        report.theta_hat(0) = arithmetic_mean(hist, spec);
        report.theta_hat(1) = std::numeric_limits<double>::quiet_NaN(); // sigma unreported
        report.covariance = detail::nan_matrix(2, 2);
        report.lambda_used = static_cast<long>(active.size());
        report.fallback = true;
        report.fallback_estimator = FallbackEstimator::arithmetic_mean;
        return report;
    }
    return estimate_dc_unknown_sigma_from_active(active, hist.total, spec);
}

// --- model 3: coherent sine ----------------------------------------------------

// Partition a coherent record of samples_per_period * periods codes into one
// histogram per phase; sample m lands in phase m mod samples_per_period.
inline std::vector<CodeHistogram> fold_coherent(std::span<const int> codes,
                                                int samples_per_period, int periods,
                                                int level_count) {
    if (samples_per_period < 1 || periods < 1) {
        throw std::invalid_argument("fold_coherent: invalid design");
    }
    const auto expected =
        static_cast<std::size_t>(samples_per_period) * static_cast<std::size_t>(periods);
    if (codes.size() != expected) {
        throw std::invalid_argument("fold_coherent: record length must equal M * periods");
    }
    std::vector<CodeHistogram> folded(static_cast<std::size_t>(samples_per_period));
    for (auto& hist : folded) {
        hist.counts.assign(static_cast<std::size_t>(level_count), 0);
        hist.total = periods;
    }
    for (std::size_t m = 0; m < codes.size(); ++m) {
        const int code = codes[m];
        if (code < 0 || code >= level_count) {
            throw std::invalid_argument("fold_coherent: code out of range");
        }
        ++folded[m % static_cast<std::size_t>(samples_per_period)]
              .counts[static_cast<std::size_t>(code)];
    }
    return folded;
}

// Ordinary least squares of arbitrary sample values on [1, x1, x2]; exposed
// separately so exact (unquantized) samples can be fitted too.
inline Eigen::Vector3d lse_sinefit_values(std::span<const double> values,
                                          const SineDesign& design) {
    const auto period = static_cast<std::size_t>(design.samples_per_period);
    if (values.size() < 3 || values.size() % period != 0) {
        throw std::invalid_argument("lse_sinefit: record length must be a multiple of M, >= 3");
    }
    Eigen::Matrix3d gram = Eigen::Matrix3d::Zero();
    Eigen::Vector3d rhs = Eigen::Vector3d::Zero();
    for (std::size_t m = 0; m < values.size(); ++m) {
        const std::size_t n = m % period;
        const Eigen::Vector3d row(1.0, design.x1[n], design.x2[n]);
        gram += row * row.transpose();
        rhs += row * values[m];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(gram, Eigen::EigenvaluesOnly);
    if (!(eig.eigenvalues().minCoeff() > 1e-9 * eig.eigenvalues().maxCoeff())) {
        throw std::runtime_error("lse_sinefit: rank-deficient design");
    }
    return gram.ldlt().solve(rhs);
}

inline Eigen::Vector3d lse_sinefit(std::span<const int> codes, const QuantizerSpec& spec,
                                   const SineDesign& design) {
    std::vector<double> values;
    values.reserve(codes.size());
    for (int code : codes) {
        values.push_back(output_level(spec, code));
    }
    return lse_sinefit_values(values, design);
}

namespace detail {

// Least-squares sine fit from per-phase histograms; identical to the
// per-sample fit because every sample of a phase shares one design row.
inline Eigen::Vector3d lse_from_folded(const std::vector<CodeHistogram>& folded,
                                       const SineDesign& design, const QuantizerSpec& spec) {
    Eigen::Matrix3d gram = Eigen::Matrix3d::Zero();
    Eigen::Vector3d rhs = Eigen::Vector3d::Zero();
    for (std::size_t n = 0; n < folded.size(); ++n) {
        const Eigen::Vector3d row(1.0, design.x1[n], design.x2[n]);
        gram += static_cast<double>(folded[n].total) * row * row.transpose();
        double level_sum = 0.0;
        for (std::size_t k = 0; k < folded[n].counts.size(); ++k) {
            if (folded[n].counts[k] != 0) {
                level_sum += static_cast<double>(folded[n].counts[k]) * spec.output_levels[k];
            }
        }
        rhs += row * level_sum;
    }
    return gram.ldlt().solve(rhs);
}

} // namespace detail

// BLUE over all phases: phase n contributes one row per active quantile,
// [1, x1[n], x2[n]] against T_k - sigma * Phi^{-1}(cp_k[n]); phases whose
// samples all fell into one bin contribute nothing and are discarded; the
// per-phase weight blocks sigma^2 * Sigma_Y[n] stack block-diagonally.
// Throws when fewer than 3 usable rows (or a rank-deficient stack) remain;
// the histogram overload falls back to the least-squares fit instead.
inline EstimateReport estimate_sine_from_active(const std::vector<ActiveQuantileSet>& per_phase,
                                                std::int64_t periods, const SineDesign& design,
                                                const QuantizerSpec& spec) {
    if (per_phase.size() != static_cast<std::size_t>(design.samples_per_period)) {
        throw std::invalid_argument("estimate_sine: one active set per phase required");
    }
    if (!(design.sigma > 0.0) || !std::isfinite(design.sigma)) {
        throw std::invalid_argument("estimate_sine: sigma must be positive and finite");
    }

    std::vector<ActiveQuantileSet> deduped(per_phase.size());
    Eigen::Index rows = 0;
    for (std::size_t n = 0; n < per_phase.size(); ++n) {
        deduped[n] = dedup_repeated_quantiles(per_phase[n]);
        rows += static_cast<Eigen::Index>(deduped[n].size());
    }
    if (rows < 3) {
        throw std::invalid_argument("estimate_sine: fewer than 3 quantile rows");
    }

    GaussMarkovProblem problem;
    problem.H.resize(rows, 3);
    problem.X.resize(rows);
    problem.Sigma = Eigen::MatrixXd::Zero(rows, rows);
    Eigen::Index at = 0;
    for (std::size_t n = 0; n < deduped.size(); ++n) {
        const ActiveQuantileSet& active = deduped[n];
        const auto block = static_cast<Eigen::Index>(active.size());
        if (block == 0) {
            continue; // single-bin phase, discarded
        }
        for (Eigen::Index i = 0; i < block; ++i) {
            const auto k = static_cast<std::size_t>(i);
            problem.H(at + i, 0) = 1.0;
            problem.H(at + i, 1) = design.x1[n];
            problem.H(at + i, 2) = design.x2[n];
            problem.X(at + i) =
                spec.transitions[static_cast<std::size_t>(active.indices[k] - 1)] -
                design.sigma * std_normal_inv_cdf(active.values[k]);
        }
        problem.Sigma.block(at, at, block, block) =
            design.sigma * design.sigma * detail::sigma_y(active, periods);
        at += block;
    }
    if (Eigen::ColPivHouseholderQR<Eigen::MatrixXd>(problem.H).rank() < 3) {
        throw std::invalid_argument("estimate_sine: surviving phases do not span 3 parameters");
    }

    const BlueSolution solution = solve_gauss_markov(problem);
    EstimateReport report;
    report.theta_hat = solution.theta_hat;
    report.covariance = solution.covariance;
    report.lambda_used = static_cast<long>(rows);
    report.ridge_used = solution.ridge_used;
    return report;
}

inline EstimateReport estimate_sine(const std::vector<CodeHistogram>& folded,
                                    const SineDesign& design, const QuantizerSpec& spec) {
    if (folded.size() != static_cast<std::size_t>(design.samples_per_period)) {
        throw std::invalid_argument("estimate_sine: expected one histogram per phase");
    }
    for (const CodeHistogram& hist : folded) {
        if (hist.total != design.periods) {
            throw std::invalid_argument("estimate_sine: each phase must hold one count per period");
        }
    }

    std::vector<ActiveQuantileSet> per_phase(folded.size());
    Eigen::Index rows = 0;
    for (std::size_t n = 0; n < folded.size(); ++n) {
        per_phase[n] = dedup_repeated_quantiles(cumulative_and_active(folded[n]));
        rows += static_cast<Eigen::Index>(per_phase[n].size());
    }

    bool identifiable = rows >= 3;
    if (identifiable) {
        Eigen::MatrixXd h(rows, 3);
        Eigen::Index at = 0;
        for (std::size_t n = 0; n < per_phase.size(); ++n) {
            for (std::size_t i = 0; i < per_phase[n].size(); ++i, ++at) {
                h(at, 0) = 1.0;
                h(at, 1) = design.x1[n];
                h(at, 2) = design.x2[n];
            }
        }
        identifiable = Eigen::ColPivHouseholderQR<Eigen::MatrixXd>(h).rank() == 3;
    }
    if (!identifiable) {
        EstimateReport report;
        report.theta_hat = detail::lse_from_folded(folded, design, spec);
        report.covariance = detail::nan_matrix(3, 3);
        report.lambda_used = static_cast<long>(rows);
        report.fallback = true;
        report.fallback_estimator = FallbackEstimator::lse_sinefit;
        return report;
    }
    return estimate_sine_from_active(per_phase, design.periods, design, spec);
}

// --- oracles -------------------------------------------------------------------

// Exact expectation of the quantizer output for a constant input theta in
// Gaussian noise: sum_k y_k * [Phi((T_{k+1}-theta)/sigma) -
// Phi((T_k-theta)/sigma)] with open-ended end bins. Serves as the bias
// oracle for the arithmetic mean.
inline double mean_output_oracle(double theta, double sigma, const QuantizerSpec& spec) {
    if (!(sigma > 0.0)) {
        throw std::invalid_argument("mean_output_oracle: sigma must be positive");
    }
    // Codes more than 40 sigma away carry no double-precision mass.
    const int lo = quantize(theta - 40.0 * sigma, spec);
    const int hi = quantize(theta + 40.0 * sigma, spec);
    double mean = 0.0;
    double upper_cdf = 0.0;
    double lower_cdf =
        lo == 0 ? 0.0 : std_normal_cdf((spec.transitions[static_cast<std::size_t>(lo - 1)] - theta) / sigma);
    for (int k = lo; k <= hi; ++k) {
        upper_cdf = (k == spec.level_count - 1)
                        ? 1.0
                        : std_normal_cdf((spec.transitions[static_cast<std::size_t>(k)] - theta) / sigma);
        mean += spec.output_levels[static_cast<std::size_t>(k)] * (upper_cdf - lower_cdf);
        lower_cdf = upper_cdf;
    }
    return mean;
}

// Cramer-Rao lower bound for unbiased estimators of theta under the
// known-sigma DC model: reciprocal of the multinomial Fisher information
// N * sum_k (dp_k/dtheta)^2 / p_k with dp_k/dtheta =
// (phi((T_k-theta)/sigma) - phi((T_{k+1}-theta)/sigma)) / sigma.
inline double crlb_dc(double theta, double sigma, const QuantizerSpec& spec,
                      std::int64_t n_samples) {
    if (!(sigma > 0.0)) {
        throw std::invalid_argument("crlb_dc: sigma must be positive");
    }
    if (n_samples < 1) {
        throw std::invalid_argument("crlb_dc: N must be >= 1");
    }
    const int lo = quantize(theta - 40.0 * sigma, spec);
    const int hi = quantize(theta + 40.0 * sigma, spec);
    double info = 0.0;
    double lower_cdf = 0.0;
    double lower_pdf = 0.0;
    if (lo > 0) {
        const double z = (spec.transitions[static_cast<std::size_t>(lo - 1)] - theta) / sigma;
        lower_cdf = std_normal_cdf(z);
        lower_pdf = std_normal_pdf(z);
    }
    for (int k = lo; k <= hi; ++k) {
        double upper_cdf = 1.0;
        double upper_pdf = 0.0;
        if (k < spec.level_count - 1) {
            const double z = (spec.transitions[static_cast<std::size_t>(k)] - theta) / sigma;
            upper_cdf = std_normal_cdf(z);
            upper_pdf = std_normal_pdf(z);
        }
        const double prob = upper_cdf - lower_cdf;
        if (prob >= 1e-300) {
            const double dp = (lower_pdf - upper_pdf) / sigma;
            info += dp * dp / prob;
        }
        lower_cdf = upper_cdf;
        lower_pdf = upper_pdf;
    }
    info *= static_cast<double>(n_samples);
    if (!(info > 0.0)) {
        throw std::runtime_error("crlb_dc: no informative transition within reach of theta");
    }
    return 1.0 / info;
}

} // namespace qblue
