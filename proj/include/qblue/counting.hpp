#pragma once

// Code-domain statistics: histograms, empirical and cumulative probabilities,
// the active quantile set, and the multinomial covariance plug-in chain that
// ends in the covariance of the pre-distorted quantiles.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "qblue/gaussian.hpp"

namespace qblue {

struct CodeHistogram {
    std::vector<std::int64_t> counts; // one bin per code, 0..L-1
    std::int64_t total = 0;           // N = sum of counts
};

struct EmpiricalProbabilities {
    std::vector<double> p; // p[k] = counts[k] / N
};

// Transition indices k in 1..L-1 whose empirical cumulative probability
// (fraction of samples strictly below transition k) lies inside (0,1),
// together with those probabilities. Values are nondecreasing in k; empty
// interior bins produce repeated values.
struct ActiveQuantileSet {
    std::vector<int> indices;
    std::vector<double> values;

    std::size_t size() const noexcept { return indices.size(); }
};

inline CodeHistogram histogram(std::span<const int> codes, int level_count) {
    if (level_count < 2) {
        throw std::invalid_argument("histogram: level count must be >= 2");
    }
    if (codes.empty()) {
        throw std::invalid_argument("histogram: empty record");
    }
    CodeHistogram hist;
    hist.counts.assign(static_cast<std::size_t>(level_count), 0);
    for (int code : codes) {
        if (code < 0 || code >= level_count) {
            throw std::invalid_argument("histogram: code out of range [0, L-1]");
        }
        ++hist.counts[static_cast<std::size_t>(code)];
    }
    hist.total = static_cast<std::int64_t>(codes.size());
    return hist;
}

inline EmpiricalProbabilities empirical_probabilities(const CodeHistogram& hist) {
    if (hist.total < 1) {
        throw std::invalid_argument("empirical_probabilities: empty histogram");
    }
    EmpiricalProbabilities out;
    out.p.reserve(hist.counts.size());
    const double inv_n = 1.0 / static_cast<double>(hist.total);
    for (std::int64_t c : hist.counts) {
        out.p.push_back(static_cast<double>(c) * inv_n);
    }
    return out;
}

// Cumulative probabilities at the transition levels and the subset usable in
// the quantile equations. Cumulative counts are integers, so the strict
// (0, N) test is exact; an empty result signals the degenerate single-bin
// record.
inline ActiveQuantileSet cumulative_and_active(const CodeHistogram& hist) {
    if (hist.total < 1) {
        throw std::invalid_argument("cumulative_and_active: empty histogram");
    }
    ActiveQuantileSet active;
    const double inv_n = 1.0 / static_cast<double>(hist.total);
    std::int64_t below = 0;
    const int level_count = static_cast<int>(hist.counts.size());
    for (int k = 1; k < level_count; ++k) {
        below += hist.counts[static_cast<std::size_t>(k - 1)];
        if (below > 0 && below < hist.total) {
            active.indices.push_back(k);
            active.values.push_back(static_cast<double>(below) * inv_n);
        }
    }
    return active;
}

// Repeated cumulative values (from empty interior bins) carry no extra
// information and make the quantile covariance exactly singular; keep only
// the lowest transition index of each run of equal values.
inline ActiveQuantileSet dedup_repeated_quantiles(const ActiveQuantileSet& active) {
    ActiveQuantileSet out;
    for (std::size_t i = 0; i < active.size(); ++i) {
        if (i == 0 || active.values[i] != active.values[i - 1]) {
            out.indices.push_back(active.indices[i]);
            out.values.push_back(active.values[i]);
        }
    }
    return out;
}

// Covariance of the empirical probability vector: diagonal p_i(1-p_i)/N and
// off-diagonal -p_i p_j / N, i.e. the multinomial covariance divided by N^2,
// with every probability replaced by its estimate.
inline Eigen::MatrixXd multinomial_covariance(const EmpiricalProbabilities& prob,
                                              std::int64_t n_samples) {
    if (n_samples < 1) {
        throw std::invalid_argument("multinomial_covariance: N must be >= 1");
    }
    const auto dim = static_cast<Eigen::Index>(prob.p.size());
    Eigen::MatrixXd cov(dim, dim);
    const double inv_n = 1.0 / static_cast<double>(n_samples);
    for (Eigen::Index i = 0; i < dim; ++i) {
        for (Eigen::Index j = 0; j < dim; ++j) {
            const double pi = prob.p[static_cast<std::size_t>(i)];
            const double pj = prob.p[static_cast<std::size_t>(j)];
            cov(i, j) = (i == j) ? pi * (1.0 - pi) * inv_n : -pi * pj * inv_n;
        }
    }
    return cov;
}

// Covariance of the inclusive cumulative vector: out(i,j) is the sum of all
// input entries with row <= i and column <= j (the lower-triangular
// all-ones map applied on both sides). Entry (i,j) corresponds to the
// cumulative probabilities at transition indices i+1 and j+1.
inline Eigen::MatrixXd cumulative_covariance(const Eigen::MatrixXd& sigma_pi) {
    if (sigma_pi.rows() != sigma_pi.cols()) {
        throw std::invalid_argument("cumulative_covariance: matrix must be square");
    }
    Eigen::MatrixXd out = sigma_pi;
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        for (Eigen::Index j = 1; j < out.cols(); ++j) {
            out(i, j) += out(i, j - 1);
        }
    }
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
        for (Eigen::Index i = 1; i < out.rows(); ++i) {
            out(i, j) += out(i - 1, j);
        }
    }
    return out;
}

// Rows/columns of the full cumulative covariance at the active transition
// indices (transition k lives at position k-1).
inline Eigen::MatrixXd restrict_to_active(const Eigen::MatrixXd& sigma_cpi,
                                          const ActiveQuantileSet& active) {
    const auto dim = static_cast<Eigen::Index>(active.size());
    Eigen::MatrixXd out(dim, dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
        for (Eigen::Index j = 0; j < dim; ++j) {
            out(i, j) = sigma_cpi(active.indices[static_cast<std::size_t>(i)] - 1,
                                  active.indices[static_cast<std::size_t>(j)] - 1);
        }
    }
    return out;
}

// Closed form of the restricted cumulative covariance,
// cov(cp_i, cp_j) = cp_min (1 - cp_max) / N, valid because active values are
// nondecreasing. Algebraically identical to restrict_to_active applied after
// the full plug-in chain, but O(Lambda^2) instead of O(L^2).
inline Eigen::MatrixXd active_cumulative_covariance(const ActiveQuantileSet& active,
                                                    std::int64_t n_samples) {
    if (n_samples < 1) {
        throw std::invalid_argument("active_cumulative_covariance: N must be >= 1");
    }
    const auto dim = static_cast<Eigen::Index>(active.size());
    Eigen::MatrixXd out(dim, dim);
    const double inv_n = 1.0 / static_cast<double>(n_samples);
    for (Eigen::Index i = 0; i < dim; ++i) {
        for (Eigen::Index j = i; j < dim; ++j) {
            const double lo = active.values[static_cast<std::size_t>(i)];
            const double hi = active.values[static_cast<std::size_t>(j)];
            out(i, j) = lo * (1.0 - hi) * inv_n;
            out(j, i) = out(i, j);
        }
    }
    return out;
}

// Delta-method covariance of the pre-distorted quantiles: Sigma_Y =
// J * Sigma_cp * J^T with J diagonal, J_ii the derivative of the inverse CDF
// at the i-th active cumulative probability.
inline Eigen::MatrixXd quantile_covariance(const ActiveQuantileSet& active,
                                           const Eigen::MatrixXd& sigma_cpi_restricted) {
    const auto dim = static_cast<Eigen::Index>(active.size());
    if (sigma_cpi_restricted.rows() != dim || sigma_cpi_restricted.cols() != dim) {
        throw std::invalid_argument(
            "quantile_covariance: covariance must be restricted to the active set");
    }
    Eigen::VectorXd jac(dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
        jac(i) = inv_cdf_derivative(active.values[static_cast<std::size_t>(i)]);
    }
    return jac.asDiagonal() * sigma_cpi_restricted * jac.asDiagonal();
}

} // namespace qblue
