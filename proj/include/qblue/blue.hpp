#pragma once

// Generic Gauss-Markov solver: best linear unbiased estimate
// (H^T Sigma^-1 H)^-1 H^T Sigma^-1 X with its covariance, computed through a
// Cholesky whitening of Sigma rather than explicit inversion. Plug-in
// covariances estimated from short records are frequently near-singular, so
// an escalating diagonal ridge is applied and reported.

#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Dense>

namespace qblue {

struct GaussMarkovProblem {
    Eigen::MatrixXd H;     // design matrix, rows >= columns
    Eigen::VectorXd X;     // observations
    Eigen::MatrixXd Sigma; // noise covariance, symmetric
};

enum class ConditionFlag { clean, ridged };

struct BlueSolution {
    Eigen::VectorXd theta_hat;
    Eigen::MatrixXd covariance; // (H^T Sigma^-1 H)^-1
    double ridge_used = 0.0;
    ConditionFlag condition_flag = ConditionFlag::clean;
};

struct ConditionReport {
    double min_eig_estimate = 0.0;
    double ridge_recommended = 0.0; // +inf when no ridge in the ladder works
};

namespace detail {

inline void require_symmetric(const Eigen::MatrixXd& sigma) {
    if (sigma.rows() != sigma.cols()) {
        throw std::invalid_argument("covariance must be square");
    }
    const double scale = sigma.cwiseAbs().maxCoeff();
    if (scale > 0.0 && (sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
        throw std::invalid_argument("covariance must be symmetric");
    }
}

inline double mean_diagonal(const Eigen::MatrixXd& sigma) {
    const double m = sigma.trace() / static_cast<double>(sigma.rows());
    return m > std::numeric_limits<double>::min() ? m : std::numeric_limits<double>::min();
}

} // namespace detail

// Diagnostic used by solve_gauss_markov: the smallest eigenvalue of Sigma
// and the diagonal ridge the solver would add. A ridge is recommended when
// the smallest eigenvalue falls below 1e-12 of the mean diagonal (or the
// factorization fails outright); candidate values are
// 1e-10 * mean_diag * 10^k up to 1e-4 * mean_diag.
inline ConditionReport condition_report(const Eigen::MatrixXd& sigma) {
    detail::require_symmetric(sigma);
    ConditionReport report;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma, Eigen::EigenvaluesOnly);
    report.min_eig_estimate = eig.eigenvalues().minCoeff();

    const double mean_diag = detail::mean_diagonal(sigma);
    const double floor = 1e-12 * mean_diag;
    if (report.min_eig_estimate > floor &&
        Eigen::LLT<Eigen::MatrixXd>(sigma).info() == Eigen::Success) {
        report.ridge_recommended = 0.0;
        return report;
    }
    for (double ridge = 1e-10 * mean_diag; ridge <= 1e-4 * mean_diag * (1.0 + 1e-9);
         ridge *= 10.0) {
        Eigen::MatrixXd tried = sigma;
        tried.diagonal().array() += ridge;
        if (Eigen::LLT<Eigen::MatrixXd>(tried).info() == Eigen::Success) {
            report.ridge_recommended = ridge;
            return report;
        }
    }
    report.ridge_recommended = std::numeric_limits<double>::infinity();
    return report;
}

inline BlueSolution solve_gauss_markov(const GaussMarkovProblem& problem) {
    const Eigen::Index rows = problem.H.rows();
    const Eigen::Index cols = problem.H.cols();
    if (cols < 1 || rows < cols) {
        throw std::invalid_argument("solve_gauss_markov: need at least as many rows as parameters");
    }
    if (problem.X.size() != rows || problem.Sigma.rows() != rows) {
        throw std::invalid_argument("solve_gauss_markov: inconsistent dimensions");
    }
    if (Eigen::ColPivHouseholderQR<Eigen::MatrixXd>(problem.H).rank() < cols) {
        throw std::runtime_error("solve_gauss_markov: rank-deficient design matrix");
    }

    const ConditionReport report = condition_report(problem.Sigma);
    if (!std::isfinite(report.ridge_recommended)) {
        throw std::runtime_error(
            "solve_gauss_markov: covariance not factorizable even at the maximum ridge");
    }

    Eigen::MatrixXd sigma = problem.Sigma;
    if (report.ridge_recommended > 0.0) {
        sigma.diagonal().array() += report.ridge_recommended;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success) {
        throw std::runtime_error("solve_gauss_markov: Cholesky factorization failed");
    }

    // Whiten, then solve the small normal equations.
    const Eigen::MatrixXd h_white = llt.matrixL().solve(problem.H);
    const Eigen::VectorXd x_white = llt.matrixL().solve(problem.X);
    const Eigen::MatrixXd gram = h_white.transpose() * h_white;
    const auto gram_ldlt = gram.ldlt();

    BlueSolution solution;
    solution.theta_hat = gram_ldlt.solve(h_white.transpose() * x_white);
    Eigen::MatrixXd cov = gram_ldlt.solve(Eigen::MatrixXd::Identity(cols, cols));
    solution.covariance = 0.5 * (cov + cov.transpose());
    solution.ridge_used = report.ridge_recommended;
    solution.condition_flag =
        report.ridge_recommended > 0.0 ? ConditionFlag::ridged : ConditionFlag::clean;
    return solution;
}

} // namespace qblue
