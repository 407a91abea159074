// Minimal usage example: simulate a noisy DC capture on a 10-bit quantizer
// and compare the arithmetic mean with the quantile-based estimate.

#include <cstdio>

#include "qblue/estimators.hpp"
#include "qblue/montecarlo.hpp"
#include "qblue/quantizer.hpp"

int main() {
    const qblue::QuantizerSpec spec = qblue::make_uniform(10, -1.0, 1.0);
    const double delta = spec.step;
    const double theta = 0.3 * delta;  // true DC value
    const double sigma = 0.2 * delta;  // known noise level

    const std::vector<int> codes = qblue::simulate_dc_record(theta, sigma, spec, 500, 42);
    const qblue::CodeHistogram hist = qblue::histogram(codes, spec.level_count);

    const double mean = qblue::arithmetic_mean(hist, spec);
    const qblue::EstimateReport report = qblue::estimate_dc_known_sigma(hist, spec, {sigma});

    std::printf("true theta            %+.6e V\n", theta);
    std::printf("arithmetic mean       %+.6e V (error %+.3f steps)\n", mean,
                (mean - theta) / delta);
    std::printf("quantile estimate     %+.6e V (error %+.3f steps, std %.3f steps)\n",
                report.theta_hat(0), (report.theta_hat(0) - theta) / delta,
                std::sqrt(report.covariance(0, 0)) / delta);
    std::printf("active quantiles      %ld\n", report.lambda_used);
    return 0;
}
