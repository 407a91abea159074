// Command-line front end: quantizer generation, single-record estimation
// from CSV files, Monte Carlo sweeps and CRLB tables.

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qblue/counting.hpp"
#include "qblue/estimators.hpp"
#include "qblue/montecarlo.hpp"
#include "qblue/quantizer.hpp"

namespace {

std::string fmt12(double value) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", value);
    return buf;
}

std::vector<double> parse_theta_grid(const std::string& text) {
    const auto c1 = text.find(':');
    const auto c2 = text.find(':', c1 == std::string::npos ? c1 : c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos) {
        throw std::invalid_argument("theta grid must be lo:hi:step");
    }
    const double lo = std::stod(text.substr(0, c1));
    const double hi = std::stod(text.substr(c1 + 1, c2 - c1 - 1));
    const double step = std::stod(text.substr(c2 + 1));
    if (!(step > 0.0) || hi < lo) {
        throw std::invalid_argument("theta grid must satisfy lo <= hi and step > 0");
    }
    std::vector<double> grid;
    for (int k = 0;; ++k) {
        const double value = lo + k * step;
        if (value > hi + 1e-9 * step) break;
        grid.push_back(value);
    }
    return grid;
}

std::vector<std::string> split_commas(const std::string& text) {
    std::vector<std::string> parts;
    std::size_t begin = 0;
    while (begin <= text.size()) {
        const auto comma = text.find(',', begin);
        if (comma == std::string::npos) {
            parts.push_back(text.substr(begin));
            break;
        }
        parts.push_back(text.substr(begin, comma - begin));
        begin = comma + 1;
    }
    return parts;
}

std::array<double, 3> parse_theta_triple(const std::string& text) {
    const auto parts = split_commas(text);
    if (parts.size() != 3) {
        throw std::invalid_argument("sine3 theta grid must be three comma-separated values");
    }
    return {std::stod(parts[0]), std::stod(parts[1]), std::stod(parts[2])};
}

std::vector<int> read_samples_csv(const std::string& path, int level_count) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open samples file " + path);
    }
    std::string line;
    std::size_t line_no = 0;
    auto fail = [&](const std::string& what) {
        throw std::runtime_error("samples file " + path + ": " + what + " at line " +
                                 std::to_string(line_no));
    };
    bool saw_header = false;
    std::vector<int> codes;
    long expected_index = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        if (!saw_header) {
            if (line != "index,code") fail("expected header 'index,code'");
            saw_header = true;
            continue;
        }
        const auto comma = line.find(',');
        if (comma == std::string::npos) fail("malformed row");
        long idx = 0;
        auto rc = std::from_chars(line.data(), line.data() + comma, idx);
        if (rc.ec != std::errc{} || rc.ptr != line.data() + comma) fail("malformed index");
        if (idx != expected_index) fail("index must run 0..K-1 without gaps");
        int code = 0;
        auto cc = std::from_chars(line.data() + comma + 1, line.data() + line.size(), code);
        if (cc.ec != std::errc{} || cc.ptr != line.data() + line.size()) fail("malformed code");
        if (code < 0 || code >= level_count) fail("code out of range for this quantizer");
        codes.push_back(code);
        ++expected_index;
    }
    if (!saw_header) fail("missing header");
    if (codes.empty()) fail("no samples");
    return codes;
}

void print_report(const qblue::EstimateReport& report, const std::vector<std::string>& names) {
    for (std::size_t i = 0; i < names.size(); ++i) {
        const double est = report.theta_hat(static_cast<Eigen::Index>(i));
        const double var = report.covariance(static_cast<Eigen::Index>(i),
                                             static_cast<Eigen::Index>(i));
        std::cout << names[i] << " " << fmt12(est) << " " << fmt12(std::sqrt(var)) << "\n";
    }
    const char* fb = "none";
    if (report.fallback_estimator == qblue::FallbackEstimator::arithmetic_mean) {
        fb = "arithmetic_mean";
    } else if (report.fallback_estimator == qblue::FallbackEstimator::lse_sinefit) {
        fb = "lse_sinefit";
    }
    std::cout << "fallback " << (report.fallback ? "true" : "false") << " " << fb << "\n";
    std::cout << "lambda " << report.lambda_used << "\n";
    std::cout << "ridge " << fmt12(report.ridge_used) << "\n";
}

struct GenArgs {
    int bits = 10;
    double range_lo = -1.0;
    double range_hi = 1.0;
    double inl_half_width = 0.0;
    std::uint64_t seed = 0;
    std::string out;
};

struct EstimateArgs {
    std::string model;
    std::string levels;
    std::string samples;
    double sigma = 0.0;
    bool have_sigma = false;
    int samples_per_period = 0;
    int periods = 0;
};

struct SweepArgs {
    std::string model;
    int bits = 10;
    double sigma_norm = 0.2;
    std::string theta_grid;
    std::string n_list = "500";
    int records = 2000;
    double inl_half_width = 0.0;
    std::uint64_t seed = 0;
    std::string estimators;
    int samples_per_period = 20;
    int periods = 50;
    std::string out;
};

struct CrlbArgs {
    int bits = 10;
    double sigma_norm = 0.2;
    std::int64_t n = 300;
    std::string theta_grid;
    std::string out;
};

int run_gen(const GenArgs& args) {
    qblue::QuantizerSpec spec = qblue::make_uniform(args.bits, args.range_lo, args.range_hi);
    if (args.inl_half_width > 0.0) {
        spec = qblue::apply_inl(spec,
                                {qblue::InlKind::uniform, args.inl_half_width, args.seed});
    }
    qblue::save_transitions(spec, args.out);
    std::cout << "L=" << spec.level_count << " delta=" << fmt12(spec.step) << "\n";
    return 0;
}

int run_estimate(const EstimateArgs& args) {
    const qblue::SweepModel model = qblue::sweep_model_from_string(args.model);
    const qblue::QuantizerSpec spec = qblue::load_transitions(args.levels);
    const std::vector<int> codes = read_samples_csv(args.samples, spec.level_count);

    if (model == qblue::SweepModel::dc1) {
        if (!args.have_sigma) throw std::invalid_argument("dc1 requires --sigma");
        const auto hist = qblue::histogram(codes, spec.level_count);
        print_report(qblue::estimate_dc_known_sigma(hist, spec, {args.sigma}), {"theta1"});
    } else if (model == qblue::SweepModel::dc2) {
        const auto hist = qblue::histogram(codes, spec.level_count);
        print_report(qblue::estimate_dc_unknown_sigma(hist, spec), {"theta1", "theta2"});
    } else {
        if (!args.have_sigma) throw std::invalid_argument("sine3 requires --sigma");
        if (args.samples_per_period < 3 || args.periods < 1) {
            throw std::invalid_argument("sine3 requires --samples-per-period and --periods");
        }
        const auto design = qblue::SineDesign::coherent(args.samples_per_period, args.periods,
                                                        args.sigma);
        const auto folded = qblue::fold_coherent(codes, args.samples_per_period, args.periods,
                                                 spec.level_count);
        print_report(qblue::estimate_sine(folded, design, spec),
                     {"theta0", "theta1", "theta2"});
    }
    return 0;
}

int run_sweep_cmd(const SweepArgs& args) {
    qblue::SweepConfig config;
    config.model = qblue::sweep_model_from_string(args.model);
    config.bits = args.bits;
    config.sigma_norm = args.sigma_norm;
    config.records = args.records;
    config.seed = args.seed;
    if (args.inl_half_width > 0.0) {
        config.inl = {qblue::InlKind::uniform, args.inl_half_width, args.seed};
    }

    if (config.model == qblue::SweepModel::sine3) {
        config.sine_theta = parse_theta_triple(args.theta_grid);
        config.samples_per_period = args.samples_per_period;
        config.periods = args.periods;
        if (args.estimators.empty()) {
            config.estimators = {qblue::EstimatorKind::quantile, qblue::EstimatorKind::lse};
        }
    } else {
        config.theta_grid = parse_theta_grid(args.theta_grid);
        for (const std::string& part : split_commas(args.n_list)) {
            const long long n = std::stoll(part);
            if (n < 1) throw std::invalid_argument("record lengths must be >= 1");
            config.record_lengths.push_back(n);
        }
    }
    if (!args.estimators.empty()) {
        config.estimators.clear();
        for (const std::string& part : split_commas(args.estimators)) {
            config.estimators.push_back(qblue::estimator_from_string(part));
        }
    }

    const qblue::SweepResult result = qblue::run_sweep(config);
    std::ofstream out(args.out);
    if (!out) throw std::runtime_error("cannot open output file " + args.out);
    qblue::write_sweep_csv(result, out);
    std::cout << "rows=" << result.rows.size() << " out=" << args.out << "\n";
    return 0;
}

int run_crlb(const CrlbArgs& args) {
    const auto rows = qblue::crlb_sweep(args.bits, args.sigma_norm, args.n,
                                        parse_theta_grid(args.theta_grid));
    std::ofstream out(args.out);
    if (!out) throw std::runtime_error("cannot open output file " + args.out);
    out << "theta_over_delta,sqrt_crlb_over_delta\n";
    for (const auto& row : rows) {
        out << fmt12(row.theta_over_delta) << "," << fmt12(std::sqrt(row.crlb_normalized))
            << "\n";
    }
    std::cout << "rows=" << rows.size() << " out=" << args.out << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Quantile-based Gauss-Markov estimation from quantized data"};
    app.require_subcommand(1);

    GenArgs gen;
    auto* gen_cmd = app.add_subcommand("gen-quantizer", "Generate a transition-level file");
    gen_cmd->add_option("--bits", gen.bits, "Quantizer resolution in bits")
        ->required()
        ->check(CLI::Range(1, 24));
    gen_cmd->add_option("--range-lo", gen.range_lo, "Full-scale lower edge");
    gen_cmd->add_option("--range-hi", gen.range_hi, "Full-scale upper edge");
    gen_cmd->add_option("--inl-half-width", gen.inl_half_width,
                        "Uniform INL half width in units of the step")
        ->check(CLI::NonNegativeNumber);
    gen_cmd->add_option("--seed", gen.seed, "INL seed");
    gen_cmd->add_option("--out", gen.out, "Output CSV path")->required();

    EstimateArgs est;
    auto* est_cmd = app.add_subcommand("estimate", "Estimate parameters from a sample file");
    est_cmd->add_option("--model", est.model, "dc1|dc2|sine3")->required();
    est_cmd->add_option("--levels", est.levels, "Transition-level CSV")->required();
    est_cmd->add_option("--samples", est.samples, "Samples CSV (index,code)")->required();
    auto* sigma_opt = est_cmd->add_option("--sigma", est.sigma, "Noise standard deviation (volts)");
    est_cmd->add_option("--samples-per-period", est.samples_per_period, "M (sine3)");
    est_cmd->add_option("--periods", est.periods, "Number of periods (sine3)");

    SweepArgs sweep;
    auto* sweep_cmd = app.add_subcommand("sweep", "Monte Carlo estimator sweep to CSV");
    sweep_cmd->add_option("--model", sweep.model, "dc1|dc2|sine3")->required();
    sweep_cmd->add_option("--bits", sweep.bits, "Quantizer bits")->check(CLI::Range(1, 24));
    sweep_cmd->add_option("--sigma-norm", sweep.sigma_norm, "sigma / step")
        ->check(CLI::NonNegativeNumber);
    sweep_cmd
        ->add_option("--theta-grid", sweep.theta_grid,
                     "lo:hi:step in steps (DC) or t0,t1,t2 triple (sine3)")
        ->required();
    sweep_cmd->add_option("--n", sweep.n_list, "Record lengths, comma separated (DC)");
    sweep_cmd->add_option("--records", sweep.records, "Monte Carlo records per grid point")
        ->check(CLI::PositiveNumber);
    sweep_cmd->add_option("--inl-half-width", sweep.inl_half_width, "Uniform INL half width")
        ->check(CLI::NonNegativeNumber);
    sweep_cmd->add_option("--seed", sweep.seed, "Master seed");
    sweep_cmd->add_option("--estimators", sweep.estimators,
                          "Comma separated subset of quantile,mean,lse");
    sweep_cmd->add_option("--samples-per-period", sweep.samples_per_period, "M (sine3)");
    sweep_cmd->add_option("--periods", sweep.periods, "Periods (sine3)");
    sweep_cmd->add_option("--out", sweep.out, "Output CSV path")->required();

    CrlbArgs crlb;
    auto* crlb_cmd = app.add_subcommand("crlb", "CRLB table for the known-sigma DC model");
    crlb_cmd->add_option("--bits", crlb.bits, "Quantizer bits")->check(CLI::Range(1, 24));
    crlb_cmd->add_option("--sigma-norm", crlb.sigma_norm, "sigma / step")
        ->check(CLI::PositiveNumber);
    crlb_cmd->add_option("--n", crlb.n, "Record length")->check(CLI::PositiveNumber);
    crlb_cmd->add_option("--theta-grid", crlb.theta_grid, "lo:hi:step in steps")->required();
    crlb_cmd->add_option("--out", crlb.out, "Output CSV path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen_cmd->parsed()) return run_gen(gen);
        if (est_cmd->parsed()) {
            est.have_sigma = sigma_opt->count() > 0;
            return run_estimate(est);
        }
        if (sweep_cmd->parsed()) return run_sweep_cmd(sweep);
        if (crlb_cmd->parsed()) return run_crlb(crlb);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
