#pragma once

// Model of an L-level quantizer with known transition levels: code mapping,
// ideal mid-tread construction, INL perturbation and transition-level files.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qblue/rng.hpp"

namespace qblue {

struct QuantizerSpec {
    int level_count = 0;               // L, even, >= 2
    double step = 0.0;                 // nominal step (volts)
    std::vector<double> transitions;   // T_1 .. T_{L-1}, strictly increasing
    std::vector<double> output_levels; // y_0 .. y_{L-1}

    bool operator==(const QuantizerSpec&) const = default;
};

enum class InlKind { none, uniform };

struct InlProfile {
    InlKind kind = InlKind::none;
    double half_width = 0.0; // in units of the step
    std::uint64_t seed = 0;
};

namespace detail {

// y_k = -(L/2 - 1)*step + k*step, k = 0..L-1. Shared by every construction
// path so that reloaded specs compare bit-identical.
inline std::vector<double> uniform_output_levels(int level_count, double step) {
    std::vector<double> y(static_cast<std::size_t>(level_count));
    const double base = -(level_count / 2 - 1) * step;
    for (int k = 0; k < level_count; ++k) {
        y[static_cast<std::size_t>(k)] = base + k * step;
    }
    return y;
}

inline void validate_spec(const QuantizerSpec& spec) {
    if (spec.level_count < 2 || spec.level_count % 2 != 0) {
        throw std::invalid_argument("quantizer: level count must be an even integer >= 2");
    }
    if (!(spec.step > 0.0)) {
        throw std::invalid_argument("quantizer: step must be positive");
    }
    if (spec.transitions.size() != static_cast<std::size_t>(spec.level_count - 1)) {
        throw std::invalid_argument("quantizer: expected L-1 transition levels");
    }
    for (std::size_t i = 1; i < spec.transitions.size(); ++i) {
        if (!(spec.transitions[i - 1] < spec.transitions[i])) {
            throw std::invalid_argument("quantizer: transitions must be strictly increasing");
        }
    }
}

} // namespace detail

// Ideal uniform quantizer over a full-scale interval. The interval fixes the
// step (width / 2^bits); output levels follow the fixed level formula, and
// transitions sit midway between adjacent levels so the code reproducing 0
// covers [-step/2, +step/2). Two levels degenerate to a comparator whose
// single threshold is at zero.
inline QuantizerSpec make_uniform(int bits, double range_lo, double range_hi) {
    if (bits < 1 || bits > 24) {
        throw std::invalid_argument("make_uniform: bits must lie in [1, 24]");
    }
    if (!(range_lo < range_hi)) {
        throw std::invalid_argument("make_uniform: empty full-scale interval");
    }
    QuantizerSpec spec;
    spec.level_count = 1 << bits;
    spec.step = (range_hi - range_lo) / static_cast<double>(spec.level_count);
    spec.output_levels = detail::uniform_output_levels(spec.level_count, spec.step);
    spec.transitions.resize(static_cast<std::size_t>(spec.level_count - 1));
    if (spec.level_count == 2) {
        spec.transitions[0] = 0.0;
    } else {
        for (int k = 1; k < spec.level_count; ++k) {
            spec.transitions[static_cast<std::size_t>(k - 1)] =
                0.5 * (spec.output_levels[static_cast<std::size_t>(k - 1)] +
                       spec.output_levels[static_cast<std::size_t>(k)]);
        }
    }
    return spec;
}

// Code k such that T_k <= x < T_{k+1}, with T_0 = -inf and T_L = +inf;
// inputs beyond the transition span saturate to the end codes.
inline int quantize(double x, const QuantizerSpec& spec) noexcept {
    const auto& t = spec.transitions;
    return static_cast<int>(std::upper_bound(t.begin(), t.end(), x) - t.begin());
}

inline double output_level(const QuantizerSpec& spec, int code) {
    return spec.output_levels.at(static_cast<std::size_t>(code));
}

// Perturb every transition by an independent uniform draw in
// (-half_width*step, +half_width*step). If the perturbed levels are not
// strictly increasing the whole vector is redrawn from a derived seed, up to
// 100 attempts; the draw is deterministic for a given profile seed.
inline QuantizerSpec apply_inl(const QuantizerSpec& spec, const InlProfile& profile) {
    detail::validate_spec(spec);
    if (!(profile.half_width >= 0.0)) {
        throw std::invalid_argument("apply_inl: half_width must be nonnegative");
    }
    if (profile.kind == InlKind::none || profile.half_width == 0.0) {
        return spec;
    }

    const double bound = profile.half_width * spec.step;
    for (int attempt = 0; attempt < 100; ++attempt) {
        SplitMix64 rng(derive_stream(profile.seed, static_cast<std::uint64_t>(attempt), 0));
        QuantizerSpec out = spec;
        for (double& t : out.transitions) {
            t += (2.0 * rng.next_uniform() - 1.0) * bound;
        }
        const bool strictly_increasing =
            std::adjacent_find(out.transitions.begin(), out.transitions.end(),
                               [](double a, double b) { return a >= b; }) ==
            out.transitions.end();
        if (strictly_increasing) {
            return out;
        }
    }
    throw std::runtime_error("apply_inl: could not keep transitions monotone within 100 redraws");
}

// --- transition-level CSV ---------------------------------------------------
//
// Format: optional "# levels=<L>" and "# step=<delta>" metadata lines, then
// the header "index,transition_volts" and one row per transition, index
// running 1..L-1 in ascending order. Values carry 17 significant digits so a
// save/load round trip reproduces the spec exactly. Files without metadata
// are accepted; the step is then inferred from the mean transition spacing.

inline void save_transitions(const QuantizerSpec& spec, const std::filesystem::path& path) {
    detail::validate_spec(spec);
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("save_transitions: cannot open " + path.string());
    }
    char buf[64];
    out << "# levels=" << spec.level_count << "\n";
    std::snprintf(buf, sizeof buf, "%.17g", spec.step);
    out << "# step=" << buf << "\n";
    out << "index,transition_volts\n";
    for (std::size_t i = 0; i < spec.transitions.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", spec.transitions[i]);
        out << (i + 1) << "," << buf << "\n";
    }
    if (!out) {
        throw std::runtime_error("save_transitions: write failed for " + path.string());
    }
}

inline QuantizerSpec load_transitions(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("load_transitions: cannot open " + path.string());
    }

    long declared_levels = -1;
    double declared_step = 0.0;
    bool have_step = false;

    std::string line;
    std::size_t line_no = 0;
    auto fail = [&](const std::string& what) {
        throw std::runtime_error("load_transitions: " + what + " at line " +
                                 std::to_string(line_no) + " of " + path.string());
    };

    // metadata and header
    bool saw_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line.front() == '#') {
            const auto eq = line.find('=');
            if (eq != std::string::npos) {
                std::string key = line.substr(1, eq - 1);
                key.erase(0, key.find_first_not_of(" \t"));
                key.erase(key.find_last_not_of(" \t") + 1);
                const std::string value = line.substr(eq + 1);
                if (key == "levels") {
                    declared_levels = std::stol(value);
                } else if (key == "step") {
                    declared_step = std::stod(value);
                    have_step = true;
                }
            }
            continue;
        }
        if (line == "index,transition_volts") {
            saw_header = true;
            break;
        }
        fail("expected header 'index,transition_volts'");
    }
    if (!saw_header) fail("missing header");

    std::vector<double> transitions;
    long expected_index = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) fail("malformed row, expected 'index,value'");
        long idx = 0;
        auto rc = std::from_chars(line.data(), line.data() + comma, idx);
        if (rc.ec != std::errc{} || rc.ptr != line.data() + comma) fail("malformed index");
        if (idx != expected_index) fail("index must run 1..L-1 without gaps");
        double value = 0.0;
        const char* vbeg = line.data() + comma + 1;
        const char* vend = line.data() + line.size();
        auto vc = std::from_chars(vbeg, vend, value);
        if (vc.ec != std::errc{} || vc.ptr != vend) fail("malformed transition value");
        if (!transitions.empty() && !(transitions.back() < value)) {
            fail("transition levels must be strictly increasing");
        }
        transitions.push_back(value);
        ++expected_index;
    }

    if (transitions.empty()) {
        throw std::runtime_error("load_transitions: no transition rows in " + path.string());
    }
    const long level_count = static_cast<long>(transitions.size()) + 1;
    if (declared_levels >= 0 && declared_levels != level_count) {
        throw std::runtime_error("load_transitions: row count " +
                                 std::to_string(transitions.size()) + " does not match declared L-1 = " +
                                 std::to_string(declared_levels - 1) + " in " + path.string());
    }
    if (level_count % 2 != 0) {
        throw std::runtime_error("load_transitions: level count must be even, got " +
                                 std::to_string(level_count));
    }
    if (!have_step) {
        if (level_count == 2) {
            throw std::runtime_error(
                "load_transitions: 2-level file needs a '# step=' metadata line");
        }
        declared_step = (transitions.back() - transitions.front()) /
                        static_cast<double>(level_count - 2);
    }
    if (!(declared_step > 0.0)) {
        throw std::runtime_error("load_transitions: nonpositive step in " + path.string());
    }

    QuantizerSpec spec;
    spec.level_count = static_cast<int>(level_count);
    spec.step = declared_step;
    spec.transitions = std::move(transitions);
    spec.output_levels = detail::uniform_output_levels(spec.level_count, spec.step);
    detail::validate_spec(spec);
    return spec;
}

} // namespace qblue
