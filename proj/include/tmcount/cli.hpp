// cli.hpp: the tmcount command line (gen-anderson, count, exponents, check).
//
// Exit codes: 0 ok, 1 completed with warnings or failed checks, 2 usage,
// 3 parse / validation failure, 4 numerical failure.

#pragma once

#include "tmcount/anderson.hpp"
#include "tmcount/counting.hpp"
#include "tmcount/system_io.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>

namespace tmcount::cli {

enum ExitCode : int { kOk = 0, kWarning = 1, kUsage = 2, kInvalid = 3, kNumerical = 4 };

// "re" or "re,im" in the C locale.
inline cplx parse_energy(const std::string& text) {
    auto number = [&](const std::string& s) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(s, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != s.size()) throw CLI::ValidationError("--energy", "expected RE[,IM], got '" + text + "'");
        return v;
    };
    const auto comma = text.find(',');
    if (comma == std::string::npos) return {number(text), 0.0};
    return {number(text.substr(0, comma)), number(text.substr(comma + 1))};
}

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::vector<double> xi_grid(double lo, double hi, int steps) {
    if (steps < 1) throw CLI::ValidationError("--xi-steps", "must be at least 1");
    if (steps > 1 && !(hi > lo)) throw CLI::ValidationError("--xi-max", "must exceed --xi-min");
    std::vector<double> g(static_cast<std::size_t>(steps));
    for (int i = 0; i < steps; ++i) g[static_cast<std::size_t>(i)] = steps == 1 ? lo : lo + (hi - lo) * i / (steps - 1);
    return g;
}

inline const char* flag_name(const CountingSample& s) {
    if (s.flags.spectrum_collision) return "spectrum_collision";
    if (s.flags.overflow_guard) return "overflow_guard";
    if (s.flags.near_eigenvalue) return "near_eigenvalue";
    return "ok";
}

// Writes to `path`, or to `out` when the path is empty.
inline void emit(const std::string& path, std::ostream& out, const std::string& text) {
    if (path.empty()) {
        out << text;
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f || !(f << text)) throw Error("cannot write " + path);
}

struct Options {
    std::string system, output, energy = "0", method;
    double xi_min = -2.0, xi_max = 2.0;
    int xi_steps = 81, nphi = 64;
    bool have_xi_min = false, have_xi_max = false;
    // gen-anderson
    long long wx = 1, wy = 1, length = 80;
    double disorder = 0.0;
    std::uint64_t seed = 0;
};

// ------------------------------------------------------------- subcommands

inline int cmd_gen_anderson(const Options& o, std::ostream&, std::ostream& err) {
    AndersonConfig cfg;
    cfg.wx = o.wx;
    cfg.wy = o.wy;
    cfg.length = o.length;
    cfg.disorder_w = o.disorder;
    cfg.seed = o.seed;
    try {
        check_config(cfg);
    } catch (const std::invalid_argument& e) {
        err << "gen-anderson: " << e.what() << '\n';
        return kUsage;
    }
    save_system(generate(cfg), o.output, anderson_meta(cfg));
    return kOk;
}

inline int cmd_count(const Options& o, std::ostream& out, std::ostream& err) {
    const BlockTridiagonalSystem sys = load_system(o.system);
    const cplx energy = parse_energy(o.energy);
    const auto grid = xi_grid(o.xi_min, o.xi_max, o.xi_steps);
    QuadratureSpec quad;
    quad.n_phi = o.nphi;
    quad.max_n_phi = std::max(o.nphi, 1024);
    const auto method = o.method == "corner" ? CountingMethod::corner : CountingMethod::balanced;
    const auto rows = counting_sweep(sys, energy, grid, quad, method);
    std::string csv = "xi,re_raw,im_raw,count,n_phi,flag\n";
    int good = 0;
    for (const auto& s : rows) {
        const bool failed = s.flags.spectrum_collision || s.flags.overflow_guard;
        good += !failed;
        if (failed) err << "count: xi = " << fmt(s.xi) << ": " << s.error << '\n';
        csv += fmt(s.xi) + ',' + fmt(s.raw.real()) + ',' + fmt(s.raw.imag()) + ',' + std::to_string(s.count) + ',' +
               std::to_string(failed ? o.nphi : s.n_phi) + ',' + flag_name(s) + '\n';
    }
    emit(o.output, out, csv);
    if (!rows.empty() && good == 0) return kNumerical;
    return kOk;
}

inline std::pair<double, double> bracket_for(const BlockTridiagonalSystem& sys, cplx energy, const Options& o) {
    const double bound = exponent_bound(sys, energy) + 0.1;
    return {o.have_xi_min ? o.xi_min : -bound, o.have_xi_max ? o.xi_max : bound};
}

inline int cmd_exponents(const Options& o, std::ostream& out, std::ostream& err) {
    const BlockTridiagonalSystem sys = load_system(o.system);
    const cplx energy = parse_energy(o.energy);
    std::string csv = "index,xi,method\n";
    int code = kOk;
    ExponentSet ex;
    if (o.method == "bisect") {
        const auto [lo, hi] = bracket_for(sys, energy, o);
        QuadratureSpec quad;
        quad.n_phi = o.nphi;
        ex = locate_exponents(sys, energy, quad, lo, hi);
    } else {
        ex = stable_exponents(sys, energy);
    }
    for (std::size_t i = 0; i < ex.xs.size(); ++i) csv += std::to_string(i) + ',' + fmt(ex.xs[i]) + ',' + o.method + '\n';
    if (!ex.reliable) {
        csv += "-1,nan,warning:unreliable\n";
        err << "exponents: direct exponents are unreliable (spread too large); use --method bisect\n";
        code = kWarning;
    }
    emit(o.output, out, csv);
    return code;
}

// ------------------------------------------------------------------ check

struct CheckLine {
    std::string name;
    double residual;
    double tolerance;
    bool pass;
    std::string note;
};

inline int cmd_check(const Options& o, std::ostream& out, std::ostream&) {
    const BlockTridiagonalSystem sys = load_system(o.system);
    const cplx energy = parse_energy(o.energy);
    const double n = static_cast<double>(sys.n());
    const CornerBlocks g = resolvent_corners_open(sys, energy);  // E on the spectrum of h: exit 4
    std::vector<CheckLine> lines;
    auto add = [&](std::string name, double r, double tol, std::string note = {}) {
        lines.push_back({std::move(name), r, tol, r < tol, std::move(note)});
    };
    auto skip = [&](std::string name, std::string why) { lines.push_back({std::move(name), 0.0, 0.0, true, "skipped: " + why}); };

    // Fixed probe points on and off the unit circle.
    const double radii[] = {0.6, 1.0, 1.7};
    const double angles[] = {0.3, 1.9, 4.1};
    double dual = 0.0, sim = 0.0, rot = 0.0;
    for (double r : radii) {
        for (double a : angles) {
            const cplx z = std::polar(r, a);
            dual = std::max(dual, duality_residual(sys, energy, z));
            if (n * std::abs(std::log(r)) <= 30.0) sim = std::max(sim, similarity_transform_check(sys, z));
            rot = std::max(rot, rotation_covariance_check(sys, z));
        }
    }
    add("duality", dual, 1e-8);
    add("similarity", sim, 1e-10);
    add("rotation", rot, 1e-10);

    const ExponentSet direct = stable_exponents(sys, energy);
    const double sum_rule = total_exponent_sum(sys);
    if (direct.reliable) {
        add("total_sum", std::abs(direct.sum() - sum_rule), 1e-8);
    } else {
        skip("total_sum", "direct exponents unreliable");
    }

    // Sample points well away from every exponent.
    const auto [lo, hi] = bracket_for(sys, energy, o);
    std::vector<double> probes;
    if (direct.reliable) {
        std::vector<double> edges = direct.xs;
        edges.insert(edges.begin(), lo);
        edges.push_back(hi);
        for (std::size_t i = 0; i + 1 < edges.size() && probes.size() < 10; ++i) {
            if (edges[i + 1] - edges[i] > 0.1) probes.push_back(0.5 * (edges[i] + edges[i + 1]));
        }
    }
    if (!probes.empty()) {
        QuadratureSpec q256;
        q256.n_phi = 256;
        q256.max_n_phi = 256;
        int mismatches = 0;
        double quant = 0.0, imag = 0.0;
        for (double xi : probes) {
            const CountingSample s = counting_function(sys, energy, xi, q256);
            mismatches += s.count != direct_count(direct, xi);
            quant = std::max(quant, s.residual);
            imag = std::max(imag, std::abs(2.0 * static_cast<double>(sys.m()) * s.raw.imag()));
        }
        add("count_vs_direct", static_cast<double>(mismatches), 0.5, std::to_string(probes.size()) + " points");
        add("quantization", quant, 1e-4);
        add("imaginary_part", imag, 1e-6);
    } else {
        skip("count_vs_direct", "direct exponents unreliable or too close together");
    }

    double path = 0.0;
    int path_points = 0;
    for (double xi : {-0.5, 0.0, 0.4}) {
        if (n * std::abs(xi) > 20.0) continue;
        for (double phi : {0.1, 0.7}) {
            try {
                const cplx b = counting_integrand(sys, energy, xi, phi / n);
                const cplx c = corner_integrand(sys, g, xi, phi / n);
                path = std::max(path, std::abs(b - c) / std::max(1.0, std::abs(b)));
                ++path_points;
            } catch (const SpectrumCollision&) {
                // a probe that lands on the spectrum says nothing about the paths
            }
        }
    }
    if (path_points > 0) add("path_equivalence", path, 1e-8); else skip("path_equivalence", "no usable probe");

    const ExponentSet ex = direct.reliable ? direct : locate_exponents(sys, energy, {}, lo, hi);
    double jensen = 0.0;
    for (double xi : {0.0, 0.5 * hi}) {
        const JensenSides js = jensen_relation(sys, energy, xi, ex, 512);
        jensen = std::max(jensen, std::abs(js.lhs - js.rhs));
    }
    add("jensen", jensen, 1e-4);

    bool all = true;
    for (const auto& l : lines) {
        all = all && l.pass;
        char buf[160];
        if (l.note.rfind("skipped", 0) == 0) {
            std::snprintf(buf, sizeof buf, "%-18s %s\n", l.name.c_str(), l.note.c_str());
        } else {
            std::snprintf(buf, sizeof buf, "%-18s %.3e  < %.0e  %s%s%s\n", l.name.c_str(), l.residual, l.tolerance,
                          l.pass ? "PASS" : "FAIL", l.note.empty() ? "" : "  ", l.note.c_str());
        }
        out << buf;
    }
    return all ? kOk : kWarning;
}

// ------------------------------------------------------------------- main

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Exponents of block-tridiagonal transfer matrices and their counting function"};
    app.name("tmcount");
    app.require_subcommand(1);
    app.failure_message(CLI::FailureMessage::help);
    Options o;

    auto system_opts = [&](CLI::App* c) {
        c->add_option("--system", o.system, "system JSON file")->required();
        c->add_option("--energy", o.energy, "energy RE[,IM]")->default_val("0");
        c->add_option("--nphi", o.nphi, "angles per period")->default_val(64)->check(CLI::Range(4, 1 << 20));
        c->add_option("-o,--output", o.output, "output file (default stdout)");
    };

    auto* gen = app.add_subcommand("gen-anderson", "write an Anderson bar system file");
    gen->add_option("--wx", o.wx, "slice width")->default_val(1)->check(CLI::PositiveNumber);
    gen->add_option("--wy", o.wy, "slice height")->default_val(1)->check(CLI::PositiveNumber);
    gen->add_option("--length", o.length, "number of slices n")->default_val(80)->check(CLI::Range(3LL, 1LL << 40));
    gen->add_option("--disorder", o.disorder, "disorder width w")->default_val(0.0)->check(CLI::NonNegativeNumber);
    gen->add_option("--seed", o.seed, "random seed")->default_val(0);
    gen->add_option("-o,--output", o.output, "output file")->required();

    auto* count = app.add_subcommand("count", "counting function sweep as CSV");
    system_opts(count);
    count->add_option("--xi-min", o.xi_min, "first grid point")->default_val(-2.0);
    count->add_option("--xi-max", o.xi_max, "last grid point")->default_val(2.0);
    count->add_option("--xi-steps", o.xi_steps, "number of grid points")->default_val(81);
    count->add_option("--method", o.method, "balanced or corner")->default_val("balanced")->check(CLI::IsMember({"balanced", "corner"}));

    auto* exps = app.add_subcommand("exponents", "list the exponents as CSV");
    system_opts(exps);
    exps->add_option("--method", o.method, "direct or bisect")->default_val("direct")->check(CLI::IsMember({"direct", "bisect"}));
    auto* emin = exps->add_option("--xi-min", o.xi_min, "bisection bracket low end");
    auto* emax = exps->add_option("--xi-max", o.xi_max, "bisection bracket high end");

    auto* check = app.add_subcommand("check", "run the identity checks");
    system_opts(check);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success) ? code : kUsage;
    }
    o.have_xi_min = emin->count() > 0;
    o.have_xi_max = emax->count() > 0;

    try {
        if (gen->parsed()) return cmd_gen_anderson(o, out, err);
        if (count->parsed()) return cmd_count(o, out, err);
        if (exps->parsed()) return cmd_exponents(o, out, err);
        return cmd_check(o, out, err);
    } catch (const CLI::ValidationError& e) {
        err << e.what() << '\n';
        return kUsage;
    } catch (const ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kInvalid;
    } catch (const ValidationError& e) {
        err << "error: invalid system: " << e.what() << '\n';
        return kInvalid;
    } catch (const SpectrumCollision& e) {
        err << "error: E on spectrum: " << e.what() << '\n';
        return kNumerical;
    } catch (const NumericalError& e) {
        err << "error: numerical failure: " << e.what() << '\n';
        return kNumerical;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kNumerical;
    }
}

}  // namespace tmcount::cli
