#pragma once

// Command line front end.  All logic lives here so tests can drive the exact
// subcommand paths in-process and assert on exit codes.
//
// Exit codes: 0 success, 1 usage or runtime error, 2 solver concluded that
// no optimal stopping time exists.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "levystop/io.hpp"
#include "levystop/montecarlo.hpp"
#include "levystop/problem_spec.hpp"
#include "levystop/solver.hpp"

namespace levystop {

namespace detail {

struct GridRange {
    double lo = 0.0, hi = 0.0, step = 0.0;
};

inline GridRange parse_grid_range(const std::string& s) {
    GridRange r;
    char c1 = 0, c2 = 0;
    std::istringstream in(s);
    if (!(in >> r.lo >> c1 >> r.hi >> c2 >> r.step) || c1 != ':' || c2 != ':' ||
        !(r.step > 0.0) || !(r.hi > r.lo))
        throw std::invalid_argument("expected lo:hi:step with step > 0, got '" + s + "'");
    return r;
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);  // binary: CSV line endings are explicit
    if (!out) throw std::runtime_error("cannot open output file: " + path);
    return out;
}

inline GridRange default_grid(const std::vector<double>& breakpoints) {
    GridRange r;
    if (breakpoints.empty()) { r.lo = -10.0; r.hi = 10.0; }
    else { r.lo = breakpoints.front() - 5.0; r.hi = breakpoints.back() + 10.0; }
    r.step = 0.01;
    return r;
}

inline void print_solution_summary(std::ostream& out, const Solution& sol) {
    if (sol.verdict == Verdict::no_optimal_stopping_time) {
        out << "verdict: no optimal stopping time (candidate thresholds recede to -inf)\n";
        return;
    }
    out << "verdict: solved\n";
    out << "stopping region:";
    for (const auto& iv : sol.gamma) {
        out << " [";
        if (std::isfinite(iv.lo)) out << iv.lo; else out << "-inf";
        out << ", " << iv.hi << "]";
    }
    out << "\n";
    if (sol.beta) out << "payoff flattened left of " << *sol.beta << "\n";
    out << "two-sided windows resolved: " << sol.iterations << "\n";
}

}  // namespace detail

inline int cli_main(int argc, const char* const* argv) {
    CLI::App app{"Optimal stopping of spectrally negative Levy processes with "
                 "hyperexponential jumps"};
    app.require_subcommand(1);

    std::string spec_path, out_path, grid_path, range_str;
    double x0 = 0.0, level = 5.0, a_point = 0.0, q_override = -1.0;
    std::size_t paths = 0;
    long long seed = -1;
    int threads = -1;

    auto add_spec = [&](CLI::App* cmd) {
        cmd->add_option("--spec", spec_path, "problem description file (JSON)")
            ->required()
            ->check(CLI::ExistingFile);
    };

    CLI::App* solve = app.add_subcommand("solve", "compute the optimal stopping region");
    add_spec(solve);
    solve->add_option("--out", out_path, "write solution JSON here");
    solve->add_option("--grid", grid_path, "write a value/payoff/generator CSV here");
    solve->add_option("--grid-range", range_str, "CSV grid as lo:hi:step");

    CLI::App* validate =
        app.add_subcommand("validate", "check two-sided exit identities by simulation");
    add_spec(validate);
    CLI::Option* opt_x0_v = validate->add_option("--x0", x0, "start point (default: level/2)");
    validate->add_option("--level", level, "upper exit level");
    validate->add_option("--paths", paths, "number of paths");
    validate->add_option("--seed", seed, "RNG seed");
    validate->add_option("--threads", threads, "worker threads (0 = all)");

    CLI::App* simulate =
        app.add_subcommand("simulate", "solve, then estimate the value at x0 by simulation");
    add_spec(simulate);
    CLI::Option* opt_x0_s = simulate->add_option("--x0", x0, "start point");
    simulate->add_option("--paths", paths, "number of paths");
    simulate->add_option("--seed", seed, "RNG seed");
    simulate->add_option("--threads", threads, "worker threads (0 = all)");

    CLI::App* scale_cmd = app.add_subcommand("scale-table", "tabulate W, W' and Z");
    add_spec(scale_cmd);
    scale_cmd->add_option("--out", out_path, "output CSV (default: stdout)");
    scale_cmd->add_option("--range", range_str, "grid as lo:hi:step");
    scale_cmd->add_option("--q", q_override, "discount rate override");

    CLI::App* gs_cmd = app.add_subcommand(
        "gerber-shiu", "tabulate the harmonic extension h_a and its driver J_a");
    add_spec(gs_cmd);
    gs_cmd->add_option("-a,--threshold", a_point, "lower threshold a")->required();
    gs_cmd->add_option("--out", out_path, "output CSV (default: stdout)");
    gs_cmd->add_option("--range", range_str, "grid as lo:hi:step");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;  // normalize parser errors to the documented contract
    }

    try {
        ProblemSpec spec = load_spec(spec_path);
        if (paths > 0) spec.mc.paths = paths;
        if (seed >= 0) spec.mc.seed = static_cast<std::uint64_t>(seed);
        if (threads >= 0) spec.mc.threads = threads;

        if (solve->parsed()) {
            const Solution sol = run_procedure(spec.model, spec.reward, spec.q, spec.solver);
            detail::print_solution_summary(std::cout, sol);
            if (!out_path.empty()) {
                auto out = detail::open_out(out_path);
                write_solution_json(out, sol);
            }
            if (sol.verdict == Verdict::no_optimal_stopping_time) return 2;
            if (!grid_path.empty()) {
                const detail::GridRange r = range_str.empty()
                                                ? detail::default_grid(sol.value.breakpoints())
                                                : detail::parse_grid_range(range_str);
                auto out = detail::open_out(grid_path);
                write_value_grid_csv(out, spec.model, spec.reward, sol, r.lo, r.hi, r.step);
            }
            return 0;
        }

        if (validate->parsed()) {
            const double start = opt_x0_v->count() ? x0 : 0.5 * level;
            const FluctuationCheck chk =
                validate_fluctuation(spec.model, spec.q, start, level, spec.mc);
            std::cout << "exit of [0, " << level << "] from " << start << ", "
                      << chk.paths << " paths\n";
            std::cout << "up:   estimate " << chk.up_estimate << "  exact " << chk.up_exact
                      << "  z " << chk.up_z << "\n";
            std::cout << "down: estimate " << chk.down_estimate << "  exact "
                      << chk.down_exact << "  z " << chk.down_z << "\n";
            const bool ok = std::abs(chk.up_z) < 4.0 && std::abs(chk.down_z) < 4.0;
            std::cout << (ok ? "identities consistent\n" : "identities VIOLATED\n");
            return ok ? 0 : 1;
        }

        if (simulate->parsed()) {
            const Solution sol = run_procedure(spec.model, spec.reward, spec.q, spec.solver);
            detail::print_solution_summary(std::cout, sol);
            if (sol.verdict == Verdict::no_optimal_stopping_time) return 2;
            double start;
            if (opt_x0_s->count()) start = x0;
            else if (spec.x0) start = *spec.x0;
            else start = sol.boundaries.back() + 1.0;
            const StoppedSummary mc =
                simulate_stopped(spec.model, spec.reward, spec.q, sol.gamma, start, spec.mc);
            const double analytic = sol.value.eval(start);
            const double z = (mc.estimate - analytic) / std::max(mc.std_error, 1e-300);
            std::cout << "value at " << start << ": analytic " << analytic << ", simulated "
                      << mc.estimate << " +/- " << mc.std_error << " (z = " << z << ", "
                      << mc.paths << " paths, " << mc.timeouts << " timeouts)\n";
            return 0;
        }

        if (scale_cmd->parsed()) {
            const double q = q_override >= 0.0 ? q_override : spec.q;
            const ScaleEvaluator scale = build_scale(spec.model, q);
            const detail::GridRange r = range_str.empty()
                                            ? detail::GridRange{-1.0, 10.0, 0.01}
                                            : detail::parse_grid_range(range_str);
            if (out_path.empty()) {
                write_scale_table_csv(std::cout, scale, r.lo, r.hi, r.step);
            } else {
                auto out = detail::open_out(out_path);
                write_scale_table_csv(out, scale, r.lo, r.hi, r.step);
            }
            return 0;
        }

        if (gs_cmd->parsed()) {
            const TiltedProblem tp = tilt(spec.model, spec.reward, spec.q);
            const ScaleEvaluator scale = build_scale(tp.model, 0.0);
            const GerberShiuEvaluator gs(scale, tp.reward, a_point);
            std::cout << "kappa(" << a_point << ") = " << gs.kappa()
                      << "  (tilted problem, phi_q = " << tp.phi_q << ")\n";
            const detail::GridRange r =
                range_str.empty()
                    ? detail::GridRange{a_point, a_point + 10.0, 0.01}
                    : detail::parse_grid_range(range_str);
            auto write = [&](std::ostream& out) {
                out << "x,h,g,J\r\n";
                char buf[40];
                auto fmt = [&buf](double v) {
                    std::snprintf(buf, sizeof buf, "%.17g", v);
                    return std::string(buf);
                };
                for (double xx = r.lo; xx <= r.hi + 0.5 * r.step; xx += r.step) {
                    const double jv = xx >= a_point ? gs.J(xx - a_point) : 0.0;
                    out << fmt(xx) << ',' << fmt(gs.h(xx)) << ',' << fmt(tp.reward.eval(xx))
                        << ',' << fmt(jv) << "\r\n";
                }
            };
            if (out_path.empty()) {
                write(std::cout);
            } else {
                auto out = detail::open_out(out_path);
                write(out);
            }
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

}  // namespace levystop
