// Acceptance gate: every release-blocking behavior in one binary, one
// PASS/FAIL line per criterion, nonzero exit if anything fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "levystop/cli.hpp"
#include "levystop/montecarlo.hpp"
#include "levystop/solver.hpp"
#include "levystop/solver_driver.hpp"

using namespace levystop;

#ifndef LEVYSTOP_REPO_ROOT
#define LEVYSTOP_REPO_ROOT "."
#endif

namespace {

const std::string kRoot = LEVYSTOP_REPO_ROOT;
int failures = 0;

void report(int idx, const std::string& name, bool ok, const std::string& detail) {
    std::printf("%s  %2d. %s%s%s\n", ok ? "PASS" : "FAIL", idx, name.c_str(),
                detail.empty() ? "" : " -- ", detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

void run(int idx, const std::string& name,
         const std::function<std::pair<bool, std::string>()>& fn) {
    try {
        const auto [ok, detail] = fn();
        report(idx, name, ok, detail);
    } catch (const std::exception& e) {
        report(idx, name, false, std::string("exception: ") + e.what());
    }
}

LevyModel base_model() {
    LevyModel m;
    m.drift = 1.2;
    m.jumps = {{1.0, 1.5}};
    return m;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

// hump payoff held constant left of b (the candidate "stop from b on" payoff)
RewardFunction hump_flattened_at(double b) {
    std::vector<Piece> ps;
    ps.push_back({-kInf, b, b, ExpPoly({{1.0 - b * b, 0, 0.0}})});
    ps.push_back({b, 1.0, 0.0, ExpPoly({{1.0, 0, 0.0}, {-1.0, 2, 0.0}})});
    ps.push_back({1.0, kInf, 1.0, ExpPoly()});
    return RewardFunction(PiecewiseExpPoly(std::move(ps)), "hump-flat");
}

double kappa_hump_closed(double a) {
    const double c = 1.2, lam = 1.0, mu = 1.5;
    return (c - lam / mu) * (1.0 - a * a) -
           2.0 * lam / (mu * mu * mu) * (std::exp(-mu * a) + mu * a - 1.0);
}

double mckean_threshold(const LevyModel& m, double q) {
    const double p = phi(m, q);
    return std::log(8.0 * (q / p) * (p - 1.0) / (q - psi(m, 1.0)));
}

// ---- criteria ----

std::pair<bool, std::string> put_boundaries_via_cli() {
    const auto t0 = std::chrono::steady_clock::now();
    const std::string out_path = "/tmp/levystop_acceptance_solution.json";
    const std::string spec = kRoot + "/specs/twosided.spec";
    const char* argv[] = {"levystop", "solve", "--spec", spec.c_str(),
                          "--out", out_path.c_str()};

    std::ostringstream sink;
    std::streambuf* old = std::cout.rdbuf(sink.rdbuf());
    const int code = cli_main(6, argv);
    std::cout.rdbuf(old);
    const double secs = seconds_since(t0);

    std::ifstream in(out_path);
    nlohmann::json j;
    in >> j;
    const auto b = j.at("boundaries").get<std::vector<double>>();
    bool ok = code == 0 && b.size() == 3 && secs < 10.0;
    const double want[3] = {1.5986, 3.7229, 5.8136};
    for (std::size_t i = 0; ok && i < 3; ++i) ok = std::abs(b[i] - want[i]) <= 1e-3;
    return {ok, "boundaries (" + fmt(b[0]) + ", " + fmt(b[1]) + ", " + fmt(b[2]) +
                    "), exit " + std::to_string(code) + ", " + fmt(secs) + " s"};
}

std::pair<bool, std::string> hump_interval_and_kappa() {
    const auto t0 = std::chrono::steady_clock::now();
    const Solution sol = run_procedure(base_model(), make_hump(), 0.0);
    const double secs = seconds_since(t0);
    if (sol.gamma.size() != 1) return {false, "expected a single stopping interval"};
    const double lo = sol.gamma[0].lo, astar = sol.gamma[0].hi;
    const double k = kappa_hump_closed(astar);
    const bool ok = std::abs(lo) <= 1e-3 && std::abs(astar - 0.7260) <= 1e-3 &&
                    std::abs(k) <= 1e-8 && secs < 5.0;
    return {ok, "interval [" + fmt(lo) + ", " + fmt(astar) + "], closed-form kappa " +
                    fmt(k) + ", " + fmt(secs) + " s"};
}

std::pair<bool, std::string> mckean_closed_forms() {
    const LevyModel m = base_model();
    const RewardFunction g = make_mckean(8.0);
    double worst_a = 0.0, worst_v = 0.0;
    for (double q : {0.05, 0.1, 0.5}) {
        const Solution sol = run_procedure(m, g, q);
        const double astar = mckean_threshold(m, q);
        worst_a = std::max(worst_a, std::abs(sol.boundaries.back() - astar));
        const ScaleEvaluator sc = build_scale(m, q);
        for (double dx = -3.0; dx <= 8.0; dx += 0.25) {
            const double x = astar + dx;
            const double want =
                8.0 * sc.Z(x - astar) - std::exp(astar) * sc.Z2(x - astar, 1.0);
            worst_v = std::max(worst_v, std::abs(sol.value.eval(x) - want));
        }
    }
    const bool ok = worst_a <= 1e-8 && worst_v <= 1e-8;
    return {ok, "max threshold error " + fmt(worst_a) + ", max value error " + fmt(worst_v)};
}

std::pair<bool, std::string> laplace_transform_identity() {
    std::mt19937 rng(2027);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        LevyModel m;
        const int n = 1 + static_cast<int>(U(rng) * 3.0);
        double mass = 0.0;
        double decay = 0.3 + 2.0 * U(rng);
        for (int i = 0; i < n; ++i) {
            const double rate = 0.2 + 2.0 * U(rng);
            m.jumps.push_back({rate, decay});
            mass += rate / decay;
            decay += 0.5 + 2.0 * U(rng);
        }
        m.sigma = (trial % 2 == 0) ? 0.0 : 0.3 + U(rng);
        m.drift = mass + 0.2 + U(rng);
        for (double q : {0.0, 0.1, 1.0}) {
            const ScaleEvaluator s = build_scale(m, q);
            const double phiq = s.phi_q();
            for (double beta :
                 {phiq + 0.05, phiq + 0.3, phiq + 1.0, phiq + 3.7, phiq + 11.0}) {
                double lhs = 0.0;
                for (std::size_t j = 0; j < s.roots().size(); ++j)
                    lhs += s.coefficients()[j] / (beta - s.roots()[j]);
                const double rhs = 1.0 / (psi(m, beta) - q);
                worst = std::max(worst, std::abs(lhs - rhs) / std::abs(rhs));
            }
        }
    }
    return {worst <= 1e-10, "10 random models, max relative error " + fmt(worst)};
}

std::pair<bool, std::string> exit_simulation_identities() {
    const auto t0 = std::chrono::steady_clock::now();
    const LevyModel m = base_model();
    MCConfig cfg;
    cfg.paths = 1000000;
    cfg.seed = 910;
    const double triples[5][3] = {
        {1.0, 3.0, 0.0}, {1.0, 3.0, 0.5}, {0.5, 2.0, 0.1}, {2.0, 4.0, 0.05},
        {1.5, 2.5, 1.0}};
    double worst_z = 0.0;
    for (const auto& t : triples) {
        const FluctuationCheck chk = validate_fluctuation(m, t[2], t[0], t[1], cfg);
        worst_z = std::max({worst_z, std::abs(chk.up_z), std::abs(chk.down_z)});
    }
    const double secs = seconds_since(t0);
    const bool ok = worst_z < 4.0 && secs < 60.0;
    return {ok, "5 exit problems at 1e6 paths, max |z| " + fmt(worst_z) + ", " +
                    fmt(secs) + " s"};
}

std::pair<bool, std::string> fit_residual_necessity() {
    const LevyModel m = base_model();
    const ScaleEvaluator sc = build_scale(m, 0.0);
    double worst_pass = 0.0;   // residual / threshold over all optimum boundaries
    double worst_fail = kInf;  // residual / threshold over all perturbed boundaries
    auto score_pass = [&](const std::vector<FitResidual>& rs) {
        for (const auto& r : rs)
            worst_pass = std::max(worst_pass,
                                  r.residual / (r.kind == "continuous" ? 1e-7 : 1e-6));
    };
    auto score_fail = [&](const std::vector<FitResidual>& rs, double x) {
        for (const auto& r : rs)
            if (std::abs(r.x - x) < 1e-9)
                worst_fail = std::min(worst_fail,
                                      r.residual / (r.kind == "continuous" ? 1e-7 : 1e-6));
    };

    // solver outputs at the optimum
    const RewardFunction put_tail = make_put_linear_tail(8.0, 0.4, 1.8);
    const Solution two = run_procedure(m, put_tail, 0.0);
    score_pass(two.fit_residuals);
    const Solution hump = run_procedure(m, make_hump(), 0.0);
    score_pass(hump.fit_residuals);
    for (double q : {0.05, 0.1, 0.5})
        score_pass(run_procedure(m, make_mckean(8.0), q).fit_residuals);

    // two-interval problem: shift each of the three boundaries
    const double a = two.boundaries[0], b = two.boundaries[1], afin = two.boundaries[2];
    for (double d : {0.05, -0.05}) {
        score_fail(fit_residuals(m, compose_value(sc, put_tail, {{a + d, b}}, afin),
                                 put_tail, {{a + d, b}}, afin),
                   a + d);
        score_fail(fit_residuals(m, compose_value(sc, put_tail, {{a, b + d}}, afin),
                                 put_tail, {{a, b + d}}, afin),
                   b + d);
        score_fail(fit_residuals(m, compose_value(sc, put_tail, {{a, b}}, afin + d),
                                 put_tail, {{a, b}}, afin + d),
                   afin + d);
    }

    // hump: shift the flattening point and the threshold
    const double beta = *hump.beta, ah = hump.gamma[0].hi;
    const RewardFunction hump_g = make_hump();
    for (double d : {0.05, -0.05}) {
        const RewardFunction flat_b = hump_flattened_at(beta + d);
        const GerberShiuEvaluator gs_b(sc, flat_b, ah);
        score_fail(fit_residuals(m, gs_b.H_one(), hump_g, {}, ah, beta + d), beta + d);
        const RewardFunction flat_a = hump_flattened_at(beta);
        const GerberShiuEvaluator gs_a(sc, flat_a, ah + d);
        score_fail(fit_residuals(m, gs_a.H_one(), hump_g, {}, ah + d, beta), ah + d);
    }

    // discounted put: shift the single threshold of the tilted problem
    const TiltedProblem tp = tilt(m, make_mckean(8.0), 0.5);
    const ScaleEvaluator sct = build_scale(tp.model, 0.0);
    const double ast = mckean_threshold(m, 0.5);
    for (double d : {0.05, -0.05}) {
        const GerberShiuEvaluator gs(sct, tp.reward, ast + d);
        score_fail(fit_residuals(tp.model, gs.H_one(), tp.reward, {}, ast + d), ast + d);
    }

    const bool ok = worst_pass <= 1.0 && worst_fail > 1.0;
    return {ok, "optimum residuals at " + fmt(worst_pass) +
                    "x threshold, perturbed always above (min " + fmt(worst_fail) + "x)"};
}

std::pair<bool, std::string> majorant_and_harmonicity() {
    const LevyModel m = base_model();
    double min_gap = kInf, worst_cont = 0.0, worst_stop = -kInf;

    auto scan = [&](const Solution& sol, const RewardFunction& g) {
        const auto bp = sol.value.breakpoints();
        const double lo = bp.front() - 4.0, hi = bp.back() + 8.0;
        auto near_boundary = [&](double x) {
            for (double bnd : sol.boundaries)
                if (std::abs(x - bnd) < 5e-3) return true;
            return false;
        };
        auto stopping = [&](double x) {
            for (const auto& iv : sol.gamma)
                if (iv.contains(x)) return true;
            return false;
        };
        for (double x = lo; x <= hi; x += 4e-3) {
            min_gap = std::min(min_gap, sol.value.eval(x) - g.eval(x));
            if (near_boundary(x)) continue;
            const double lv = discounted_generator_apply(m, sol.value, sol.q, x);
            if (stopping(x))
                worst_stop = std::max(worst_stop, lv);
            else
                worst_cont = std::max(worst_cont, std::abs(lv));
        }
    };

    const RewardFunction put_tail = make_put_linear_tail(8.0, 0.4, 1.8);
    scan(run_procedure(m, put_tail, 0.0), put_tail);
    const RewardFunction hump = make_hump();
    scan(run_procedure(m, hump, 0.0), hump);
    const RewardFunction mck = make_mckean(8.0);
    for (double q : {0.05, 0.1, 0.5}) scan(run_procedure(m, mck, q), mck);

    const bool ok = min_gap >= -1e-7 && worst_cont < 1e-5 && worst_stop <= 1e-8;
    return {ok, "min(v - g) " + fmt(min_gap) + ", max |Lv| continuation " +
                    fmt(worst_cont) + ", max Lv stopping " + fmt(worst_stop)};
}

std::pair<bool, std::string> perturbed_rules_never_win() {
    const LevyModel m = base_model();
    MCConfig cfg;
    cfg.paths = 1000000;
    cfg.seed = 1114;
    double min_margin = kInf;  // paired diff + 2 stderr; negative means "beaten"
    std::size_t comparisons = 0;

    auto challenge = [&](const RewardFunction& g, const Solution& sol,
                         const std::vector<std::vector<Interval>>& candidates,
                         const std::vector<double>& starts) {
        for (double x0 : starts) {
            const auto rows = benchmark_thresholds(m, g, 0.0, candidates, x0, cfg);
            for (std::size_t i = 1; i < rows.size(); ++i) {
                min_margin = std::min(min_margin,
                                      rows[i].diff_mean + 2.0 * rows[i].diff_std_error);
                ++comparisons;
            }
        }
    };

    {
        const RewardFunction g = make_put_linear_tail(8.0, 0.4, 1.8);
        const Solution sol = run_procedure(m, g, 0.0);
        std::vector<std::vector<Interval>> cands = {sol.gamma};
        for (double d : {0.05, -0.05, 0.1, -0.1}) {
            auto c = sol.gamma;
            c[0].hi += d;  // lower stopping boundary
            cands.push_back(c);
            c = sol.gamma;
            c[1].lo += d;  // window's upper end
            cands.push_back(c);
        }
        challenge(g, sol, cands, {1.65, 2.0, 2.5, 3.2, 3.8});
    }
    {
        const RewardFunction g = make_hump();
        const Solution sol = run_procedure(m, g, 0.0);
        std::vector<std::vector<Interval>> cands = {sol.gamma};
        for (double d : {0.05, -0.05, 0.1, -0.1}) {
            auto c = sol.gamma;
            c[0].lo += d;
            cands.push_back(c);
            c = sol.gamma;
            c[0].hi += d;
            cands.push_back(c);
        }
        challenge(g, sol, cands, {-0.3, 0.1, 0.4, 0.85, 1.1});
    }

    const bool ok = min_margin >= 0.0;
    return {ok, std::to_string(comparisons) + " paired comparisons at 1e6 paths, min "
                    "margin (diff + 2 se) " + fmt(min_margin)};
}

std::pair<bool, std::string> outer_boundary_collapse() {
    const LevyModel m = base_model();
    const double limit = std::log(8.0 * psi_prime(m, 0.0) / psi(m, 1.0));
    double prev = kInf, worst = 0.0;
    bool monotone = true;
    std::string seq;
    for (double d : {2.0, 2.05, 2.07}) {
        const Solution sol = run_procedure(m, make_put_linear_tail(8.0, 0.4, d), 0.0);
        const double afin = sol.boundaries.back();
        worst = std::max(worst, std::abs(afin - limit));
        monotone = monotone && afin <= prev + 1e-9;
        prev = afin;
        seq += (seq.empty() ? "" : ", ") + fmt(afin);
    }
    const bool ok = monotone && worst <= 1e-3;
    return {ok, "boundaries " + seq + " vs limit " + fmt(limit) + ", max gap " + fmt(worst)};
}

std::pair<bool, std::string> measure_tilt_structure() {
    const LevyModel m = base_model();
    const RewardFunction g = make_put_linear_tail(8.0, 0.4, 1.8);
    double worst_psi = 0.0, worst_gen = 0.0;
    std::mt19937 rng(515);
    std::uniform_real_distribution<double> xs(-3.0, 9.0);
    for (double q : {0.05, 0.5}) {
        const TiltedProblem tp = tilt(m, g, q);
        for (double theta = -0.4; theta <= 8.0; theta += 0.2)
            worst_psi = std::max(worst_psi, std::abs(psi(tp.model, theta) -
                                                     (psi(m, theta + tp.phi_q) - q)));
        for (int i = 0; i < 50; ++i) {
            const double x = xs(rng);
            const double lhs = generator_apply(tp.model, tp.reward, x);
            const double rhs =
                std::exp(-tp.phi_q * x) * discounted_generator_apply(m, g, q, x);
            worst_gen = std::max(worst_gen, std::abs(lhs - rhs));
        }
    }
    const bool ok = worst_psi <= 1e-12 && worst_gen <= 1e-8;
    return {ok, "max exponent gap " + fmt(worst_psi) + ", max generator gap " +
                    fmt(worst_gen)};
}

}  // namespace

int main() {
    run(1, "two-interval put boundaries via the solve command", put_boundaries_via_cli);
    run(2, "hump stopping interval and closed-form kappa root", hump_interval_and_kappa);
    run(3, "discounted put thresholds and values in closed form", mckean_closed_forms);
    run(4, "scale function Laplace transform identity", laplace_transform_identity);
    run(5, "two-sided exit simulation against scale identities", exit_simulation_identities);
    run(6, "fit residuals pass at the optimum, fail when perturbed", fit_residual_necessity);
    run(7, "value majorizes the payoff, harmonic off the stopping set",
        majorant_and_harmonicity);
    run(8, "no perturbed stopping rule beats the solver region", perturbed_rules_never_win);
    run(9, "outer boundary collapses to the pure put threshold", outer_boundary_collapse);
    run(10, "exponent shift and generator link under the measure tilt",
        measure_tilt_structure);

    if (failures > 0) {
        std::printf("%d criterion(s) failed\n", failures);
        return 1;
    }
    std::printf("all criteria passed\n");
    return 0;
}
