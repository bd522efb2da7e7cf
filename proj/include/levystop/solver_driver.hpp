#pragma once

// Top-level driver tying the stages together, plus the boundary-fit
// diagnostics shared with the validation tooling.  Include via solver.hpp.

#include "levystop/solver.hpp"

namespace levystop {

// Boundary-fit residuals of a candidate value function v against the payoff
// g for the given continuation windows.  At a lower boundary the fit is
// continuous (paths of bounded variation) or smooth (unbounded variation);
// at an upper boundary it is always smooth.
inline std::vector<FitResidual> fit_residuals(const LevyModel& m, const PiecewiseExpPoly& v,
                                              const RewardFunction& g,
                                              const std::vector<std::pair<double, double>>& windows,
                                              double a_fin,
                                              std::optional<double> beta = std::nullopt) {
    const bool bv = m.bounded_variation();
    std::vector<FitResidual> out;
    auto lower = [&](double a) {
        if (bv)
            out.push_back({a, "continuous", std::abs(v.eval_side(a, Side::right) - g.eval(a))});
        else
            out.push_back({a, "smooth",
                           std::abs(v.deriv(a, Side::right) - g.deriv(a, Side::left))});
    };
    if (beta)
        out.push_back({*beta, "smooth",
                       std::abs(v.deriv(*beta, Side::left) - g.deriv(*beta, Side::left))});
    for (const auto& [a, b] : windows) {
        lower(a);
        out.push_back({b, "smooth",
                       std::abs(v.deriv(b, Side::left) - g.deriv(b, Side::right))});
    }
    lower(a_fin);
    return out;
}

inline Solution run_procedure(const LevyModel& model, const RewardFunction& reward, double q,
                              SolverOptions opts = {}) {
    model.validate();
    reward.check_model_compat(model);
    if (q < 0.0) throw std::invalid_argument("run_procedure: q must be nonnegative");

    Solution sol;
    sol.q = q;

    TiltedProblem tp = tilt(model, reward, q);
    sol.phi_q = tp.phi_q;
    sol.model_tilted = tp.model;
    sol.reward_tilted = tp.reward;
    const ScaleEvaluator scale = build_scale(tp.model, 0.0);

    FlattenResult flat = flatten_left(tp.reward);
    sol.beta = flat.beta;
    RewardFunction cur = flat.flattened;
    if (flat.beta)
        sol.notes.push_back("payoff flattened left of its rightmost maximiser");

    ComponentScan scan = scan_components(tp.model, cur, opts);
    {
        // a payoff that is never favourable to collect has no stopping problem
        double gmax = -kInf;
        for (double x = scan.x_lo; x <= scan.x_hi; x += 64.0 * opts.grid_step)
            gmax = std::max(gmax, cur.eval(x));
        if (!(gmax > 0.0))
            throw std::runtime_error("run_procedure: payoff never positive in the scanned "
                                     "span; stopping is never favourable");
    }

    double a_seed;
    if (flat.beta) {
        sol.condition_a = ConditionAVerdict::flattened;
        a_seed = *flat.beta;
    } else {
        const ConditionAResult ca = check_condition_A(scale, cur, scan, opts);
        sol.condition_a = ca.verdict;
        if (ca.verdict == ConditionAVerdict::fails) {
            sol.verdict = Verdict::no_optimal_stopping_time;
            sol.notes.push_back(
                "no threshold down to the search floor majorises the payoff; the candidate "
                "regions shrink to -inf and no optimal stopping time exists");
            return sol;
        }
        a_seed = ca.witness;
    }

    const std::size_t n0 = scan.components.size();
    std::vector<std::pair<double, double>> windows;
    std::optional<double> a_fin;

    for (std::size_t pass = 0; pass <= n0; ++pass) {
        if (scan.components.empty()) break;
        const auto [l, r] = scan.components.front();
        const TwoSidedResult ts = solve_two_sided(scale, cur, l, r, a_seed, scan, opts);
        if (!ts.is_window) {
            a_fin = ts.a;
            sol.kappa_roots.push_back(ts.a);
            sol.notes.push_back("component at (" + std::to_string(l) + ", " +
                                std::to_string(r) +
                                ") absorbed into the final continuation region");
            break;
        }
        windows.emplace_back(ts.a, ts.b);
        ++sol.iterations;
        GerberShiuEvaluator gs(scale, cur, ts.a);
        cur = RewardFunction(gs.H_two(ts.b), cur.name(), 1e-7);
        a_seed = ts.b;
        scan = scan_components(tp.model, cur, opts);
        if (!scan.components.empty() && scan.components.front().first < ts.b - 1e-6)
            throw std::runtime_error("run_procedure: rescan found a component left of the "
                                     "last resolved window");
        if (pass == n0 && !scan.components.empty())
            throw std::runtime_error("run_procedure: component elimination did not "
                                     "terminate within the initial component count");
    }

    if (!a_fin) {
        const double lo_bound = windows.empty() ? a_seed : windows.back().second;
        const OneSidedResult os = solve_one_sided(scale, cur, lo_bound, scan, opts);
        a_fin = os.a_star;
        sol.kappa_roots = os.roots;
    }

    {
        GerberShiuEvaluator gs(scale, cur, *a_fin);
        sol.value_tilted = gs.H_one();
    }
    sol.value = untilt_value(tp, sol.value_tilted);

    // stopping region
    const double left_end = flat.beta ? *flat.beta : -kInf;
    double prev = left_end;
    for (const auto& [a, b] : windows) {
        if (!(a >= prev))
            throw std::runtime_error("run_procedure: boundaries out of order");
        sol.gamma.push_back({prev, a});
        sol.boundaries.push_back(a);
        sol.boundaries.push_back(b);
        prev = b;
    }
    if (!(*a_fin >= prev))
        throw std::runtime_error("run_procedure: boundaries out of order");
    sol.gamma.push_back({prev, *a_fin});
    sol.boundaries.push_back(*a_fin);
    if (flat.beta) sol.boundaries.insert(sol.boundaries.begin(), *flat.beta);

    // diagnostics: boundary fit, majorisation, harmonicity
    sol.fit_residuals =
        fit_residuals(tp.model, sol.value_tilted, tp.reward, windows, *a_fin, flat.beta);

    const auto grid = detail::make_grid(scan.x_lo, scan.x_hi, opts.grid_step,
                                        sol.value_tilted.breakpoints(), opts.refine_radius,
                                        opts.refine_factor);
    sol.majorant_margin = kInf;
    for (double x : grid)
        sol.majorant_margin =
            std::min(sol.majorant_margin, sol.value_tilted.eval(x) - tp.reward.eval(x));

    const double margin = 2.0 * opts.grid_step;
    auto continuation_scan = [&](double lo, double hi) {
        if (hi == -kInf || lo == kInf) return;  // empty gap next to an infinite interval
        if (!std::isfinite(lo)) lo = scan.x_lo;
        if (!std::isfinite(hi)) hi = scan.x_hi;
        for (double x = lo + margin; x < hi - margin; x += opts.grid_step * opts.coarse_factor)
            sol.max_abs_generator_continuation =
                std::max(sol.max_abs_generator_continuation,
                         std::abs(generator_apply(tp.model, sol.value_tilted, x)));
    };
    double c_lo = -kInf;
    for (const auto& iv : sol.gamma) {
        continuation_scan(c_lo, iv.lo);
        c_lo = iv.hi;
    }
    continuation_scan(c_lo, kInf);
    sol.max_generator_stopping = -kInf;
    for (const auto& iv : sol.gamma) {
        const double lo = std::isfinite(iv.lo) ? iv.lo : scan.x_lo;
        for (double x = lo + margin; x < iv.hi - margin;
             x += opts.grid_step * opts.coarse_factor)
            sol.max_generator_stopping =
                std::max(sol.max_generator_stopping,
                         generator_apply(tp.model, sol.value_tilted, x));
    }
    if (sol.max_generator_stopping == -kInf) sol.max_generator_stopping = 0.0;
    return sol;
}

}  // namespace levystop
