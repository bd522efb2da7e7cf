#pragma once

// Optimal stopping solver.  Pipeline: tilt the q-discounted problem to an
// undiscounted one, flatten the payoff left of its rightmost maximiser if
// the maximum is attained, scan the sign of the generator to find the
// subharmonic components, eliminate them left to right by two-sided
// boundary pairs (replacing the payoff by the harmonic bridge after each),
// then fix the final threshold from the zero set of kappa.  The stopping
// region is the complement of the continuation windows found this way.

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "levystop/exp_poly.hpp"
#include "levystop/generator.hpp"
#include "levystop/gerber_shiu.hpp"
#include "levystop/levy_model.hpp"
#include "levystop/measure_change.hpp"
#include "levystop/reward.hpp"
#include "levystop/scale_functions.hpp"

namespace levystop {

struct Interval {
    double lo = -kInf;
    double hi = kInf;
    bool contains(double x) const { return x >= lo && x <= hi; }
};

struct SolverOptions {
    double grid_step = 1e-3;        // base sampling step for sign scans
    double refine_radius = 0.1;     // window around kinks/boundaries ...
    double refine_factor = 10.0;    // ... sampled this much finer
    double coarse_factor = 5.0;     // majorant checks run on a coarser base
    std::optional<double> a_min;    // absolute floor for the Condition (A) search
    double condition_a_step = 10.0; // descent step for the Condition (A) search
    double touch_rel_tol = 1e-6;    // tangency threshold, times (1 + max g)
    double kappa_tol = 1e-10;       // |kappa| at an accepted root
    double bracket_tol = 1e-9;      // root/threshold bracket width
    double newton_tol = 1e-9;       // two-sided system residual
    int newton_max_iter = 100;
    std::optional<std::pair<double, double>> span;  // override scan extent
};

struct ComponentScan {
    std::vector<std::pair<double, double>> components;  // subharmonic (l_i, r_i)
    double l0 = 0.0;                  // generator positive on (l0, +inf)
    double superharmonic_left_bound = 0.0;
    double x_lo = 0.0, x_hi = 0.0;
};

enum class ConditionAVerdict { holds, fails, flattened };

struct FitResidual {
    double x = 0.0;
    std::string kind;   // "continuous" or "smooth"
    double residual = 0.0;
};

enum class Verdict { solved, no_optimal_stopping_time };

struct Solution {
    Verdict verdict = Verdict::solved;
    double q = 0.0;
    double phi_q = 0.0;
    std::optional<double> beta;            // flattening point, if any
    std::vector<Interval> gamma;           // stopping region
    std::vector<double> boundaries;        // finite boundary points, ascending
    PiecewiseExpPoly value;                // value function, original problem
    PiecewiseExpPoly value_tilted;         // value of the tilted (q = 0) problem
    LevyModel model_tilted;
    RewardFunction reward_tilted;          // tilted payoff (unflattened)
    ConditionAVerdict condition_a = ConditionAVerdict::holds;
    std::vector<double> kappa_roots;
    std::vector<FitResidual> fit_residuals;
    double majorant_margin = 0.0;          // min of v - g over the grid
    double max_abs_generator_continuation = 0.0;
    double max_generator_stopping = 0.0;
    int iterations = 0;                    // two-sided windows resolved
    std::vector<std::string> notes;
};

namespace detail {

inline std::vector<double> make_grid(double lo, double hi, double step,
                                     const std::vector<double>& special,
                                     double refine_radius, double refine_factor) {
    std::vector<double> pts;
    const std::size_t n = static_cast<std::size_t>((hi - lo) / step) + 1;
    pts.reserve(n + special.size() * 64);
    for (double x = lo; x < hi; x += step) pts.push_back(x);
    pts.push_back(hi);
    const double fine = step / refine_factor;
    for (double s : special) {
        if (s < lo || s > hi) continue;
        pts.push_back(s);
        for (double x = std::max(lo, s - refine_radius); x <= std::min(hi, s + refine_radius);
             x += fine)
            pts.push_back(x);
    }
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end(),
                          [](double a, double b) { return std::abs(a - b) < 1e-15; }),
              pts.end());
    return pts;
}

}  // namespace detail

// ---- generator sign scan ----

inline ComponentScan scan_components(const LevyModel& m, const RewardFunction& g,
                                     const SolverOptions& opts = {}) {
    auto [span_lo, span_hi] = opts.span ? *opts.span : g.suggested_span(m);
    const std::vector<double> special = g.breakpoints();
    const std::vector<double> grid = detail::make_grid(span_lo, span_hi, opts.grid_step,
                                                       special, opts.refine_radius,
                                                       opts.refine_factor);

    std::vector<double> lg(grid.size());
    double scale_est = 1.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        lg[i] = generator_apply(m, g, grid[i]);
        scale_est = std::max(scale_est, std::abs(lg[i]));
    }
    const double eps = 1e-9 * scale_est;
    auto positive = [&](std::size_t i) { return lg[i] > eps; };

    // refine a sign boundary inside a smooth cell
    auto crossing = [&](double a, double b) {
        double fa = generator_apply(m, g, a);
        for (int it = 0; it < 100; ++it) {
            const double mid = 0.5 * (a + b);
            if (mid == a || mid == b) break;
            const double fm = generator_apply(m, g, mid);
            if ((fa > eps) == (fm > eps)) { a = mid; fa = fm; } else { b = mid; }
        }
        return 0.5 * (a + b);
    };

    auto is_breakpoint = [&](double x) {
        for (double s : special)
            if (std::abs(x - s) < 1e-12) return true;
        return false;
    };

    std::vector<std::pair<double, double>> runs;
    std::size_t i = 0;
    while (i < grid.size()) {
        if (!positive(i)) { ++i; continue; }
        // start of a positive run: locate the left edge
        double l;
        if (i == 0) l = grid[0];
        else if (is_breakpoint(grid[i])) l = grid[i];
        else l = crossing(grid[i - 1], grid[i]);
        std::size_t k = i;
        while (k + 1 < grid.size() && positive(k + 1)) ++k;
        double r;
        if (k + 1 >= grid.size()) r = grid.back();
        else if (is_breakpoint(grid[k + 1])) r = grid[k + 1];
        else r = crossing(grid[k + 1], grid[k]);
        runs.emplace_back(l, r);
        i = k + 1;
    }

    if (runs.empty())
        throw std::runtime_error(
            "scan_components: generator never positive; payoff has no active region "
            "in the scanned span");

    ComponentScan scan;
    scan.x_lo = span_lo;
    scan.x_hi = span_hi;

    // beyond the last positive run the generator must stay nonnegative up to
    // threshold noise (it decays to 0+ when the payoff tail vanishes)
    for (std::size_t k = grid.size(); k-- > 0 && grid[k] > runs.back().second;) {
        if (lg[k] < -eps)
            throw std::runtime_error(
                "scan_components: generator genuinely negative beyond the last positive "
                "run; payoff outside the supported class or span too narrow");
    }
    scan.l0 = runs.back().first;
    runs.pop_back();

    // reject the degenerate corner at l0 (payoff folds downward there)
    if (is_breakpoint(scan.l0) &&
        g.deriv(scan.l0, Side::right) < g.deriv(scan.l0, Side::left) - 1e-12)
        throw std::runtime_error(
            "scan_components: downward kink at the last sign change; problem outside "
            "the supported class");

    // merge runs separated by less than a base cell (bisection jitter)
    for (const auto& run : runs) {
        if (!scan.components.empty() &&
            run.first - scan.components.back().second < opts.grid_step * 0.5)
            scan.components.back().second = run.second;
        else
            scan.components.push_back(run);
    }

    // kinks folding upward are singleton components when paths have
    // unbounded variation (the second derivative spikes there)
    if (m.sigma > 0.0) {
        for (double p : g.kinks()) {
            if (p >= scan.l0 || p <= span_lo) continue;
            if (g.deriv(p, Side::right) <= g.deriv(p, Side::left) + 1e-12) continue;
            bool inside = false;
            for (const auto& c : scan.components)
                if (p >= c.first - 1e-12 && p <= c.second + 1e-12) inside = true;
            if (!inside) scan.components.push_back({p, p});
        }
        std::sort(scan.components.begin(), scan.components.end());
    }

    scan.superharmonic_left_bound =
        scan.components.empty() ? scan.l0 : scan.components.front().first;
    return scan;
}

// ---- majorant testing ----

namespace detail {

struct MajorantCheck {
    bool ok = false;
    double min_gap = kInf;
    double argmin = 0.0;
};

// Does h_a lie above g on (a, x_hi]?  kappa(a) >= 0 is also required so the
// tail (beyond the grid) cannot dip under g.  Points within 1e-9 of a are
// skipped: the gap vanishes at a by construction and round-off there is pure
// noise.  gap_floor should be a small negative number scaled to the payoff.
inline MajorantCheck majorizes(const ScaleEvaluator& scale, const RewardFunction& g,
                               double a, const std::vector<double>& pts,
                               double kappa_tol, double gap_floor) {
    MajorantCheck out;
    if (kappa(scale, g, a) < -kappa_tol) return out;
    GerberShiuEvaluator gs(scale, g, a);
    out.min_gap = kInf;
    for (double x : pts) {
        if (x <= a + 1e-9) continue;
        const double gap = gs.h(x) - g.eval(x);
        if (gap < out.min_gap) { out.min_gap = gap; out.argmin = x; }
        if (gap < gap_floor) return out;  // early reject, min_gap already recorded
    }
    out.ok = out.min_gap >= gap_floor;
    return out;
}

inline double abs_scale(const RewardFunction& g, const std::vector<double>& pts) {
    double s = 1.0;
    for (double x : pts) s = std::max(s, std::abs(g.eval(x)));
    return s;
}

}  // namespace detail

// ---- Condition (A) ----

struct ConditionAResult {
    ConditionAVerdict verdict = ConditionAVerdict::fails;
    double witness = 0.0;  // an a with h_a > g on (a, inf), when holds
};

// Try increasingly negative thresholds a until h_a majorises g.  The gap
// h_a - g is monotone in a on the superharmonic region, so the first
// success certifies every smaller a as well.
inline ConditionAResult check_condition_A(const ScaleEvaluator& scale,
                                          const RewardFunction& g,
                                          const ComponentScan& scan,
                                          const SolverOptions& opts = {}) {
    const double a0 = scan.superharmonic_left_bound;
    const double floor = opts.a_min ? *opts.a_min : a0 - 200.0;
    std::vector<double> pts = detail::make_grid(
        std::min(floor, scan.x_lo), scan.x_hi, opts.grid_step * opts.coarse_factor,
        g.breakpoints(), opts.refine_radius, opts.refine_factor);

    std::vector<double> candidates;
    for (double a = a0 - opts.condition_a_step; a > floor; a -= opts.condition_a_step)
        candidates.push_back(a);
    candidates.push_back(floor);

    const double gap_floor = -1e-12 * detail::abs_scale(g, pts);
    for (double a : candidates) {
        const auto chk = detail::majorizes(scale, g, a, pts, opts.kappa_tol, gap_floor);
        if (chk.ok) return {ConditionAVerdict::holds, a};
    }
    return {ConditionAVerdict::fails, floor};
}

// ---- one-sided threshold from the zero set of kappa ----

struct OneSidedResult {
    double a_star = 0.0;
    std::vector<double> roots;  // all sign-change roots of kappa found
};

namespace detail {

// Roots of kappa(a) on [lo, hi], bracketing between kinks (kappa only jumps
// there, and only downward).
inline std::vector<double> kappa_roots_on(const ScaleEvaluator& scale,
                                          const RewardFunction& g, double lo, double hi,
                                          double step, double kappa_tol) {
    std::vector<double> pts = make_grid(lo, hi, step, g.kinks(), 0.1, 10.0);
    std::vector<double> roots;
    double px = pts.front(), pk = kappa(scale, g, px);
    for (std::size_t i = 1; i < pts.size(); ++i) {
        const double x = pts[i];
        const double k = kappa(scale, g, x);
        if ((pk > 0.0) != (k > 0.0)) {
            double a = px, b = x, fa = pk;
            for (int it = 0; it < 200; ++it) {
                const double mid = 0.5 * (a + b);
                if (mid == a || mid == b) break;
                const double fm = kappa(scale, g, mid);
                if ((fa > 0.0) == (fm > 0.0)) { a = mid; fa = fm; } else { b = mid; }
            }
            const double root = 0.5 * (a + b);
            // a sign flip across a kink is a jump, not a root; keep only
            // genuine zeros
            if (std::abs(kappa(scale, g, root)) <= std::max(kappa_tol, 1e-7 * std::abs(pk - k)))
                roots.push_back(root);
        }
        px = x;
        pk = k;
    }
    return roots;
}

}  // namespace detail

inline OneSidedResult solve_one_sided(const ScaleEvaluator& scale, const RewardFunction& g,
                                      double lo_bound, const ComponentScan& scan,
                                      const SolverOptions& opts = {}) {
    std::vector<double> pts = detail::make_grid(
        lo_bound, scan.x_hi, opts.grid_step * opts.coarse_factor, g.breakpoints(),
        opts.refine_radius, opts.refine_factor);
    // kappa vanishes at the accepted root, so the majorant touches g at the
    // far end of the grid to within round-off; allow that much slack
    const double gmax_tol = -1e-9 * detail::abs_scale(g, pts);

    OneSidedResult out;
    out.roots = detail::kappa_roots_on(scale, g, lo_bound, scan.l0,
                                       opts.grid_step, opts.kappa_tol);
    if (out.roots.empty())
        throw std::runtime_error(
            "solve_one_sided: no zero of kappa found in the search interval");

    double lo_search = lo_bound;
    for (int attempt = 0; attempt < 3; ++attempt) {
        if (out.roots.empty()) break;
        const double a = out.roots.back();
        const auto chk = detail::majorizes(scale, g, a, pts, opts.kappa_tol, gmax_tol);
        if (chk.ok) {
            out.a_star = a;
            return out;
        }
        // by theory another zero lies to the right of a failed candidate;
        // re-scan with a finer step
        lo_search = a + opts.bracket_tol;
        auto finer = detail::kappa_roots_on(scale, g, lo_search, scan.l0,
                                            opts.grid_step / 100.0, opts.kappa_tol);
        out.roots = std::move(finer);
    }
    throw std::runtime_error(
        "solve_one_sided: no zero of kappa yields a majorant of the payoff");
}

// ---- two-sided windows ----

struct TwoSidedResult {
    bool is_window = false;  // false: degenerated to a one-sided threshold
    double a = 0.0;
    double b = 0.0;          // meaningful when is_window
    double newton_residual = 0.0;
};

inline TwoSidedResult solve_two_sided(const ScaleEvaluator& scale, const RewardFunction& g,
                                      double l, double r, double a_seed,
                                      const ComponentScan& scan,
                                      const SolverOptions& opts = {}) {
    // kink-ordering guard: the procedure requires the lower boundary to sit
    // right of every payoff kink below the component
    double p_m = -kInf;
    for (double p : g.kinks())
        if (p < l - 1e-12) p_m = std::max(p_m, p);

    const auto full_pts = detail::make_grid(std::min(a_seed, scan.x_lo), scan.x_hi,
                                            opts.grid_step, g.breakpoints(),
                                            opts.refine_radius, opts.refine_factor);
    double gmax = 0.0;
    for (double x : full_pts) gmax = std::max(gmax, g.eval(x));
    const double touch_tol = opts.touch_rel_tol * (1.0 + gmax);
    const double gap_floor = -1e-12 * detail::abs_scale(g, full_pts);

    const auto coarse_pts = detail::make_grid(std::min(a_seed, scan.x_lo), scan.x_hi,
                                              opts.grid_step * opts.coarse_factor,
                                              g.breakpoints(), opts.refine_radius,
                                              opts.refine_factor);

    auto P = [&](double a, const std::vector<double>& pts) {
        return detail::majorizes(scale, g, a, pts, opts.kappa_tol, gap_floor);
    };

    double lo = a_seed, hi = l;
    {
        auto c = P(lo, coarse_pts);
        int guard = 0;
        while (!c.ok && ++guard < 50) {  // walk down if the seed is not low enough
            lo -= opts.condition_a_step;
            c = P(lo, coarse_pts);
        }
        if (!c.ok)
            throw std::runtime_error("solve_two_sided: no majorising threshold below the "
                                     "component");
        if (P(hi, coarse_pts).ok)
            throw std::runtime_error("solve_two_sided: payoff already dominated at the "
                                     "component edge; spurious component");
    }
    while (hi - lo > opts.bracket_tol) {
        const double mid = 0.5 * (lo + hi);
        if (P(mid, coarse_pts).ok) lo = mid; else hi = mid;
    }

    // confirm on the fine grid; if the fine grid finds a dip the coarse one
    // missed, back off until it clears
    auto fine = P(lo, full_pts);
    int guard = 0;
    while (!fine.ok && ++guard < 60) {
        hi = lo;
        lo -= std::max(opts.bracket_tol * 16.0, (hi - lo));
        fine = P(lo, full_pts);
    }
    if (!fine.ok)
        throw std::runtime_error("solve_two_sided: threshold bisection failed to "
                                 "stabilise on the fine grid");

    TwoSidedResult out;

    // tangency search right of the component's left edge
    GerberShiuEvaluator gs_lo(scale, g, lo);
    double best_gap = kInf, best_x = 0.0;
    for (double x : full_pts) {
        if (x <= l) continue;
        const double gap = gs_lo.h(x) - g.eval(x);
        if (gap < best_gap) { best_gap = gap; best_x = x; }
    }

    // If kappa already vanishes at the threshold, h decays to zero on the
    // right and any sub-tolerance gap out there is h itself, not a tangency.
    // A genuine window keeps kappa strictly positive (h tends to a positive
    // multiple of the scale function, which is bounded below on the far
    // right), so the tangency must sit at a finite point on the payoff.
    const bool kappa_vanished = std::abs(gs_lo.kappa()) <= touch_tol;

    if (kappa_vanished || best_gap > touch_tol) {
        // no tangency: the threshold itself is optimal (kappa vanishes there)
        out.is_window = false;
        auto roots = detail::kappa_roots_on(scale, g, lo - 1e-3, std::min(hi + 1e-3, scan.l0),
                                            opts.grid_step / 10.0, opts.kappa_tol);
        out.a = roots.empty() ? lo : roots.back();
        if (!(out.a > p_m))
            throw std::runtime_error("solve_two_sided: threshold fell at or below a payoff "
                                     "kink; assumptions violated");
        return out;
    }

    // Newton on (h_a(b) - g(b), h_a'(b) - g'(b)) seeded at the bisection
    // threshold and the largest near-touch
    {
        // prefer the rightmost local minimum under the touch tolerance
        double seed_b = best_x;
        for (std::size_t i = full_pts.size(); i-- > 1;) {
            const double x = full_pts[i - 1];
            if (x <= l) break;
            const double gap = gs_lo.h(x) - g.eval(x);
            if (gap < touch_tol) { seed_b = x; break; }
        }
        double a = lo, b = seed_b;
        auto F = [&](double aa, double bb, double& f1, double& f2) {
            GerberShiuEvaluator gs(scale, g, aa);
            f1 = gs.h(bb) - g.eval(bb);
            f2 = gs.h_deriv(bb, Side::right) - g.deriv(bb, Side::right);
        };
        double f1, f2;
        F(a, b, f1, f2);
        double res = std::max(std::abs(f1), std::abs(f2));
        for (int it = 0; it < opts.newton_max_iter && res > opts.newton_tol; ++it) {
            const double da = 1e-7 * (1.0 + std::abs(a));
            const double db = 1e-7 * (1.0 + std::abs(b));
            double f1a, f2a, f1b, f2b;
            F(a + da, b, f1a, f2a);
            F(a, b + db, f1b, f2b);
            const double j11 = (f1a - f1) / da, j12 = (f1b - f1) / db;
            const double j21 = (f2a - f2) / da, j22 = (f2b - f2) / db;
            const double det = j11 * j22 - j12 * j21;
            if (det == 0.0 || !std::isfinite(det)) break;
            double sa = (-f1 * j22 + f2 * j12) / det;
            double sb = (-f2 * j11 + f1 * j21) / det;
            double lambda = 1.0;
            bool improved = false;
            for (int halve = 0; halve < 30; ++halve, lambda *= 0.5) {
                const double na = a + lambda * sa, nb = b + lambda * sb;
                if (!(nb > l) || !(na < nb)) continue;
                double n1, n2;
                F(na, nb, n1, n2);
                const double nres = std::max(std::abs(n1), std::abs(n2));
                if (nres < res) {
                    a = na; b = nb; f1 = n1; f2 = n2; res = nres;
                    improved = true;
                    break;
                }
            }
            if (!improved) break;  // at the round-off floor
        }
        if (!(res <= opts.newton_tol))
            throw std::runtime_error(
                "solve_two_sided: tangency refinement did not converge (residual " +
                std::to_string(res) + ")");
        out.is_window = true;
        out.a = a;
        out.b = b;
        out.newton_residual = res;
    }

    if (!(out.a > p_m))
        throw std::runtime_error("solve_two_sided: lower boundary fell at or below a "
                                 "payoff kink; assumptions violated");

    // maximality: no further tangency beyond b
    {
        GerberShiuEvaluator gs(scale, g, out.a);
        for (double x : full_pts) {
            if (x <= out.b + 0.05) continue;
            const double gap = gs.h(x) - g.eval(x);
            if (gap < -touch_tol)
                throw std::runtime_error(
                    "solve_two_sided: harmonic bridge dips under the payoff beyond the "
                    "upper boundary; tangency not maximal");
        }
    }
    return out;
}

// ---- candidate assembly (used both by the driver and by validation) ----

// Expected reward of the stopping rule "stop on first entry into the
// complement of the given continuation windows": windows (a_i, b_i) must be
// disjoint and ascending; the final window is (a_fin, +inf).  Returns the
// value function of that (not necessarily optimal) rule for the q = 0
// problem described by `scale` and `g`.
inline PiecewiseExpPoly compose_value(const ScaleEvaluator& scale, const RewardFunction& g,
                                      const std::vector<std::pair<double, double>>& windows,
                                      double a_fin) {
    RewardFunction cur = g;
    for (const auto& [a, b] : windows) {
        GerberShiuEvaluator gs(scale, cur, a);
        // off-optimum candidates are genuinely discontinuous at a, so skip
        // the continuity validation on intermediate iterates
        cur = RewardFunction(gs.H_two(b), cur.name(), kInf);
    }
    GerberShiuEvaluator gs(scale, cur, a_fin);
    return gs.H_one();
}

}  // namespace levystop

#include "levystop/solver_driver.hpp"
