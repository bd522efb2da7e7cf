#pragma once

// Reward functions g for the stopping problem: nonnegative continuous
// piecewise exp-polynomials with g(x) -> 0 as x -> +inf.  Provides the
// built-in payoffs, left-flattening at the rightmost global maximiser, and
// the jump-part integral of the generator.

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "levystop/exp_poly.hpp"
#include "levystop/levy_model.hpp"

namespace levystop {

class RewardFunction {
public:
    RewardFunction() = default;

    explicit RewardFunction(PiecewiseExpPoly f, std::string name = "custom",
                            double continuity_tol = 1e-9)
        : f_(std::move(f)), name_(std::move(name)) {
        if (f_.max_jump() > continuity_tol)
            throw std::invalid_argument("reward: pieces are discontinuous");
        const double tail = f_.limit_at_plus_inf();
        if (!(std::abs(tail) <= 1e-12))
            throw std::invalid_argument(
                "reward: must vanish at +inf (subtract the limit from the payoff first)");
        rebuild_kinks();
    }

    const PiecewiseExpPoly& piecewise() const { return f_; }
    const std::string& name() const { return name_; }

    double eval(double x) const { return f_.eval(x); }
    double deriv(double x, Side s) const { return f_.deriv(x, s); }
    double second_deriv(double x, Side s) const { return f_.second_deriv(x, s); }

    // Breakpoints where the one-sided derivatives genuinely differ.
    const std::vector<double>& kinks() const { return kinks_; }

    // All piece boundaries (kinks or not); useful for grids and quadrature.
    std::vector<double> breakpoints() const { return f_.breakpoints(); }

    // e^(-mu x) int_{-inf}^x g(w) e^(mu w) dw
    double exp_weighted_left_integral(double mu, double x) const {
        return f_.exp_weighted_left_integral(mu, x);
    }

    // Scan extent suggestion: [min break - 30/mu_min, max break + 50], and
    // [-30/mu_min, 50] for kink-free rewards.
    std::pair<double, double> suggested_span(const LevyModel& m) const {
        double lo = 0.0, hi = 0.0;
        const auto bp = f_.breakpoints();
        if (!bp.empty()) { lo = bp.front(); hi = bp.back(); }
        return {lo - 30.0 / m.min_decay(), hi + 50.0};
    }

    // Divergence guard: the jump integral against e^(decay * y) must converge
    // on the leftmost piece.
    void check_model_compat(const LevyModel& m) const {
        for (const auto& t : f_.pieces().front().poly.terms())
            for (const auto& j : m.jumps)
                if (!(t.rate + j.decay > 0.0))
                    throw std::domain_error(
                        "reward: exponential growth at -inf too fast for jump decay " +
                        std::to_string(j.decay));
    }

private:
    void rebuild_kinks() {
        kinks_.clear();
        for (double b : f_.breakpoints()) {
            const double dl = f_.deriv(b, Side::left);
            const double dr = f_.deriv(b, Side::right);
            if (std::abs(dr - dl) > 1e-12 * std::max({1.0, std::abs(dl), std::abs(dr)}))
                kinks_.push_back(b);
        }
    }

    PiecewiseExpPoly f_;
    std::string name_ = "zero";
    std::vector<double> kinks_;
};

// ---- built-in payoffs ----

// (K - e^x)+ : exercise value of a perpetual put in log-price coordinates.
inline RewardFunction make_mckean(double K) {
    if (!(K > 0.0)) throw std::invalid_argument("mckean: K must be > 0");
    const double lk = std::log(K);
    std::vector<Piece> ps;
    ps.push_back({-kInf, lk, lk, ExpPoly({{K, 0, 0.0}, {-K, 0, 1.0}})});
    ps.push_back({lk, kInf, lk, ExpPoly()});
    return RewardFunction(PiecewiseExpPoly(std::move(ps)), "mckean");
}

// Put payoff capped by a linear tail:
//   K - e^x for x <= d, then max(K - e^d - l (x - d), 0).
// Requires d < log K so the put part is still in the money at the switch.
inline RewardFunction make_put_linear_tail(double K, double l, double d) {
    if (!(K > 0.0) || !(l > 0.0)) throw std::invalid_argument("put_linear_tail: K, l > 0");
    if (!(d < std::log(K)))
        throw std::invalid_argument("put_linear_tail: requires d < log K");
    const double gd = K - std::exp(d);
    const double x2 = d + gd / l;
    std::vector<Piece> ps;
    ps.push_back({-kInf, d, d, ExpPoly({{K, 0, 0.0}, {-std::exp(d), 0, 1.0}})});
    ps.push_back({d, x2, d, ExpPoly({{gd, 0, 0.0}, {-l, 1, 0.0}})});
    ps.push_back({x2, kInf, x2, ExpPoly()});
    return RewardFunction(PiecewiseExpPoly(std::move(ps)), "put_linear_tail");
}

// max(1 - x^2, 0): a smooth hump attaining its maximum at 0.
inline RewardFunction make_hump() {
    std::vector<Piece> ps;
    ps.push_back({-kInf, -1.0, -1.0, ExpPoly()});
    ps.push_back({-1.0, 1.0, 0.0, ExpPoly({{1.0, 0, 0.0}, {-1.0, 2, 0.0}})});
    ps.push_back({1.0, kInf, 1.0, ExpPoly()});
    return RewardFunction(PiecewiseExpPoly(std::move(ps)), "hump");
}

// ---- flattening ----

struct FlattenResult {
    std::optional<double> beta;  // rightmost global maximiser, if attained
    RewardFunction flattened;    // g itself when beta is absent
};

namespace detail {

// Largest maximiser of one piece over [lo, hi] (finite), via derivative sign
// scan refined by bisection; returns {argmax, max}.
inline std::pair<double, double> piece_argmax(const Piece& p, double lo, double hi) {
    const ExpPoly d = p.poly.derivative();
    auto val = [&](double x) { return p.poly.eval(x - p.x0); };
    auto dval = [&](double x) { return d.eval(x - p.x0); };
    double best_x = hi, best_v = val(hi);
    auto consider = [&](double x, double v) {
        if (v > best_v + 1e-15 * std::max(1.0, std::abs(best_v)) ||
            (std::abs(v - best_v) <= 1e-12 * std::max(1.0, std::abs(best_v)) && x > best_x)) {
            best_x = x;
            best_v = v;
        }
    };
    consider(lo, val(lo));
    const int n = 512;
    double prev_x = lo, prev_d = dval(lo);
    for (int i = 1; i <= n; ++i) {
        const double x = lo + (hi - lo) * i / n;
        const double dx = dval(x);
        if ((prev_d > 0.0 && dx <= 0.0) || (prev_d < 0.0 && dx >= 0.0)) {
            double a = prev_x, b = x, fa = prev_d;
            for (int it = 0; it < 100; ++it) {
                const double mid = 0.5 * (a + b);
                const double fm = dval(mid);
                if ((fa > 0.0) == (fm > 0.0)) { a = mid; fa = fm; } else { b = mid; }
            }
            const double xc = 0.5 * (a + b);
            consider(xc, val(xc));
        }
        prev_x = x;
        prev_d = dx;
    }
    return {best_x, best_v};
}

}  // namespace detail

// Locate the rightmost global maximiser beta of g.  If the supremum is
// attained, return the flattened payoff equal to g(beta) on (-inf, beta]
// and g elsewhere; otherwise return g unchanged.
inline FlattenResult flatten_left(const RewardFunction& g) {
    const auto& pieces = g.piecewise().pieces();
    // Supremum over the unbounded left tail: finite only when every term
    // dies out or is constant as x -> -inf.
    double left_limit = 0.0;
    bool left_unbounded = false;
    double min_pos_rate = kInf;
    for (const auto& t : pieces.front().poly.terms()) {
        if (t.rate < 0.0 || (t.rate == 0.0 && t.power > 0)) left_unbounded = true;
        if (t.rate == 0.0 && t.power == 0) left_limit += t.coef;
        if (t.rate > 0.0) min_pos_rate = std::min(min_pos_rate, t.rate);
    }
    if (left_unbounded) return {std::nullopt, g};

    // Span needed so exponential transients are resolved in the tail pieces.
    auto tail_span = [](double r) { return std::min(200.0, 60.0 / std::max(r, 0.3)); };

    double best_x = -kInf, best_v = -kInf;
    double left_edge = -kInf;  // artificial truncation point of the left tail
    auto better = [&](double x, double v) {
        const double tol = 1e-12 * std::max(1.0, std::abs(best_v));
        return v > best_v + tol || (std::abs(v - best_v) <= tol && x > best_x);
    };
    for (const auto& p : pieces) {
        double lo = p.lo, hi = p.hi;
        if (std::isinf(lo)) {
            lo = hi - (std::isfinite(min_pos_rate) ? tail_span(min_pos_rate) : 1.0);
            left_edge = lo;
        }
        if (std::isinf(hi)) {
            double max_neg = 0.0;
            for (const auto& t : p.poly.terms()) max_neg = std::min(max_neg, t.rate);
            hi = lo + (max_neg < 0.0 ? tail_span(-max_neg) : 1.0);
        }
        if (!(lo < hi)) continue;
        auto [x, v] = detail::piece_argmax(p, lo, hi);
        if (better(x, v)) { best_x = x; best_v = v; }
    }

    const double tol = 1e-12 * std::max(1.0, std::abs(best_v));
    if (left_limit > best_v + tol) return {std::nullopt, g};  // sup only at -inf
    // argmax on the truncation edge means the payoff keeps climbing toward
    // its left limit: the sup is approached, never attained
    if (best_x == left_edge) return {std::nullopt, g};

    const double beta = best_x;
    if (!std::isfinite(beta)) return {std::nullopt, g};
    PiecewiseExpPoly flat = g.piecewise();
    flat.patch(-kInf, beta, {{-kInf, beta, beta, ExpPoly::constant(best_v)}});
    return {beta, RewardFunction(std::move(flat), g.name() + "^")};
}

// ---- jump integral ----

// int_(-inf,0) ( f(x+y) - f(x) ) Pi(dy)
//   = sum_i rate_i [ decay_i e^(-decay_i x) int_{-inf}^x f(w) e^(decay_i w) dw - f(x) ]
inline double pi_integral(const LevyModel& m, const PiecewiseExpPoly& f, double x) {
    double total = 0.0;
    const double fx = f.eval(x);
    for (const auto& j : m.jumps)
        total += j.rate * (j.decay * f.exp_weighted_left_integral(j.decay, x) - fx);
    return total;
}

inline double pi_integral(const LevyModel& m, const RewardFunction& g, double x) {
    return pi_integral(m, g.piecewise(), x);
}

}  // namespace levystop
