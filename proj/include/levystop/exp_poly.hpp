#pragma once

// Exponential-polynomial algebra: finite sums of c * u^p * e^(r*u) and
// piecewise functions built from them.  Everything downstream (scale
// functions, Gerber-Shiu kernels, rewards, value functions) lives in this
// class, which is closed under differentiation, integration, convolution
// with exponentials, and exponential tilting.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace levystop {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Side { left, right };

// One term c * u^p * e^(r*u).
struct ExpTerm {
    double coef = 0.0;
    int power = 0;       // p >= 0
    double rate = 0.0;   // r
};

namespace detail {

inline double factorial(int n) {
    static const double table[] = {1, 1, 2, 6, 24, 120, 720, 5040, 40320, 362880};
    if (n < 0 || n >= static_cast<int>(sizeof(table) / sizeof(table[0])))
        throw std::invalid_argument("factorial: power out of supported range");
    return table[n];
}

inline double binom(int n, int k) {
    return factorial(n) / (factorial(k) * factorial(n - k));
}

// Integral of u^p e^(s u) over [0, L], L >= 0.
//
// For small |s*L| the closed form (e^(sL)-1)/s and its recursion lose all
// accuracy to cancellation, so a power series in s is used there; the
// series terms shrink by a factor |sL|/j and the cutoff |sL| <= 1 keeps
// truncation error below 1e-18 with ~25 terms.
inline double int_power_exp(int p, double s, double L) {
    if (L == 0.0) return 0.0;
    if (L < 0.0) throw std::invalid_argument("int_power_exp: negative length");
    const double sL = s * L;
    if (std::abs(sL) <= 1.0) {
        // sum_j s^j L^(p+j+1) / (j! (p+j+1))
        double sum = 0.0;
        double term = std::pow(L, p + 1);  // j = 0 numerator without 1/(p+1)
        for (int j = 0; j < 40; ++j) {
            const double contrib = term / (p + j + 1);
            sum += contrib;
            if (std::abs(contrib) < 1e-300 || std::abs(contrib) < 1e-20 * std::abs(sum))
                break;
            term *= sL / (j + 1);
        }
        return sum;
    }
    // I_0 = (e^(sL)-1)/s, I_k = (L^k e^(sL) - k I_{k-1})/s
    const double esL = std::exp(sL);
    double I = std::expm1(sL) / s;
    double Lk = 1.0;
    for (int k = 1; k <= p; ++k) {
        Lk *= L;
        I = (Lk * esL - k * I) / s;
    }
    return I;
}

// Integral of u^p e^(s u) over (-inf, 0]; requires s > 0.
inline double tail_power_exp(int p, double s) {
    if (!(s > 0.0)) throw std::domain_error("tail_power_exp: rate must be positive");
    double sign = (p % 2 == 0) ? 1.0 : -1.0;
    return sign * factorial(p) / std::pow(s, p + 1);
}

}  // namespace detail

// Sum of ExpTerms in a local variable u.  Terms with equal (power, rate)
// are merged; rates are compared exactly (they come from shared model
// constants, not independent roundings).
class ExpPoly {
public:
    ExpPoly() = default;
    explicit ExpPoly(std::vector<ExpTerm> terms) { for (auto& t : terms) add_term(t); }
    static ExpPoly constant(double c) { return ExpPoly({{c, 0, 0.0}}); }

    void add_term(const ExpTerm& t) {
        if (t.coef == 0.0) return;
        for (auto& u : terms_) {
            if (u.power == t.power && u.rate == t.rate) {
                u.coef += t.coef;
                return;
            }
        }
        terms_.push_back(t);
    }

    void add(const ExpPoly& other) { for (const auto& t : other.terms_) add_term(t); }

    ExpPoly scaled(double k) const {
        ExpPoly r = *this;
        for (auto& t : r.terms_) t.coef *= k;
        return r;
    }

    double eval(double u) const {
        double sum = 0.0;
        for (const auto& t : terms_)
            sum += t.coef * std::pow(u, t.power) * std::exp(t.rate * u);
        return sum;
    }

    ExpPoly derivative() const {
        ExpPoly d;
        for (const auto& t : terms_) {
            if (t.power > 0) d.add_term({t.coef * t.power, t.power - 1, t.rate});
            if (t.rate != 0.0) d.add_term({t.coef * t.rate, t.power, t.rate});
        }
        return d;
    }

    // Integral over [0, L] in the local variable.
    double integrate(double L) const {
        double sum = 0.0;
        for (const auto& t : terms_)
            sum += t.coef * detail::int_power_exp(t.power, t.rate, L);
        return sum;
    }

    // Integral of f(u) e^(mu*u) over (-inf, U]; requires rate + mu > 0 for
    // every term.  Returned value is already scaled by e^(-mu*U) so the
    // caller composes exponents without overflow:
    //   e^(-mu*U) * int_{-inf}^{U} f(u) e^(mu u) du.
    double tail_integral_scaled(double mu, double U) const {
        double sum = 0.0;
        for (const auto& t : terms_) {
            const double s = t.rate + mu;
            if (!(s > 0.0))
                throw std::domain_error(
                    "tail_integral_scaled: divergent exponential tail (rate + mu <= 0)");
            // int_{-inf}^{U} u^p e^(s u) du, shifted to w = u - U:
            //   e^(sU) * sum_k binom(p,k) U^(p-k) int_{-inf}^0 w^k e^(s w) dw
            double inner = 0.0;
            for (int k = 0; k <= t.power; ++k)
                inner += detail::binom(t.power, k) * std::pow(U, t.power - k) *
                         detail::tail_power_exp(k, s);
            sum += t.coef * inner * std::exp(t.rate * U);  // e^(sU) * e^(-mu U)
        }
        return sum;
    }

    // Rewrite in the variable w = u + delta (i.e. f(u) = f(w - delta)).
    ExpPoly shifted(double delta) const {
        ExpPoly r;
        for (const auto& t : terms_) {
            const double e = std::exp(-t.rate * delta);
            for (int k = 0; k <= t.power; ++k)
                r.add_term({t.coef * e * detail::binom(t.power, k) *
                                std::pow(-delta, t.power - k),
                            k, t.rate});
        }
        return r;
    }

    // Multiply by e^(s*(u + u0)), used for exponential tilting of pieces
    // referenced at u0.
    ExpPoly exp_tilted(double s, double u0) const {
        ExpPoly r;
        const double e = std::exp(s * u0);
        for (const auto& t : terms_) r.add_term({t.coef * e, t.power, t.rate + s});
        return r;
    }

    bool empty() const { return terms_.empty(); }
    const std::vector<ExpTerm>& terms() const { return terms_; }

    int max_power() const {
        int p = 0;
        for (const auto& t : terms_) p = std::max(p, t.power);
        return p;
    }

    // Drop terms whose coefficient is negligible against the given scale.
    void prune(double abs_tol) {
        std::erase_if(terms_, [&](const ExpTerm& t) { return std::abs(t.coef) <= abs_tol; });
    }

private:
    std::vector<ExpTerm> terms_;
};

// Convolution (W * J)(t) = int_0^t W(t-y) J(y) dy for two exponential sums,
// expanded symbolically.  W must be a pure exponential sum (powers 0);
// J may carry polynomial factors.  Rates closer than collision_tol are
// treated as equal and produce t^(p+1) terms.
inline ExpPoly convolve_expsum(const ExpPoly& w, const ExpPoly& j,
                               double collision_tol = 1e-9) {
    ExpPoly out;
    for (const auto& tw : w.terms()) {
        if (tw.power != 0)
            throw std::invalid_argument("convolve_expsum: left factor must have powers 0");
        for (const auto& tj : j.terms()) {
            const double c = tw.coef * tj.coef;
            const double th = tw.rate, et = tj.rate;
            const double s = et - th;
            const int p = tj.power;
            if (std::abs(s) <= collision_tol) {
                // int_0^t y^p e^(s y) dy -> t^(p+1)/(p+1) at s = 0
                out.add_term({c / (p + 1), p + 1, th});
                continue;
            }
            // e^(th t) * I_p(s, t) expanded term by term:
            // I_0 = (e^(st)-1)/s; I_k = (t^k e^(st) - k I_{k-1})/s
            // Expansion: I_p = e^(st) sum_{k=0}^{p} (-1)^(p-k) p!/(k!) t^k / s^(p-k+1)
            //                  + (-1)^(p+1) p!/s^(p+1)
            for (int k = 0; k <= p; ++k) {
                const double sign = ((p - k) % 2 == 0) ? 1.0 : -1.0;
                const double coef = sign * detail::factorial(p) / detail::factorial(k) /
                                    std::pow(s, p - k + 1);
                out.add_term({c * coef, k, et});
            }
            const double sign = ((p + 1) % 2 == 0) ? 1.0 : -1.0;
            out.add_term({c * sign * detail::factorial(p) / std::pow(s, p + 1), 0, th});
        }
    }
    return out;
}

// A piece of a piecewise exp-polynomial: f(x) = poly(x - x0) on [lo, hi).
struct Piece {
    double lo = -kInf;
    double hi = kInf;
    double x0 = 0.0;  // local reference point, keeps polynomials well conditioned
    ExpPoly poly;

    double eval(double x) const { return poly.eval(x - x0); }
};

// Piecewise exp-polynomial tiling the whole real line without gaps.
class PiecewiseExpPoly {
public:
    PiecewiseExpPoly() { pieces_.push_back({-kInf, kInf, 0.0, ExpPoly()}); }

    explicit PiecewiseExpPoly(std::vector<Piece> pieces) : pieces_(std::move(pieces)) {
        validate_tiling();
    }

    static PiecewiseExpPoly zero() { return PiecewiseExpPoly(); }

    const std::vector<Piece>& pieces() const { return pieces_; }

    // Interior breakpoints, ascending.
    std::vector<double> breakpoints() const {
        std::vector<double> b;
        for (std::size_t i = 0; i + 1 < pieces_.size(); ++i) b.push_back(pieces_[i].hi);
        return b;
    }

    double eval(double x) const { return pieces_[index_for(x, Side::right)].eval(x); }

    double eval_side(double x, Side s) const { return pieces_[index_for(x, s)].eval(x); }

    double deriv(double x, Side s) const {
        const Piece& p = pieces_[index_for(x, s)];
        return p.poly.derivative().eval(x - p.x0);
    }

    double second_deriv(double x, Side s) const {
        const Piece& p = pieces_[index_for(x, s)];
        return p.poly.derivative().derivative().eval(x - p.x0);
    }

    // e^(-mu x) * int_{-inf}^{x} f(w) e^(mu w) dw, all pieces combined.
    // Requires every term left of x to satisfy rate + mu > 0.
    double exp_weighted_left_integral(double mu, double x) const {
        double total = 0.0;
        for (const auto& p : pieces_) {
            if (p.lo >= x) break;
            const double hi = std::min(p.hi, x);
            if (std::isinf(p.lo)) {
                // e^(-mu x) int_{-inf}^{hi} = [e^(-mu hi) int] * e^(mu (hi - x))
                total += p.poly.tail_integral_scaled(mu, hi - p.x0) *
                         std::exp(mu * (hi - x));
            } else {
                // finite segment [p.lo, hi) in local coordinates [a, b]
                const double a = p.lo - p.x0, b = hi - p.x0;
                for (const auto& t : p.poly.terms()) {
                    const double s = t.rate + mu;
                    // int_a^b u^p e^(su) du = e^(sa) int_0^{b-a} (a+v)^p e^(sv) dv
                    double inner = 0.0;
                    for (int k = 0; k <= t.power; ++k)
                        inner += detail::binom(t.power, k) * std::pow(a, t.power - k) *
                                 detail::int_power_exp(k, s, b - a);
                    // accumulated exponent: s*a + mu*x0 - mu*x = rate*a + mu*(lo - x)
                    total += t.coef * inner * std::exp(t.rate * a + mu * (p.lo - x));
                }
            }
        }
        return total;
    }

    // Replace the function on [lo, hi) by the given pieces (which must tile
    // exactly [lo, hi)).  Existing pieces are trimmed or dropped.
    void patch(double lo, double hi, const std::vector<Piece>& replacement) {
        if (!(lo < hi)) throw std::invalid_argument("patch: empty interval");
        std::vector<Piece> out;
        for (const auto& p : pieces_) {
            if (p.hi <= lo || p.lo >= hi) {
                out.push_back(p);
                continue;
            }
            if (p.lo < lo) out.push_back({p.lo, lo, p.x0, p.poly});
            if (p.hi > hi) out.push_back({hi, p.hi, p.x0, p.poly});
        }
        for (const auto& r : replacement) {
            if (r.lo < lo - 1e-12 || r.hi > hi + 1e-12)
                throw std::invalid_argument("patch: replacement outside interval");
            out.push_back(r);
        }
        std::sort(out.begin(), out.end(),
                  [](const Piece& a, const Piece& b) { return a.lo < b.lo; });
        pieces_ = std::move(out);
        validate_tiling();
    }

    // Multiply the whole function by e^(s x).
    PiecewiseExpPoly exp_tilted(double s) const {
        std::vector<Piece> out;
        out.reserve(pieces_.size());
        for (const auto& p : pieces_)
            out.push_back({p.lo, p.hi, p.x0, p.poly.exp_tilted(s, p.x0)});
        return PiecewiseExpPoly(std::move(out));
    }

    PiecewiseExpPoly scaled(double k) const {
        std::vector<Piece> out;
        out.reserve(pieces_.size());
        for (const auto& p : pieces_) out.push_back({p.lo, p.hi, p.x0, p.poly.scaled(k)});
        return PiecewiseExpPoly(std::move(out));
    }

    // Largest value-discontinuity across interior breakpoints (continuity check).
    double max_jump() const {
        double m = 0.0;
        for (std::size_t i = 0; i + 1 < pieces_.size(); ++i) {
            const double b = pieces_[i].hi;
            m = std::max(m, std::abs(pieces_[i].eval(b) - pieces_[i + 1].eval(b)));
        }
        return m;
    }

    // Limit as x -> +inf of the last piece; nan if divergent.
    double limit_at_plus_inf() const {
        const Piece& p = pieces_.back();
        double limit = 0.0;
        for (const auto& t : p.poly.terms()) {
            if (t.rate > 0.0 || (t.rate == 0.0 && t.power > 0))
                return std::numeric_limits<double>::quiet_NaN();
            if (t.rate == 0.0) limit += t.coef;
        }
        return limit;
    }

private:
    std::size_t index_for(double x, Side s) const {
        // Side::right treats pieces as [lo, hi), Side::left as (lo, hi].
        std::size_t i = 0;
        while (i + 1 < pieces_.size()) {
            const double b = pieces_[i].hi;
            if (x < b || (x == b && s == Side::left)) break;
            ++i;
        }
        return i;
    }

    void validate_tiling() const {
        if (pieces_.empty()) throw std::invalid_argument("piecewise: no pieces");
        if (!std::isinf(pieces_.front().lo) || !std::isinf(pieces_.back().hi))
            throw std::invalid_argument("piecewise: must cover the real line");
        for (std::size_t i = 0; i + 1 < pieces_.size(); ++i) {
            if (std::abs(pieces_[i].hi - pieces_[i + 1].lo) > 1e-12)
                throw std::invalid_argument("piecewise: gap or overlap between pieces");
            if (!(pieces_[i].lo < pieces_[i].hi))
                throw std::invalid_argument("piecewise: empty piece");
        }
    }

    std::vector<Piece> pieces_;
};

}  // namespace levystop
