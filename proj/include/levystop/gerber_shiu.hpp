#pragma once

// Smooth Gerber-Shiu function h_a and the expected-reward kernels built
// from it:
//   h_a(x)  = g(a) + g'(a-)(x-a) - int_0^{x-a} W^(q)(x-a-y) J_a(y) dy
//   J_a(y)  = g'(a-) psi'(0+) - q (g'(a-) y + g(a))
//             + int_(y,inf) ( g(y+a-z) - g(a) + g'(a-)(z-y) ) Pi(-dz)
// h_a is harmonic on (a, inf) and matches g below a.  For hyperexponential
// jumps J_a collapses to an exp-polynomial:
//   J_a(y) = [g'(a-) psi'(0+) - q g(a)] - q g'(a-) y
//            + sum_i rate_i decay_i C_i(a) e^(-decay_i y),
//   C_i(a) = e^(-decay_i a) int_{-inf}^{a} g e^(decay_i w) dw
//            - g(a)/decay_i + g'(a-)/decay_i^2,
// so the convolution with W is exact.
//
// kappa(a) = sigma^2/2 g'(a-) + (q/Phi(q)) g(a) - L gbar(Phi(q))
// is the coefficient of the growing solution: h_a(x) ~ kappa(a) W^(q)(x-a).
// At q = 0, q/Phi(q) is read as its limit psi'(0+), and
//   L gbar(Phi(q)) = sum_i rate_i decay_i B_i(a) / (Phi(q) + decay_i),
//   B_i(a) = e^(-decay_i a) int_{-inf}^{a} g e^(decay_i w) dw - g(a)/decay_i.

#include <cmath>
#include <stdexcept>

#include "levystop/exp_poly.hpp"
#include "levystop/levy_model.hpp"
#include "levystop/reward.hpp"
#include "levystop/scale_functions.hpp"

namespace levystop {

// kappa as a standalone evaluation; `side` picks the derivative used for the
// sigma^2/2 g' term and the C/B integrals (left by definition; right-sided
// value is occasionally useful for diagnostics at kinks).
inline double kappa(const ScaleEvaluator& scale, const RewardFunction& g, double a,
                    Side side = Side::left) {
    const LevyModel& m = scale.model();
    const double q = scale.q();
    const double ga = g.eval(a);
    const double gp = g.deriv(a, side);
    const double phiq = scale.phi_q();
    const double qfac = (q > 0.0) ? q / phiq : psi_prime(m, 0.0);
    double v = 0.5 * m.sigma * m.sigma * gp + qfac * ga;
    for (const auto& j : m.jumps) {
        const double B = g.exp_weighted_left_integral(j.decay, a) - ga / j.decay;
        v -= j.rate * j.decay * B / (phiq + j.decay);
    }
    return v;
}

class GerberShiuEvaluator {
public:
    // side = left builds h_a (the harmonic extension), side = right builds
    // the h_{a+} variant whose linear slope uses g'(a+); J is unchanged.
    GerberShiuEvaluator(const ScaleEvaluator& scale, const RewardFunction& g, double a,
                        Side side = Side::left)
        : scale_(&scale), g_(&g), a_(a) {
        const LevyModel& m = scale.model();
        g.check_model_compat(m);
        const double q = scale.q();
        const double ga = g.eval(a);
        const double gpl = g.deriv(a, Side::left);
        const double slope = (side == Side::left) ? gpl : g.deriv(a, Side::right);

        j_poly_.add_term({gpl * psi_prime(m, 0.0) - q * ga, 0, 0.0});
        if (q != 0.0) j_poly_.add_term({-q * gpl, 1, 0.0});
        for (const auto& j : m.jumps) {
            const double C = g.exp_weighted_left_integral(j.decay, a) - ga / j.decay +
                             gpl / (j.decay * j.decay);
            j_poly_.add_term({j.rate * j.decay * C, 0, -j.decay});
        }

        // h(a + t) = ga + slope t - (W * J)(t)
        h_local_ = convolve_expsum(scale.w_expsum(), j_poly_).scaled(-1.0);
        h_local_.add_term({ga, 0, 0.0});
        h_local_.add_term({slope, 1, 0.0});

        hw_ = g.piecewise();
        hw_.patch(a_, kInf, {{a_, kInf, a_, h_local_}});
    }

    // the evaluator keeps pointers to `scale` and `g`; binding temporaries
    // would dangle as soon as the constructor's full expression ends
    GerberShiuEvaluator(ScaleEvaluator&&, const RewardFunction&, double,
                        Side = Side::left) = delete;
    GerberShiuEvaluator(const ScaleEvaluator&, RewardFunction&&, double,
                        Side = Side::left) = delete;
    GerberShiuEvaluator(ScaleEvaluator&&, RewardFunction&&, double,
                        Side = Side::left) = delete;

    double a() const { return a_; }
    const ExpPoly& j_expsum() const { return j_poly_; }

    double J(double y) const {
        if (y < 0.0) throw std::invalid_argument("J: defined for y >= 0");
        return j_poly_.eval(y);
    }

    double h(double x) const { return hw_.eval(x); }
    double h_deriv(double x, Side s = Side::right) const { return hw_.deriv(x, s); }

    // h as a full piecewise function (g below a, harmonic extension above).
    const PiecewiseExpPoly& h_piecewise() const { return hw_; }

    double kappa() const { return levystop::kappa(*scale_, *g_, a_); }

    // One-sided kernel H_a g = h_a - kappa(a) W(. - a): the expected reward
    // from stopping at first passage below a.
    PiecewiseExpPoly H_one() const {
        PiecewiseExpPoly v = hw_;
        const double k = kappa();
        ExpPoly poly = h_local_;
        poly.add(scale_->w_expsum().scaled(-k));
        v.patch(a_, kInf, {{a_, kInf, a_, poly}});
        return v;
    }

    // Two-sided kernel H_{a,b} g on (a, b): stop at passage below a or at
    // the up-crossing of b (creeping); equals g outside (a, b).
    PiecewiseExpPoly H_two(double b) const {
        if (!(b > a_)) throw std::invalid_argument("H_two: requires b > a");
        const double wba = scale_->W(b - a_);
        const double corr = (g_->eval(b) - h_local_.eval(b - a_)) / wba;
        ExpPoly poly = h_local_;
        poly.add(scale_->w_expsum().scaled(corr));
        PiecewiseExpPoly v = g_->piecewise();
        v.patch(a_, b, {{a_, b, a_, poly}});
        return v;
    }

private:
    const ScaleEvaluator* scale_;
    const RewardFunction* g_;
    double a_;
    ExpPoly j_poly_;    // J_a(y), y >= 0
    ExpPoly h_local_;   // h(a + t), t >= 0
    PiecewiseExpPoly hw_;
};

}  // namespace levystop
