#pragma once

// Infinitesimal generator applied to a piecewise exp-polynomial payoff:
//   (L f)(x) = drift f'(x) + sigma^2/2 f''(x) + int (f(x+y) - f(x)) Pi(dy).
// At kinks the right-hand derivatives are used.

#include "levystop/levy_model.hpp"
#include "levystop/reward.hpp"

namespace levystop {

inline double generator_apply(const LevyModel& m, const PiecewiseExpPoly& f, double x,
                              Side side = Side::right) {
    double v = m.drift * f.deriv(x, side);
    if (m.sigma > 0.0) v += 0.5 * m.sigma * m.sigma * f.second_deriv(x, side);
    v += pi_integral(m, f, x);
    return v;
}

inline double generator_apply(const LevyModel& m, const RewardFunction& g, double x,
                              Side side = Side::right) {
    return generator_apply(m, g.piecewise(), x, side);
}

// Discounted-generator residual (L - q) f at x; equals L f when q = 0.
inline double discounted_generator_apply(const LevyModel& m, const PiecewiseExpPoly& f,
                                         double q, double x, Side side = Side::right) {
    return generator_apply(m, f, x, side) - q * f.eval(x);
}

inline double discounted_generator_apply(const LevyModel& m, const RewardFunction& g,
                                         double q, double x, Side side = Side::right) {
    return discounted_generator_apply(m, g.piecewise(), q, x, side);
}

}  // namespace levystop
