#pragma once

// Esscher change of measure at Phi(q): removes the discount rate from the
// problem.  Under the tilted measure
//   psi~(theta) = psi(theta + Phi(q)) - q,
// the process again belongs to the hyperexponential class with
//   drift~ = drift + sigma^2 Phi(q),  decay~_i = decay_i + Phi(q),
//   rate~_i = rate_i decay_i / (decay_i + Phi(q)),
// psi~'(0+) = psi'(Phi(q)) > 0, and the generators are linked by
//   L~ g~ (x) = e^(-Phi(q) x) (L - q) g(x)  for  g~(x) = e^(-Phi(q) x) g(x).
// Solving the undiscounted problem for g~ and multiplying the value by
// e^(Phi(q) x) solves the original q-discounted problem.

#include <stdexcept>

#include "levystop/exp_poly.hpp"
#include "levystop/levy_model.hpp"
#include "levystop/reward.hpp"

namespace levystop {

struct TiltedProblem {
    double q = 0.0;
    double phi_q = 0.0;
    LevyModel original_model;
    LevyModel model;        // tilted dynamics, drift to +inf guaranteed
    RewardFunction reward;  // e^(-Phi(q) x) g(x)
};

inline LevyModel tilt_model(const LevyModel& m, double phi_q) {
    LevyModel t;
    t.drift = m.drift + m.sigma * m.sigma * phi_q;
    t.sigma = m.sigma;
    t.jumps.reserve(m.jumps.size());
    for (const auto& j : m.jumps)
        t.jumps.push_back({j.rate * j.decay / (j.decay + phi_q), j.decay + phi_q});
    return t;
}

inline TiltedProblem tilt(const LevyModel& m, const RewardFunction& g, double q) {
    m.validate();
    if (q < 0.0) throw std::invalid_argument("tilt: q must be >= 0");
    if (q == 0.0 && !drifts_to_plus_infinity(m))
        throw std::domain_error(
            "tilt: q = 0 requires a process drifting to +inf (psi'(0+) > 0)");
    const double phiq = phi(m, q);
    TiltedProblem out{q, phiq, m, tilt_model(m, phiq),
                      phiq == 0.0
                          ? g
                          : RewardFunction(g.piecewise().exp_tilted(-phiq),
                                           g.name() + "~")};
    out.model.validate();
    return out;
}

// Map a value function of the tilted problem back to the original problem.
inline PiecewiseExpPoly untilt_value(const TiltedProblem& t, const PiecewiseExpPoly& v) {
    if (t.phi_q == 0.0) return v;
    return v.exp_tilted(t.phi_q);
}

}  // namespace levystop
