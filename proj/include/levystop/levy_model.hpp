#pragma once

// Spectrally negative Levy process with hyperexponential downward jumps:
//   X_t = x + drift*t + sigma*B_t - sum of jumps,
// jump component i arrives at `rate` and has Exp(`decay`) magnitude.
// Laplace exponent:
//   psi(th) = drift*th + sigma^2 th^2 / 2 + sum_i rate_i (decay_i/(decay_i+th) - 1)

#include <cmath>
#include <stdexcept>
#include <vector>

namespace levystop {

struct JumpTerm {
    double rate = 0.0;   // arrival intensity, > 0
    double decay = 0.0;  // exponential magnitude parameter, > 0
};

struct LevyModel {
    double drift = 0.0;
    double sigma = 0.0;
    std::vector<JumpTerm> jumps;

    void validate() const {
        if (sigma < 0.0) throw std::invalid_argument("model: sigma must be >= 0");
        for (const auto& j : jumps)
            if (!(j.rate > 0.0) || !(j.decay > 0.0))
                throw std::invalid_argument("model: jump rate and decay must be > 0");
        if (sigma == 0.0 && drift <= 0.0)
            throw std::invalid_argument(
                "model: bounded variation paths need strictly positive drift");
        // mixture components must stay separated or the pole/root interlacing
        // used by the scale-function construction degenerates
        for (std::size_t i = 0; i < jumps.size(); ++i)
            for (std::size_t k = i + 1; k < jumps.size(); ++k)
                if (std::abs(jumps[i].decay - jumps[k].decay) <=
                    1e-9 * std::max(1.0, jumps[i].decay))
                    throw std::invalid_argument(
                        "model: jump decays must be distinct (merge rates instead)");
    }

    bool bounded_variation() const { return sigma == 0.0; }

    double total_jump_rate() const {
        double s = 0.0;
        for (const auto& j : jumps) s += j.rate;
        return s;
    }

    double min_decay() const {
        double m = kInfDecay;
        for (const auto& j : jumps) m = std::min(m, j.decay);
        return m;
    }

    static constexpr double kInfDecay = 1e300;
};

// psi(theta) as a rational function of theta.  The transform E[e^(theta X_1)]
// only converges for theta > -min decay, but the root structure behind the
// scale functions lives on the continuation across the poles, so evaluation
// is allowed everywhere except at a pole itself.
inline double psi(const LevyModel& m, double theta) {
    double v = m.drift * theta + 0.5 * m.sigma * m.sigma * theta * theta;
    for (const auto& j : m.jumps) {
        if (theta == -j.decay) throw std::domain_error("psi: theta at a pole");
        v += j.rate * (j.decay / (j.decay + theta) - 1.0);
    }
    return v;
}

inline double psi_prime(const LevyModel& m, double theta) {
    double v = m.drift + m.sigma * m.sigma * theta;
    for (const auto& j : m.jumps) {
        if (theta == -j.decay) throw std::domain_error("psi_prime: theta at a pole");
        const double d = j.decay + theta;
        v -= j.rate * j.decay / (d * d);
    }
    return v;
}

inline double psi_second(const LevyModel& m, double theta) {
    double v = m.sigma * m.sigma;
    for (const auto& j : m.jumps) {
        const double d = j.decay + theta;
        v += 2.0 * j.rate * j.decay / (d * d * d);
    }
    return v;
}

// Right inverse Phi(q) = largest root of psi(theta) = q on [0, inf), q >= 0.
// psi is strictly convex on (-mu_min, inf) with psi(0) = 0, so for q > 0 the
// root is unique in (0, inf); for q = 0 it is 0 when psi'(0+) >= 0 and the
// positive root otherwise.  Newton from a bracketing start, with bisection
// fallback; polished to machine precision.
inline double phi(const LevyModel& m, double q) {
    if (q < 0.0) throw std::invalid_argument("phi: q must be >= 0");
    if (q == 0.0 && psi_prime(m, 0.0) >= 0.0) return 0.0;
    // bracket [lo, hi] with psi(lo) - q <= 0 <= psi(hi) - q
    double lo = 0.0;
    double hi = 1.0;
    while (psi(m, hi) < q) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e12) throw std::runtime_error("phi: failed to bracket root");
    }
    double x = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        const double f = psi(m, x) - q;
        if (f > 0.0) hi = x; else lo = x;
        const double dp = psi_prime(m, x);
        double nx = (dp != 0.0) ? x - f / dp : 0.5 * (lo + hi);
        if (!(nx > lo && nx < hi)) nx = 0.5 * (lo + hi);
        if (std::abs(nx - x) <= 1e-16 * std::max(1.0, std::abs(x))) { x = nx; break; }
        x = nx;
    }
    return x;
}

// Mean drift at q=0 transience check: the process drifts to +inf iff
// psi'(0+) > 0.
inline bool drifts_to_plus_infinity(const LevyModel& m) { return psi_prime(m, 0.0) > 0.0; }

}  // namespace levystop
