#pragma once

// q-scale functions W^(q), Z^(q), the two-argument Z_q(x, theta) and the
// q-potential density of the process killed on passing below 0.
//
// For hyperexponential jumps, psi(theta) - q is a rational function whose
// numerator has only real simple roots interlacing the poles -decay_i.
// Inverting the transform 1/(psi(beta) - q) by partial fractions gives
//   W^(q)(x) = sum_j e^(theta_j x) / psi'(theta_j)
// over all real roots theta_j of psi = q, the largest being Phi(q).

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "levystop/exp_poly.hpp"
#include "levystop/levy_model.hpp"

namespace levystop {

class ScaleEvaluator {
public:
    ScaleEvaluator(LevyModel model, double q, std::vector<double> roots,
                   std::vector<double> coefficients)
        : model_(std::move(model)), q_(q), roots_(std::move(roots)),
          coef_(std::move(coefficients)) {
        for (std::size_t j = 0; j < roots_.size(); ++j)
            w_.add_term({coef_[j], 0, roots_[j]});
    }

    double q() const { return q_; }
    const LevyModel& model() const { return model_; }
    const std::vector<double>& roots() const { return roots_; }
    const std::vector<double>& coefficients() const { return coef_; }
    double phi_q() const { return roots_.back(); }

    // W^(q) as an exponential sum valid on [0, inf); W = 0 on (-inf, 0).
    const ExpPoly& w_expsum() const { return w_; }

    double W(double x) const {
        if (x < 0.0) return 0.0;
        return w_.eval(x);
    }

    double W_prime(double x) const {
        if (x < 0.0) return 0.0;
        return w_.derivative().eval(x);
    }

    // Z^(q)(x) = 1 + q int_0^x W^(q)(y) dy; equals 1 for x <= 0.
    double Z(double x) const {
        if (x <= 0.0 || q_ == 0.0) return 1.0;
        return 1.0 + q_ * w_.integrate(x);
    }

    // Z_q(x, theta) = e^(theta x) (1 + (q - psi(theta)) int_0^x e^(-theta y) W^(q)(y) dy);
    // reduces to e^(theta x) for x <= 0 and to Z^(q)(x) at theta = 0.
    double Z2(double x, double theta) const {
        const double ex = std::exp(theta * x);
        if (x <= 0.0) return ex;
        const double qp = q_ - psi(model_, theta);
        double conv = 0.0;  // int_0^x e^(theta (x-y)) W(y) dy
        for (std::size_t j = 0; j < roots_.size(); ++j) {
            const double d = roots_[j] - theta;
            if (std::abs(d) < 1e-8) {
                conv += coef_[j] * x * std::exp(roots_[j] * x);
            } else {
                conv += coef_[j] * (std::exp(roots_[j] * x) - ex) / d;
            }
        }
        return ex + qp * conv;
    }

    // Resolvent density of the process killed below 0:
    //   u^(q)(x, y) = Phi'(q) e^(-Phi(q)(y-x)) - W^(q)(x-y), x,y >= 0,
    // with Phi'(q) = 1/psi'(Phi(q)) (equals 1/psi'(0+) at q = 0).
    double potential_density(double x, double y) const {
        const double phiq = phi_q();
        const double dphi = 1.0 / psi_prime(model_, phiq);
        return dphi * std::exp(-phiq * (y - x)) - W(x - y);
    }

private:
    LevyModel model_;
    double q_ = 0.0;
    std::vector<double> roots_;
    std::vector<double> coef_;
    ExpPoly w_;
};

namespace detail {

// All real roots of psi(theta) = q.  The pole structure pins them down:
// one root in each gap between consecutive poles -decay_(i+1) < -decay_i
// (psi runs from +inf down to -inf across a gap), two roots right of the
// last pole where psi is strictly convex (the larger is Phi(q)), and one
// more left of the first pole when sigma > 0.  A total-count argument
// shows each of these brackets holds exactly one root, so plain bisection
// on the rational function is both robust and sufficient.
inline std::vector<double> psi_roots(const LevyModel& m, double q) {
    std::vector<double> decays;
    for (const auto& j : m.jumps) decays.push_back(j.decay);
    std::sort(decays.begin(), decays.end());

    auto f = [&](double th) { return psi(m, th) - q; };

    auto bisect = [&](double lo, double hi, auto&& fn) {
        double flo = fn(lo);
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (mid == lo || mid == hi) break;
            const double fm = fn(mid);
            if ((flo <= 0.0) == (fm <= 0.0)) { lo = mid; flo = fm; } else { hi = mid; }
        }
        return 0.5 * (lo + hi);
    };

    // Walk toward `pole` from `start` until pred(theta) holds; psi blows up
    // at the pole so only a few halvings are ever needed.
    auto approach = [&](double pole, double start, auto&& pred) {
        double x = start;
        for (int it = 0; it < 200 && !pred(x); ++it) x = pole + (x - pole) * 0.5;
        return x;
    };

    std::vector<double> roots;

    if (decays.empty()) {
        // no jumps: psi is linear (sigma = 0) or quadratic
        if (m.sigma > 0.0) {
            const double a = 0.5 * m.sigma * m.sigma;
            roots.push_back((-m.drift - std::sqrt(m.drift * m.drift + 4.0 * a * q)) /
                            (2.0 * a));
            roots.push_back(phi(m, q));
        } else {
            roots.push_back(q / m.drift);
        }
        std::sort(roots.begin(), roots.end());
        return roots;
    }

    // left of the leftmost pole: f from +inf (theta -> -inf) down to -inf
    if (m.sigma > 0.0) {
        const double pole = -decays.back();
        const double hi = approach(pole, pole - std::max(1.0, 0.1 * decays.back()),
                                   [&](double x) { return f(x) < 0.0; });
        double step = std::max(1.0, std::abs(pole));
        double lo = hi - step;
        while (f(lo) < 0.0) { step *= 2.0; lo -= step; }
        roots.push_back(bisect(lo, hi, f));
    }

    // gaps between consecutive poles
    for (std::size_t i = 0; i + 1 < decays.size(); ++i) {
        const double right_pole = -decays[i];
        const double left_pole = -decays[i + 1];
        const double mid = 0.5 * (left_pole + right_pole);
        const double lo = approach(left_pole, mid, [&](double x) { return f(x) > 0.0; });
        const double hi = approach(right_pole, mid, [&](double x) { return f(x) < 0.0; });
        roots.push_back(bisect(lo, hi, f));
    }

    // right of the last pole: strictly convex with minimum below q, so two
    // roots; the larger one is Phi(q), the smaller sits left of the argmin.
    {
        const double pole = -decays.front();
        const double right_root = phi(m, q);
        // argmin via psi' (increasing on this interval)
        const double dlo = approach(pole, 0.5 * (pole + right_root) == pole
                                              ? pole + 1.0
                                              : 0.5 * (pole + right_root),
                                    [&](double x) { return psi_prime(m, x) < 0.0; });
        double dhi = std::max(right_root, dlo + 1.0);
        while (psi_prime(m, dhi) < 0.0) dhi += std::max(1.0, dhi - dlo);
        const double theta_min = bisect(dlo, dhi, [&](double x) { return psi_prime(m, x); });
        const double lo = approach(pole, theta_min, [&](double x) { return f(x) > 0.0; });
        roots.push_back(bisect(lo, theta_min, f));
        roots.push_back(right_root);
    }

    std::sort(roots.begin(), roots.end());
    return roots;
}

}  // namespace detail

// Build the scale-function evaluator for discount rate q >= 0.  At q = 0 the
// process must drift to +inf (psi'(0+) > 0).
inline ScaleEvaluator build_scale(const LevyModel& m, double q) {
    m.validate();
    if (q < 0.0) throw std::invalid_argument("build_scale: q must be >= 0");
    if (q == 0.0 && !drifts_to_plus_infinity(m))
        throw std::domain_error("build_scale: q = 0 requires psi'(0+) > 0");

    std::vector<double> roots = detail::psi_roots(m, q);

    // Expected count: one per pole gap type plus two on the right interval.
    const std::size_t expected = m.jumps.size() + 1 + (m.sigma > 0.0 ? 1 : 0);
    if (roots.size() != expected)
        throw std::runtime_error("build_scale: root count mismatch (found " +
                                 std::to_string(roots.size()) + ", expected " +
                                 std::to_string(expected) + ")");
    for (std::size_t i = 0; i + 1 < roots.size(); ++i)
        if (!(roots[i] < roots[i + 1] - 1e-12))
            throw std::runtime_error("build_scale: roots not simple/separated");

    std::vector<double> coef;
    coef.reserve(roots.size());
    for (double r : roots) coef.push_back(1.0 / psi_prime(m, r));

    ScaleEvaluator ev(m, q, std::move(roots), std::move(coef));

    // Transform identity spot check at one abscissa.
    const double beta = ev.phi_q() + 1.0;
    double lhs = 0.0;
    for (std::size_t j = 0; j < ev.roots().size(); ++j)
        lhs += ev.coefficients()[j] / (beta - ev.roots()[j]);
    const double rhs = 1.0 / (psi(m, beta) - q);
    if (std::abs(lhs - rhs) > 1e-8 * std::max(1.0, std::abs(rhs)))
        throw std::runtime_error("build_scale: partial fraction check failed");

    return ev;
}

}  // namespace levystop
