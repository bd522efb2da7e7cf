#pragma once

// Result serialization: solution.json and RFC 4180 CSV tables (CRLF line
// endings, numeric cells never need quoting).

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

#include <json.hpp>

#include "levystop/generator.hpp"
#include "levystop/scale_functions.hpp"
#include "levystop/solver.hpp"

namespace levystop {

namespace detail {

// JSON has no infinities; keep them readable and round-trippable
inline nlohmann::json json_num(double v) {
    if (std::isinf(v)) return v > 0 ? "+inf" : "-inf";
    return v;
}

inline nlohmann::json pieces_to_json(const PiecewiseExpPoly& f) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : f.pieces()) {
        nlohmann::json terms = nlohmann::json::array();
        for (const auto& t : p.poly.terms())
            terms.push_back({{"coef", t.coef}, {"power", t.power}, {"rate", t.rate}});
        arr.push_back({{"lo", json_num(p.lo)},
                       {"hi", json_num(p.hi)},
                       {"x0", p.x0},
                       {"terms", terms}});
    }
    return arr;
}

}  // namespace detail

inline nlohmann::json solution_to_json(const Solution& sol) {
    nlohmann::json j;
    j["verdict"] =
        sol.verdict == Verdict::solved ? "solved" : "no_optimal_stopping_time";
    j["q"] = sol.q;
    j["phi_q"] = sol.phi_q;
    j["beta"] = sol.beta ? nlohmann::json(*sol.beta) : nlohmann::json(nullptr);
    switch (sol.condition_a) {
        case ConditionAVerdict::holds: j["condition_a"] = "holds"; break;
        case ConditionAVerdict::fails: j["condition_a"] = "fails"; break;
        case ConditionAVerdict::flattened: j["condition_a"] = "flattened"; break;
    }
    nlohmann::json gamma = nlohmann::json::array();
    for (const auto& iv : sol.gamma)
        gamma.push_back({detail::json_num(iv.lo), detail::json_num(iv.hi)});
    j["stopping_region"] = gamma;
    j["boundaries"] = sol.boundaries;
    j["kappa_roots"] = sol.kappa_roots;
    j["iterations"] = sol.iterations;
    if (sol.verdict == Verdict::solved) {
        j["value_pieces"] = detail::pieces_to_json(sol.value);
        nlohmann::json fits = nlohmann::json::array();
        for (const auto& f : sol.fit_residuals)
            fits.push_back({{"x", f.x}, {"kind", f.kind}, {"residual", f.residual}});
        j["diagnostics"] = {
            {"fit_residuals", fits},
            {"majorant_margin", sol.majorant_margin},
            {"max_abs_generator_continuation", sol.max_abs_generator_continuation},
            {"max_generator_stopping", sol.max_generator_stopping},
        };
    }
    j["notes"] = sol.notes;
    return j;
}

inline void write_solution_json(std::ostream& out, const Solution& sol) {
    out << solution_to_json(sol).dump(2) << "\n";
}

// columns: x, value, payoff, gap, generator residual (L v - q v)
inline void write_value_grid_csv(std::ostream& out, const LevyModel& m,
                                 const RewardFunction& g, const Solution& sol, double lo,
                                 double hi, double step) {
    out << "x,v,g,gap,Lv\r\n";
    const auto fmt = [](double v) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    for (double x = lo; x <= hi + 0.5 * step; x += step) {
        const double v = sol.value.eval(x);
        const double gx = g.eval(x);
        const double lv = discounted_generator_apply(m, sol.value, sol.q, x);
        out << fmt(x) << ',' << fmt(v) << ',' << fmt(gx) << ',' << fmt(v - gx) << ','
            << fmt(lv) << "\r\n";
    }
}

inline void write_scale_table_csv(std::ostream& out, const ScaleEvaluator& scale, double lo,
                                  double hi, double step) {
    out << "x,W,W_prime,Z\r\n";
    const auto fmt = [](double v) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    for (double x = lo; x <= hi + 0.5 * step; x += step)
        out << fmt(x) << ',' << fmt(scale.W(x)) << ',' << fmt(scale.W_prime(x)) << ','
            << fmt(scale.Z(x)) << "\r\n";
}

}  // namespace levystop
