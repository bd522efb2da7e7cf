#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "levystop/problem_spec.hpp"

using namespace levystop;
using nlohmann::json;
using Catch::Matchers::ContainsSubstring;

#ifndef LEVYSTOP_REPO_ROOT
#define LEVYSTOP_REPO_ROOT "."
#endif

namespace {

json minimal() {
    return json::parse(R"({
        "model": {"drift": 1.2, "jumps": [{"rate": 1.0, "decay": 1.5}], "q": 0.5},
        "reward": {"builtin": "mckean", "params": {"strike": 8.0}}
    })");
}

}  // namespace

TEST_CASE("builtin rewards parse with their parameters") {
    const ProblemSpec spec = parse_spec(minimal());
    REQUIRE(spec.model.drift == 1.2);
    REQUIRE(spec.model.sigma == 0.0);
    REQUIRE(spec.model.jumps.size() == 1);
    REQUIRE(spec.model.jumps[0].rate == 1.0);
    REQUIRE(spec.model.jumps[0].decay == 1.5);
    REQUIRE(spec.q == 0.5);
    REQUIRE(spec.reward.name() == "mckean");
    REQUIRE(spec.reward.eval(0.0) == 7.0);
    REQUIRE_FALSE(spec.x0.has_value());

    json j = minimal();
    j["reward"] = {{"builtin", "put_linear_tail"},
                   {"params", {{"strike", 8.0}, {"slope", 0.4}, {"match_point", 1.8}}}};
    const ProblemSpec lt = parse_spec(j);
    const RewardFunction ref = make_put_linear_tail(8.0, 0.4, 1.8);
    for (double x : {-1.0, 1.0, 2.5, 5.0, 8.0})
        REQUIRE(lt.reward.eval(x) == ref.eval(x));

    j["reward"] = {{"builtin", "hump"}};
    REQUIRE(parse_spec(j).reward.eval(0.0) == 1.0);
}

TEST_CASE("custom piecewise rewards build from term lists") {
    json j = minimal();
    j["reward"] = json::parse(R"({
        "name": "expo_step",
        "pieces": [
            {"lo": "-inf", "hi": 0.0, "terms": [{"coef": 1.0, "power": 0}]},
            {"lo": 0.0, "hi": "+inf", "terms": [{"coef": 1.0, "power": 0, "rate": -2.0}]}
        ]
    })");
    const ProblemSpec spec = parse_spec(j);
    REQUIRE(spec.reward.name() == "expo_step");
    REQUIRE(spec.reward.eval(-3.0) == 1.0);
    REQUIRE(spec.reward.eval(1.0) == std::exp(-2.0));

    // the local reference point shifts the polynomial argument
    j["reward"]["pieces"][1]["x0"] = 1.0;
    j["reward"]["pieces"][1]["terms"][0]["coef"] = std::exp(-2.0);
    const ProblemSpec shifted = parse_spec(j);
    REQUIRE(std::abs(shifted.reward.eval(0.0) - 1.0) <= 1e-15);
    REQUIRE(shifted.reward.eval(1.0) == std::exp(-2.0));
}

TEST_CASE("solver and mc tuning blocks override the defaults") {
    json j = minimal();
    j["solver"] = {{"grid_step", 5e-4}, {"a_min", -30.0}, {"condition_a_step", 1.0},
                   {"touch_rel_tol", 1e-5}, {"span", {-5.0, 12.0}}};
    j["mc"] = {{"paths", 5000}, {"seed", 99}, {"dt", 2e-3}, {"threads", 2},
               {"horizon_factor", 25.0}, {"x0", 3.25}};
    const ProblemSpec spec = parse_spec(j);

    REQUIRE(spec.solver.grid_step == 5e-4);
    REQUIRE(spec.solver.a_min.has_value());
    REQUIRE(*spec.solver.a_min == -30.0);
    REQUIRE(spec.solver.condition_a_step == 1.0);
    REQUIRE(spec.solver.touch_rel_tol == 1e-5);
    REQUIRE(spec.solver.span.has_value());
    REQUIRE(spec.solver.span->first == -5.0);
    REQUIRE(spec.solver.span->second == 12.0);

    REQUIRE(spec.mc.paths == 5000);
    REQUIRE(spec.mc.seed == 99);
    REQUIRE(spec.mc.dt == 2e-3);
    REQUIRE(spec.mc.threads == 2);
    REQUIRE(spec.mc.horizon_factor == 25.0);
    REQUIRE(spec.x0.has_value());
    REQUIRE(*spec.x0 == 3.25);
}

TEST_CASE("malformed specs raise targeted errors") {
    auto drop = [](json j, const std::string& key) { j.erase(key); return j; };

    REQUIRE_THROWS_WITH(parse_spec(drop(minimal(), "model")), ContainsSubstring("model"));
    REQUIRE_THROWS_WITH(parse_spec(drop(minimal(), "reward")), ContainsSubstring("reward"));

    json j = minimal();
    j["model"]["q"] = -0.5;
    REQUIRE_THROWS_WITH(parse_spec(j), ContainsSubstring("q"));

    j = minimal();
    j["model"].erase("drift");
    REQUIRE_THROWS_WITH(parse_spec(j), ContainsSubstring("drift"));

    j = minimal();
    j["reward"]["builtin"] = "call";
    REQUIRE_THROWS_WITH(parse_spec(j), ContainsSubstring("call"));

    j = minimal();
    j["reward"]["params"].erase("strike");
    REQUIRE_THROWS_WITH(parse_spec(j), ContainsSubstring("strike"));

    j = minimal();
    j["reward"] = {{"pieces", json::array()}};
    REQUIRE_THROWS_WITH(parse_spec(j), ContainsSubstring("pieces"));

    j = minimal();
    j["solver"] = {{"grid_step", 0.0}};
    REQUIRE_THROWS_WITH(parse_spec(j), ContainsSubstring("grid_step"));

    j = minimal();
    j["solver"] = {{"span", {3.0, 1.0}}};
    REQUIRE_THROWS_WITH(parse_spec(j), ContainsSubstring("span"));

    // growth at -inf incompatible with the jump decay is rejected up front
    j = minimal();
    j["reward"] = json::parse(R"({
        "pieces": [
            {"lo": "-inf", "hi": 0.0, "terms": [{"coef": 1.0, "power": 0, "rate": -2.0}]},
            {"lo": 0.0, "hi": "+inf", "terms": [{"coef": 1.0, "power": 0, "rate": -2.0}]}
        ]
    })");
    REQUIRE_THROWS_AS(parse_spec(j), std::domain_error);
}

TEST_CASE("shipped problem files load cleanly") {
    const std::string root = LEVYSTOP_REPO_ROOT;
    for (const char* name :
         {"twosided.spec", "discounted_put.spec", "hump.spec", "no_optimal_rule.spec"}) {
        const ProblemSpec spec = load_spec(root + "/specs/" + name);
        REQUIRE_NOTHROW(spec.model.validate());
    }
    const ProblemSpec two = load_spec(root + "/specs/twosided.spec");
    REQUIRE(two.q == 0.0);
    REQUIRE(two.reward.eval(0.0) == 7.0);
    REQUIRE(two.x0.has_value());
}

TEST_CASE("unreadable spec files are reported with the path") {
    REQUIRE_THROWS_WITH(load_spec("/nonexistent/nowhere.spec"),
                        ContainsSubstring("cannot open"));
    const std::string bad = "/tmp/levystop_bad_spec.json";
    std::ofstream(bad) << "{ definitely not json";
    REQUIRE_THROWS_WITH(load_spec(bad), ContainsSubstring("not valid JSON"));
}
