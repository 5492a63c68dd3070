#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>

#include "uavsim/detection.hpp"
#include "uavsim/scenario.hpp"

using namespace uavsim;

namespace {

ScenarioConfig quick_scenario() {
    ScenarioConfig c = default_scenario();
    c.max_ticks = 300;
    return c;
}

}  // namespace

TEST_CASE("pd_control: on-target command is zero, gains act per axis, clamp binds") {
    EstimatorState est{Vec::Zero(4), Mat::Identity(4, 4), EstimatorMode::fused};
    est.x_hat << 5, 6, 1, -1;
    SUBCASE("exactly on target with matching velocity") {
        const Vec2 u = pd_control(Vec2(5, 6), Vec2(1, -1), est, 0.05, 0.315, 2.0);
        CHECK(u.norm() == doctest::Approx(0));
    }
    SUBCASE("unit position error with the reference proportional gain") {
        const Vec2 u = pd_control(Vec2(6, 6), Vec2(1, -1), est, 0.05, 0.315, 2.0);
        CHECK(u[0] == doctest::Approx(0.05));
        CHECK(u[1] == doctest::Approx(0.0));
    }
    SUBCASE("saturating error hits a_max exactly") {
        const Vec2 u = pd_control(Vec2(500, 6), Vec2(1, -1), est, 0.05, 0.315, 2.0);
        CHECK(u.norm() == doctest::Approx(2.0));
    }
}

TEST_CASE("config: round trip through JSON is the identity") {
    ScenarioConfig c = default_scenario();
    c.seed = 99;
    c.attacker.enabled = true;
    c.attacker.r_effect = 42.5;
    c.graph = {{1}, {0, 2}, {1}};
    c.detector.source = "fused";
    c.escape.zeta = {7, 7, 1.5, 1.5};
    c.localization.enabled = true;
    const ScenarioConfig back = parse_config(config_to_json(c));
    CHECK(back == c);
}

TEST_CASE("config: empty input reports the missing required fields") {
    CHECK_THROWS_WITH_AS(parse_config(""), doctest::Contains("agents"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_config("   \n"), doctest::Contains("missing"), ConfigError);
}

TEST_CASE("config: schema violations carry field paths") {
    CHECK_THROWS_WITH_AS(parse_config("{}"), doctest::Contains("$.agents"), ConfigError);
    CHECK_THROWS_WITH_AS(
        parse_config(R"({"agents": [{"initial_state": [0,0,0,0]}]})"),
        doctest::Contains("$.agents[0].control_points"), ConfigError);
    CHECK_THROWS_WITH_AS(
        parse_config(
            R"({"agents": [], "detector": {"delta": 1.5}})"),
        doctest::Contains("$.detector.delta"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_config(R"({"agents": "nope"})"),
                         doctest::Contains("$.agents"), ConfigError);
}

TEST_CASE("config: omitted gains fall back to the reference values") {
    const ScenarioConfig c = parse_config(R"({"agents": []})");
    CHECK(c.gains.k_e == doctest::Approx(0.005));
    CHECK(c.gains.k_s == doctest::Approx(0.005));
    CHECK(c.gains.rho == doctest::Approx(1.0 / 1200.0));
    CHECK(c.gains.k_p == doctest::Approx(0.05));
    CHECK(c.gains.k_i == doctest::Approx(0.315));
    CHECK(c.noise.sigma_w == doctest::Approx(0.1));
    CHECK(c.noise.sigma_g == doctest::Approx(1.0));
    CHECK(c.noise.sigma_i == doctest::Approx(0.01));
    // defaults are echoed through serialization
    const std::string echoed = config_to_json(c);
    CHECK(echoed.find("\"k_i\": 0.315") != std::string::npos);
}

TEST_CASE("run: zero agents produce an empty trace and clean exit") {
    ScenarioConfig c;
    c.agents.clear();
    const SimTrace t = run(c);
    CHECK(t.rows.empty());
    CHECK(t.ticks_run == 0);
    CHECK_FALSE(t.safety_violation);
}

TEST_CASE("run: determinism - identical config and seed give identical traces") {
    ScenarioConfig c = quick_scenario();
    c.attacker.enabled = true;
    const SimTrace a = run(c);
    const SimTrace b = run(c);
    CHECK(trace_to_csv(a) == trace_to_csv(b));
}

TEST_CASE("run: scrambled evaluation order cannot change the trace") {
    ScenarioConfig c = quick_scenario();
    c.attacker.enabled = true;
    const SimTrace base = run(c);
    RunOptions opt;
    opt.eval_order = {2, 0, 1};
    const SimTrace scrambled = run(c, opt);
    CHECK(trace_to_csv(base) == trace_to_csv(scrambled));
    opt.eval_order = {1, 2, 0};
    CHECK(trace_to_csv(base) == trace_to_csv(run(c, opt)));
}

TEST_CASE("run: trace rows are one per (tick, agent) with monotone ticks") {
    ScenarioConfig c = quick_scenario();
    c.max_ticks = 50;
    const SimTrace t = run(c);
    REQUIRE(t.rows.size() == size_t(50 * 3));
    for (size_t r = 0; r < t.rows.size(); ++r) {
        CHECK(t.rows[r].tick == long(r / 3) + 1);
        CHECK(t.rows[r].agent == int(r % 3));
    }
}

TEST_CASE("run: mode column mirrors the detector decision exactly") {
    ScenarioConfig c = quick_scenario();
    c.max_ticks = 4000;
    c.attacker.enabled = true;
    const SimTrace t = run(c);
    const DetectorState ref = make_detector(c.detector.alpha, c.detector.delta,
                                            c.detector.df);
    bool saw_esc = false;
    for (const TraceRow& row : t.rows) {
        const bool esc = row.mode == "esc";
        saw_esc = saw_esc || esc;
        if (row.S > ref.threshold) CHECK(esc);
        if (row.S < ref.threshold) CHECK_FALSE(esc);
    }
    CHECK(saw_esc);  // the attacked agent must have switched at least once
}

TEST_CASE("run: trace CSV header matches the documented column order") {
    ScenarioConfig c = quick_scenario();
    c.max_ticks = 3;
    const SimTrace t = run(c);
    const std::string csv = trace_to_csv(t);
    CHECK(csv.rfind("tick,agent,x1,x2,x3,x4,xhat1,xhat2,xhat3,xhat4,"
                    "P11,P22,P33,P44,s,z,S,mode,u1,u2,margin,ax,ay\n", 0) == 0);
}

TEST_CASE("run: stop option ends shortly after the first true detection") {
    ScenarioConfig c = default_scenario();
    c.attacker.enabled = true;
    RunOptions opt;
    opt.stop_ticks_after_detection = 10;
    const SimTrace t = run(c, opt);
    long det = -1;
    for (const auto& a : t.agents)
        if (a.detection_tick >= 0) det = a.detection_tick;
    REQUIRE(det > 0);
    CHECK(t.ticks_run <= det + 10);
}

TEST_CASE("run: per-episode bookkeeping fields are coherent") {
    ScenarioConfig c = default_scenario();
    c.attacker.enabled = true;
    const SimTrace t = run(c);
    int attacked_agents = 0;
    for (const auto& a : t.agents) {
        if (a.detection_tick < 0) continue;
        ++attacked_agents;
        CHECK(a.first_entry_tick > 0);
        CHECK(a.detection_tick >= a.first_entry_tick);
        CHECK(a.k_esc > 0);
        CHECK_FALSE(std::isnan(a.margin_at_escape_check));
    }
    CHECK(attacked_agents == 1);  // only the middle path crosses the spoofed zone
}
