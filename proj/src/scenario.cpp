#include "uavsim/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "uavsim/detection.hpp"
#include "uavsim/localization.hpp"
#include "uavsim/safety.hpp"

namespace uavsim {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

AgentModel ScenarioConfig::filter_model() const {
    AgentModel m = default_model(model.dt);
    m.v_max = model.v_max;
    m.a_max = model.a_max;
    m.sigma_w = noise.sigma_w * Mat::Identity(4, 4);
    m.sigma_g = noise.sigma_g * Mat::Identity(2, 2);
    m.sigma_i = noise.sigma_i * Mat::Identity(2, 2);
    m.validate();
    return m;
}

AgentModel ScenarioConfig::plant_model() const {
    AgentModel m = filter_model();
    const double s = noise.plant_accel_sigma * model.dt;
    Mat w = Mat::Zero(4, 4);
    w(2, 2) = s * s;
    w(3, 3) = s * s;
    m.sigma_w = w;
    return m;
}

CoordGraph ScenarioConfig::coord_graph() const {
    if (graph.empty()) return complete_graph(int(agents.size()));
    CoordGraph g;
    g.n_agents = int(agents.size());
    g.neighbors = graph;
    g.validate();
    return g;
}

ScenarioConfig default_scenario() {
    ScenarioConfig c;
    const auto paths = table1_paths();
    for (const auto& p : paths) {
        AgentConfig a;
        a.path = p;
        a.initial_state = Vec::Zero(4);
        a.initial_state.head<2>() = p.p0;
        c.agents.push_back(std::move(a));
    }
    return c;
}

long SimTrace::arrival_spread() const {
    long lo = std::numeric_limits<long>::max(), hi = -1;
    for (const auto& a : agents) {
        if (a.arrival_tick < 0) return -1;
        lo = std::min(lo, a.arrival_tick);
        hi = std::max(hi, a.arrival_tick);
    }
    return agents.empty() ? -1 : hi - lo;
}

Vec2 pd_control(const Vec2& target_pos, const Vec2& target_vel, const EstimatorState& est,
                double k_p, double k_i, double a_max) {
    const Vec2 u = k_p * (target_pos - position_of(est.x_hat)) +
                   k_i * (target_vel - velocity_of(est.x_hat));
    const double n = u.norm();
    return n <= a_max ? u : Vec2(u * (a_max / n));
}

// ---------------------------------------------------------------------------
// Orchestrator
// ---------------------------------------------------------------------------

namespace {

struct SignalSample {
    double power_db;
    Vec2 uav_pos;
};

struct AgentRuntime {
    TrueState x, x_prev;
    EstimatorState est1, est2;
    DetectorState det;
    Decision mode = Decision::trusted;
    Vec u_prev;
    GaussianStream process, gps, imu, signal;
    bool attacker_known = false;
    long k_a = -1;
    long k_esc = -1;
    bool margin_checked = false;
    std::deque<SignalSample> window;
    UkfState ukf;
    bool ukf_ready = false;
    std::vector<Vec2> last_rollout;
    long last_solve_tick = -10;

    AgentRuntime(std::uint64_t seed, std::uint32_t idx)
        : process(seed, idx, NoiseChannel::process),
          gps(seed, idx, NoiseChannel::gps),
          imu(seed, idx, NoiseChannel::imu),
          signal(seed, idx, NoiseChannel::signal) {}
};

Vec goal_state(const BezierPath& path, double s, double rate_per_tick, double dt) {
    Vec g(4);
    g.head<2>() = eval(path, s);
    g.segment<2>(2) = eval_tangent(path, s) * (rate_per_tick / dt);
    return g;
}

}  // namespace

SimTrace run(const ScenarioConfig& config, const RunOptions& options) {
    const int n_agents = int(config.agents.size());
    SimTrace trace;
    trace.agents.resize(n_agents);
    if (n_agents == 0) return trace;

    const AgentModel filter = config.filter_model();
    const AgentModel plant = config.plant_model();
    const StackedModel stacked = make_stacked(filter);
    const CoordGraph graph = config.coord_graph();
    const bool noise_on = config.noise.enabled;
    const double dt = config.model.dt;

    std::vector<int> order(n_agents);
    if (options.eval_order.empty()) {
        std::iota(order.begin(), order.end(), 0);
    } else {
        if (int(options.eval_order.size()) != n_agents)
            throw ConfigError("run: eval_order must be a permutation of the agents");
        order = options.eval_order;
    }

    CoordState coord;
    coord.s = Vec::Zero(n_agents);
    coord.k_e = config.gains.k_e;
    coord.k_s = config.gains.k_s;
    coord.rho = config.gains.rho;

    Vec zeta = Vec::Zero(int(config.escape.zeta.size()));
    for (size_t i = 0; i < config.escape.zeta.size(); ++i) zeta[int(i)] = config.escape.zeta[i];

    const SignalModel sig{config.localization.p0_db, config.localization.d0};
    const double r_plan = config.attacker.r_effect + config.escape.clearance_margin;

    std::vector<AgentRuntime> agents;
    agents.reserve(n_agents);
    for (int i = 0; i < n_agents; ++i) {
        AgentRuntime rt(config.seed, std::uint32_t(i));
        if (config.agents[i].initial_state.size() != 4)
            throw ConfigError("run: agent initial state must have 4 entries");
        rt.x = TrueState{config.agents[i].initial_state, 0};
        rt.x_prev = rt.x;
        rt.est1 = EstimatorState{rt.x.x, Mat::Identity(4, 4), EstimatorMode::fused};
        rt.est2 = rt.est1;
        rt.est2.mode = EstimatorMode::imu_only;
        rt.det = make_detector(config.detector.alpha, config.detector.delta,
                               config.detector.df);
        rt.u_prev = Vec::Zero(2);
        agents.push_back(std::move(rt));
    }

    const bool detector_fused = config.detector.source == "fused";
    if (!detector_fused && config.detector.source != "switched")
        throw ConfigError("run: detector.source must be \"switched\" or \"fused\"");

    long first_detection_tick = -1;
    std::vector<TraceRow> tick_rows(n_agents);

    for (long k = 1; k <= config.max_ticks; ++k) {
        // (1) Coordination from the previous round's snapshots.
        Vec z(n_agents);
        for (int i = 0; i < n_agents; ++i) {
            const AgentRuntime& rt = agents[i];
            const EstimatorState& ctrl = rt.mode == Decision::attacked ? rt.est2 : rt.est1;
            const Vec2 ref = config.coordination.use_true_state ? position_of(rt.x.x)
                                                                : position_of(ctrl.x_hat);
            const double raw = (eval(config.agents[i].path, coord.s[i]) - ref).norm();
            const double err = std::max(raw - config.coordination.error_deadband, 0.0);
            z[i] = coord_input(i, coord, graph, err, rt.mode == Decision::attacked);
        }
        coord = advance(coord, z);
        for (int i = 0; i < n_agents; ++i)
            if (trace.agents[i].arrival_tick < 0 && coord.s[i] >= 1.0)
                trace.agents[i].arrival_tick = k;

        for (int i : order) {
            AgentRuntime& rt = agents[i];
            AgentReport& rep = trace.agents[i];

            // (2) Measurement with spoof injection inside the effective range.
            const bool in_range = config.attacker.enabled &&
                                  in_spoof_range(config.attacker.position, rt.x,
                                                 config.attacker.r_effect);
            if (in_range && rep.first_entry_tick < 0) rep.first_entry_tick = k;
            Vec d = Vec::Zero(2);
            if (in_range) d = Vec(config.attacker.d);
            const MeasurementPair y =
                measure(plant, rt.x, rt.x_prev, d, noise_on ? &rt.gps : nullptr,
                        noise_on ? &rt.imu : nullptr);

            // (3) Detector first (it needs the previous estimates), then Est. 1.
            const EstimatorState& det_src =
                (!detector_fused && rt.mode == Decision::attacked) ? rt.est2 : rt.est1;
            const Vec d_hat = estimate_attack(y.y_g, det_src.x_hat, rt.u_prev, filter);
            const Mat P_d = innovation_cov(filter, det_src.P);
            const CusumResult cres = cusum_step(rt.det, d_hat, P_d);
            rt.det = cres.det;

            const EstimatorState est1_prev = rt.est1;
            rt.est1 = update(rt.est1, filter, stacked, rt.u_prev, y, /*gps_trusted=*/true);

            // (4) Mode switch; Est. 2 runs while attacked, seeded per episode
            // from the last pre-attack fused state.
            const Decision prev_mode = rt.mode;
            rt.mode = cres.decision;
            if (rt.mode == Decision::attacked) {
                if (prev_mode == Decision::trusted) rt.est2 = {est1_prev.x_hat, est1_prev.P,
                                                               EstimatorMode::imu_only};
                rt.est2 = update(rt.est2, filter, stacked, rt.u_prev, y, /*gps_trusted=*/false);
                if (!in_range) ++rep.alarm_ticks;
                if (in_range && !rt.attacker_known) {
                    rt.attacker_known = true;
                    rep.detection_tick = k;
                    rt.k_a = k;
                    EscapeQuery q;
                    q.zeta = zeta;
                    q.alpha = config.escape.alpha;
                    q.P_at_attack = est1_prev.P;
                    rt.k_esc = escape_time(filter, q);
                    rep.k_esc = rt.k_esc;
                    if (first_detection_tick < 0) first_detection_tick = k;
                }
            }

            const EstimatorState& ctrl = rt.mode == Decision::attacked ? rt.est2 : rt.est1;

            // Attacker estimate: sliding-window UKF when enabled, otherwise the
            // configured position plus bias once the agent has been attacked.
            Vec2 att_est = config.attacker.position + config.localization.fallback_bias;
            if (config.localization.enabled && rt.attacker_known) {
                if (in_range) {
                    const double power =
                        signal_strength(sig, Vec(rt.x.x), position_of(rt.x.x)) +
                        (noise_on ? std::sqrt(config.localization.sigma_v) * rt.signal.normal()
                                  : 0.0);
                    rt.window.push_front({power, position_of(ctrl.x_hat)});
                    while (int(rt.window.size()) > config.localization.window)
                        rt.window.pop_back();
                    if (!rt.ukf_ready && int(rt.window.size()) == config.localization.window) {
                        rt.ukf.x_hat = Vec(position_of(ctrl.x_hat));
                        rt.ukf.P = config.localization.init_cov * Mat::Identity(2, 2);
                        rt.ukf.A_loc = Mat::Identity(2, 2);
                        rt.ukf.sigma_wp =
                            config.localization.process_noise * Mat::Identity(2, 2);
                        rt.ukf.sigma_v = config.localization.sigma_v;
                        rt.ukf.window = config.localization.window;
                        rt.ukf_ready = true;
                    }
                }
                if (rt.ukf_ready && int(rt.window.size()) == config.localization.window) {
                    rt.ukf = ukf_predict(rt.ukf);
                    Vec yw(config.localization.window);
                    std::vector<Vec2> pw(rt.window.size());
                    for (size_t m = 0; m < rt.window.size(); ++m) {
                        yw[int(m)] = rt.window[m].power_db;
                        pw[m] = rt.window[m].uav_pos;
                    }
                    rt.ukf = ukf_update(rt.ukf, yw, pw, sig);
                }
                if (rt.ukf_ready) att_est = position_of(rt.ukf.x_hat);
            }

            // (5) Control: receding-horizon ESC while attacked, PD otherwise.
            const Vec2 target_pos = eval(config.agents[i].path, coord.s[i]);
            const Vec2 target_vel = eval_tangent(config.agents[i].path, coord.s[i]) *
                                    (z[i] / dt);
            Vec2 u;
            if (rt.mode == Decision::attacked) {
                EscProblem pb;
                pb.horizon = (rt.k_esc >= 0 ? int(rt.k_esc) : 0) + config.escape.horizon_slack;
                pb.Q = config.escape.q_track * Mat::Identity(4, 4);
                pb.R = config.escape.r_control * Mat::Identity(2, 2);
                pb.beta = rt.attacker_known ? config.escape.beta : 0.0;
                pb.r_effect = r_plan;
                pb.attacker = att_est;
                pb.activation_index =
                    rt.k_a >= 0 ? std::max<long>(rt.k_a + rt.k_esc - k, 0) : 0;
                pb.v_max = config.model.v_max;
                pb.a_max = config.model.a_max;
                const double s_now = coord.s[i];
                const BezierPath& path = config.agents[i].path;
                const double rho = config.gains.rho;
                pb.goal = [&path, s_now, rho, dt](int j) {
                    return goal_state(path, std::min(s_now + j * rho, 1.0), rho, dt);
                };
                std::vector<Vec2>* warm = nullptr;
                if (rt.last_solve_tick == k - 1 &&
                    int(rt.last_rollout.size()) == pb.horizon) {
                    rt.last_rollout.erase(rt.last_rollout.begin());
                    rt.last_rollout.push_back(Vec2::Zero());
                    warm = &rt.last_rollout;
                }
                const EscSolution sol = solve_esc(pb, ctrl, filter, warm);
                u = sol.u.empty() ? Vec2::Zero() : sol.u.front();
                rt.last_rollout = sol.u;
                rt.last_solve_tick = k;
                if (sol.degraded) trace.events.push_back({k, i, "degraded_solve"});
            } else {
                u = pd_control(target_pos, target_vel, ctrl, config.gains.k_p,
                               config.gains.k_i, config.model.a_max);
                if (rt.attacker_known) {
                    u -= config.escape.aug_beta_scale *
                         repulsive_gradient(position_of(ctrl.x_hat), att_est, r_plan,
                                            config.escape.beta);
                    const double nu = u.norm();
                    if (nu > config.model.a_max) u *= config.model.a_max / nu;
                }
            }

            // Escape-guarantee bookkeeping against the true attacker geometry.
            double margin = std::numeric_limits<double>::quiet_NaN();
            if (config.attacker.enabled)
                margin = (position_of(rt.x.x) - config.attacker.position).norm() -
                         config.attacker.r_effect;
            if (rt.k_a >= 0 && !rt.margin_checked && k == rt.k_a + rt.k_esc) {
                rt.margin_checked = true;
                rep.margin_at_escape_check = margin;
                if (!(margin > 0.0)) trace.safety_violation = true;
            }

            TraceRow row;
            row.tick = k;
            row.agent = i;
            row.x = rt.x.x;
            row.x_hat = ctrl.x_hat;
            row.p_diag = ctrl.P.diagonal();
            row.s = coord.s[i];
            row.z = z[i];
            row.S = rt.det.S;
            row.mode = rt.mode == Decision::attacked ? "esc" : "robust";
            row.u = u;
            row.margin = margin;
            row.has_att_est = rt.attacker_known;
            row.att_est = rt.attacker_known ? att_est : Vec2::Zero();
            tick_rows[i] = std::move(row);

            // (6) Plant step with the applied input.
            StepFlags flags;
            rt.x_prev = rt.x;
            rt.x = step(plant, rt.x, Vec(u), noise_on ? &rt.process : nullptr, &flags);
            if (flags.input_clamped) trace.events.push_back({k, i, "input_clamped"});
            if (flags.speed_clamped) trace.events.push_back({k, i, "speed_clamped"});
            rep.true_path_length += (position_of(rt.x.x) - position_of(rt.x_prev.x)).norm();
            rt.u_prev = Vec(u);
        }

        for (int i = 0; i < n_agents; ++i) trace.rows.push_back(tick_rows[i]);
        trace.ticks_run = k;

        const bool all_arrived = std::all_of(
            trace.agents.begin(), trace.agents.end(),
            [](const AgentReport& a) { return a.arrival_tick >= 0; });
        if (all_arrived) break;
        if (options.stop_ticks_after_detection >= 0 && first_detection_tick >= 0 &&
            k >= first_detection_tick + options.stop_ticks_after_detection)
            break;
    }

    for (int i = 0; i < n_agents; ++i) trace.agents[i].final_state = agents[i].x.x;
    return trace;
}

// ---------------------------------------------------------------------------
// Config I/O
// ---------------------------------------------------------------------------

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw ConfigError("config error at '" + path + "': " + what);
}

double num(const json& j, const std::string& path) {
    if (!j.is_number()) fail(path, "expected a number");
    return j.get<double>();
}

Vec2 vec2(const json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 2) fail(path, "expected an array of 2 numbers");
    return Vec2(num(j[0], path + "[0]"), num(j[1], path + "[1]"));
}

template <typename T, typename Fn>
void maybe(const json& j, const std::string& key, const std::string& path, T& out, Fn fn) {
    if (j.contains(key)) out = fn(j.at(key), path + "." + key);
}

void parse_section(const json& j, const std::string& path, ScenarioConfig& c) {
    maybe(j, "seed", path, c.seed, [](const json& v, const std::string& p) {
        if (!v.is_number_unsigned() && !v.is_number_integer()) fail(p, "expected an integer");
        return v.get<std::uint64_t>();
    });
    maybe(j, "max_ticks", path, c.max_ticks,
          [](const json& v, const std::string& p) { return long(num(v, p)); });
    if (j.contains("model")) {
        const json& m = j.at("model");
        const std::string mp = path + ".model";
        maybe(m, "dt", mp, c.model.dt, num);
        maybe(m, "v_max", mp, c.model.v_max, num);
        maybe(m, "a_max", mp, c.model.a_max, num);
    }
    if (j.contains("noise")) {
        const json& m = j.at("noise");
        const std::string mp = path + ".noise";
        maybe(m, "enabled", mp, c.noise.enabled, [](const json& v, const std::string& p) {
            if (!v.is_boolean()) fail(p, "expected a boolean");
            return v.get<bool>();
        });
        maybe(m, "sigma_w", mp, c.noise.sigma_w, num);
        maybe(m, "sigma_g", mp, c.noise.sigma_g, num);
        maybe(m, "sigma_i", mp, c.noise.sigma_i, num);
        maybe(m, "plant_accel_sigma", mp, c.noise.plant_accel_sigma, num);
    }
    if (j.contains("gains")) {
        const json& m = j.at("gains");
        const std::string mp = path + ".gains";
        maybe(m, "k_e", mp, c.gains.k_e, num);
        maybe(m, "k_s", mp, c.gains.k_s, num);
        maybe(m, "rho", mp, c.gains.rho, num);
        maybe(m, "k_p", mp, c.gains.k_p, num);
        maybe(m, "k_i", mp, c.gains.k_i, num);
    }
    if (j.contains("coordination")) {
        const json& m = j.at("coordination");
        const std::string mp = path + ".coordination";
        maybe(m, "error_deadband", mp, c.coordination.error_deadband, num);
        maybe(m, "use_true_state", mp, c.coordination.use_true_state,
              [](const json& v, const std::string& p) {
                  if (!v.is_boolean()) fail(p, "expected a boolean");
                  return v.get<bool>();
              });
    }
    if (j.contains("attacker")) {
        const json& m = j.at("attacker");
        const std::string mp = path + ".attacker";
        maybe(m, "enabled", mp, c.attacker.enabled, [](const json& v, const std::string& p) {
            if (!v.is_boolean()) fail(p, "expected a boolean");
            return v.get<bool>();
        });
        maybe(m, "position", mp, c.attacker.position, vec2);
        maybe(m, "r_effect", mp, c.attacker.r_effect, num);
        maybe(m, "d", mp, c.attacker.d, vec2);
    }
    if (j.contains("detector")) {
        const json& m = j.at("detector");
        const std::string mp = path + ".detector";
        maybe(m, "alpha", mp, c.detector.alpha, num);
        maybe(m, "delta", mp, c.detector.delta, num);
        maybe(m, "df", mp, c.detector.df,
              [](const json& v, const std::string& p) { return int(num(v, p)); });
        maybe(m, "source", mp, c.detector.source, [](const json& v, const std::string& p) {
            if (!v.is_string()) fail(p, "expected a string");
            return v.get<std::string>();
        });
    }
    if (j.contains("escape")) {
        const json& m = j.at("escape");
        const std::string mp = path + ".escape";
        if (m.contains("zeta")) {
            const json& v = m.at("zeta");
            if (!v.is_array() || v.empty()) fail(mp + ".zeta", "expected a nonempty array");
            c.escape.zeta.clear();
            for (size_t i = 0; i < v.size(); ++i)
                c.escape.zeta.push_back(num(v[i], mp + ".zeta[" + std::to_string(i) + "]"));
        }
        maybe(m, "alpha", mp, c.escape.alpha, num);
        maybe(m, "beta", mp, c.escape.beta, num);
        maybe(m, "horizon_slack", mp, c.escape.horizon_slack,
              [](const json& v, const std::string& p) { return int(num(v, p)); });
        maybe(m, "q_track", mp, c.escape.q_track, num);
        maybe(m, "r_control", mp, c.escape.r_control, num);
        maybe(m, "clearance_margin", mp, c.escape.clearance_margin, num);
        maybe(m, "aug_beta_scale", mp, c.escape.aug_beta_scale, num);
    }
    if (j.contains("localization")) {
        const json& m = j.at("localization");
        const std::string mp = path + ".localization";
        maybe(m, "enabled", mp, c.localization.enabled,
              [](const json& v, const std::string& p) {
                  if (!v.is_boolean()) fail(p, "expected a boolean");
                  return v.get<bool>();
              });
        maybe(m, "p0_db", mp, c.localization.p0_db, num);
        maybe(m, "d0", mp, c.localization.d0, num);
        maybe(m, "sigma_v", mp, c.localization.sigma_v, num);
        maybe(m, "process_noise", mp, c.localization.process_noise, num);
        maybe(m, "init_cov", mp, c.localization.init_cov, num);
        maybe(m, "window", mp, c.localization.window,
              [](const json& v, const std::string& p) { return int(num(v, p)); });
        maybe(m, "fallback_bias", mp, c.localization.fallback_bias, vec2);
    }
    if (j.contains("graph")) {
        const json& g = j.at("graph");
        if (!g.is_array()) fail(path + ".graph", "expected an adjacency list");
        c.graph.clear();
        for (size_t i = 0; i < g.size(); ++i) {
            const json& row = g[i];
            const std::string rp = path + ".graph[" + std::to_string(i) + "]";
            if (!row.is_array()) fail(rp, "expected an array of neighbor indices");
            std::vector<int> nb;
            for (size_t q = 0; q < row.size(); ++q)
                nb.push_back(int(num(row[q], rp + "[" + std::to_string(q) + "]")));
            c.graph.push_back(std::move(nb));
        }
    }
}

}  // namespace

ScenarioConfig parse_config(const std::string& text) {
    std::string trimmed = text;
    trimmed.erase(0, trimmed.find_first_not_of(" \t\r\n"));
    if (trimmed.empty())
        throw ConfigError(
            "config error: empty config; missing required fields: agents "
            "(list of {initial_state, control_points})");

    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config error: invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config error at '$': expected an object");
    if (!j.contains("agents"))
        throw ConfigError("config error at '$.agents': required field missing");

    ScenarioConfig c;
    c.agents.clear();
    const json& ags = j.at("agents");
    if (!ags.is_array()) fail("$.agents", "expected an array");
    for (size_t i = 0; i < ags.size(); ++i) {
        const std::string ap = "$.agents[" + std::to_string(i) + "]";
        const json& a = ags[i];
        if (!a.is_object()) fail(ap, "expected an object");
        if (!a.contains("initial_state")) fail(ap + ".initial_state", "required field missing");
        if (!a.contains("control_points")) fail(ap + ".control_points", "required field missing");
        AgentConfig ac;
        const json& st = a.at("initial_state");
        if (!st.is_array() || st.size() != 4)
            fail(ap + ".initial_state", "expected an array of 4 numbers");
        ac.initial_state = Vec(4);
        for (int q = 0; q < 4; ++q)
            ac.initial_state[q] = num(st[size_t(q)], ap + ".initial_state");
        const json& cp = a.at("control_points");
        if (!cp.is_array() || cp.size() != 4)
            fail(ap + ".control_points", "expected 4 control points");
        ac.path.p0 = vec2(cp[0], ap + ".control_points[0]");
        ac.path.p1 = vec2(cp[1], ap + ".control_points[1]");
        ac.path.p2 = vec2(cp[2], ap + ".control_points[2]");
        ac.path.p3 = vec2(cp[3], ap + ".control_points[3]");
        c.agents.push_back(std::move(ac));
    }
    parse_section(j, "$", c);

    if (!(c.detector.delta > 0 && c.detector.delta < 1))
        fail("$.detector.delta", "must lie in (0,1)");
    if (!(c.detector.alpha > 0 && c.detector.alpha < 1))
        fail("$.detector.alpha", "must lie in (0,1)");
    if (c.attacker.r_effect < 0) fail("$.attacker.r_effect", "must be nonnegative");
    if (!c.graph.empty() && c.graph.size() != c.agents.size())
        fail("$.graph", "adjacency list size must equal the number of agents");
    return c;
}

ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config error: cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string config_to_json(const ScenarioConfig& c) {
    ordered_json j;
    j["seed"] = c.seed;
    j["max_ticks"] = c.max_ticks;
    j["model"] = {{"dt", c.model.dt}, {"v_max", c.model.v_max}, {"a_max", c.model.a_max}};
    j["noise"] = {{"enabled", c.noise.enabled},
                  {"sigma_w", c.noise.sigma_w},
                  {"sigma_g", c.noise.sigma_g},
                  {"sigma_i", c.noise.sigma_i},
                  {"plant_accel_sigma", c.noise.plant_accel_sigma}};
    j["agents"] = ordered_json::array();
    for (const auto& a : c.agents) {
        ordered_json aj;
        aj["initial_state"] = {a.initial_state[0], a.initial_state[1], a.initial_state[2],
                               a.initial_state[3]};
        aj["control_points"] = {{a.path.p0[0], a.path.p0[1]},
                                {a.path.p1[0], a.path.p1[1]},
                                {a.path.p2[0], a.path.p2[1]},
                                {a.path.p3[0], a.path.p3[1]}};
        j["agents"].push_back(aj);
    }
    if (!c.graph.empty()) j["graph"] = c.graph;
    j["gains"] = {{"k_e", c.gains.k_e},
                  {"k_s", c.gains.k_s},
                  {"rho", c.gains.rho},
                  {"k_p", c.gains.k_p},
                  {"k_i", c.gains.k_i}};
    j["coordination"] = {{"error_deadband", c.coordination.error_deadband},
                         {"use_true_state", c.coordination.use_true_state}};
    j["attacker"] = {{"enabled", c.attacker.enabled},
                     {"position", {c.attacker.position[0], c.attacker.position[1]}},
                     {"r_effect", c.attacker.r_effect},
                     {"d", {c.attacker.d[0], c.attacker.d[1]}}};
    j["detector"] = {{"alpha", c.detector.alpha},
                     {"delta", c.detector.delta},
                     {"df", c.detector.df},
                     {"source", c.detector.source}};
    j["escape"] = {{"zeta", c.escape.zeta},
                   {"alpha", c.escape.alpha},
                   {"beta", c.escape.beta},
                   {"horizon_slack", c.escape.horizon_slack},
                   {"q_track", c.escape.q_track},
                   {"r_control", c.escape.r_control},
                   {"clearance_margin", c.escape.clearance_margin},
                   {"aug_beta_scale", c.escape.aug_beta_scale}};
    j["localization"] = {{"enabled", c.localization.enabled},
                         {"p0_db", c.localization.p0_db},
                         {"d0", c.localization.d0},
                         {"sigma_v", c.localization.sigma_v},
                         {"process_noise", c.localization.process_noise},
                         {"init_cov", c.localization.init_cov},
                         {"window", c.localization.window},
                         {"fallback_bias",
                          {c.localization.fallback_bias[0], c.localization.fallback_bias[1]}}};
    return j.dump(2) + "\n";
}

namespace {

void atomic_write(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("cannot open '" + tmp + "' for writing");
        out << content;
        if (!out) throw NumericalError("write failed for '" + tmp + "'");
    }
    std::filesystem::rename(tmp, path);
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

}  // namespace

void save_config(const ScenarioConfig& config, const std::string& path) {
    atomic_write(path, config_to_json(config));
}

std::string trace_to_csv(const SimTrace& trace) {
    std::string out =
        "tick,agent,x1,x2,x3,x4,xhat1,xhat2,xhat3,xhat4,P11,P22,P33,P44,"
        "s,z,S,mode,u1,u2,margin,ax,ay\n";
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (const TraceRow& r : trace.rows) {
        out += std::to_string(r.tick) + ',' + std::to_string(r.agent);
        for (int q = 0; q < 4; ++q) out += ',' + fmt(r.x[q]);
        for (int q = 0; q < 4; ++q) out += ',' + fmt(r.x_hat[q]);
        for (int q = 0; q < 4; ++q) out += ',' + fmt(r.p_diag[q]);
        out += ',' + fmt(r.s) + ',' + fmt(r.z) + ',' + fmt(r.S);
        out += ',' + r.mode;
        out += ',' + fmt(r.u[0]) + ',' + fmt(r.u[1]);
        out += ',' + fmt(r.margin);
        out += ',' + fmt(r.has_att_est ? r.att_est[0] : nan);
        out += ',' + fmt(r.has_att_est ? r.att_est[1] : nan);
        out += '\n';
    }
    return out;
}

void emit_trace(const SimTrace& trace, const std::string& path) {
    atomic_write(path, trace_to_csv(trace));
}

std::string summary_to_json(const SimTrace& trace, const ScenarioConfig& config) {
    ordered_json j;
    j["ticks_run"] = trace.ticks_run;
    j["arrival_spread"] = trace.arrival_spread();
    j["safety_violation"] = trace.safety_violation;
    ordered_json agents = ordered_json::array();
    for (const auto& a : trace.agents) {
        ordered_json aj;
        aj["arrival_tick"] = a.arrival_tick;
        aj["first_entry_tick"] = a.first_entry_tick;
        aj["detection_tick"] = a.detection_tick;
        aj["k_esc"] = a.k_esc;
        if (std::isnan(a.margin_at_escape_check))
            aj["margin_at_escape_check"] = nullptr;
        else
            aj["margin_at_escape_check"] = a.margin_at_escape_check;
        aj["alarm_ticks"] = a.alarm_ticks;
        aj["true_path_length"] = a.true_path_length;
        agents.push_back(aj);
    }
    j["agents"] = agents;
    ordered_json events = ordered_json::array();
    for (const auto& e : trace.events)
        events.push_back({{"tick", e.tick}, {"agent", e.agent}, {"kind", e.kind}});
    j["events"] = events;
    j["config"] = json::parse(config_to_json(config));
    return j.dump(2) + "\n";
}

void emit_summary(const SimTrace& trace, const ScenarioConfig& config,
                  const std::string& path) {
    atomic_write(path, summary_to_json(trace, config));
}

}  // namespace uavsim
