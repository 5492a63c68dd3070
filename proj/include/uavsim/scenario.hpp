#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "uavsim/coordination.hpp"
#include "uavsim/dynamics.hpp"
#include "uavsim/estimation.hpp"
#include "uavsim/linalg.hpp"
#include "uavsim/trajectory.hpp"

namespace uavsim {

struct ModelConfig {
    double dt = 0.1;
    double v_max = 5.0;
    double a_max = 2.0;
    bool operator==(const ModelConfig&) const = default;
};

struct NoiseConfig {
    bool enabled = true;
    double sigma_w = 0.1;   // filter-side process covariance scale (sigma_w * I)
    double sigma_g = 1.0;
    double sigma_i = 0.01;
    // Process noise injected into the true plant, shaped through B as an
    // acceleration disturbance of this standard deviation [m/s^2].
    double plant_accel_sigma = 0.1;
    bool operator==(const NoiseConfig&) const = default;
};

struct GainConfig {
    double k_e = 0.005;
    double k_s = 0.005;
    double rho = 1.0 / 1200.0;
    double k_p = 0.05;
    double k_i = 0.315;  // velocity-error (derivative) gain
    bool operator==(const GainConfig&) const = default;
};

struct CoordinationConfig {
    // Measured tracking error below this feeds Eq.-style coordination as zero;
    // absorbs estimator jitter and PD spin-up lag, leaves detour-scale errors.
    double error_deadband = 8.0;
    bool use_true_state = false;  // ablation switch
    bool operator==(const CoordinationConfig&) const = default;
};

struct AttackerConfig {
    bool enabled = false;
    Vec2 position{200.0, 200.0};
    double r_effect = 30.0;
    Vec2 d{10.0, 10.0};
    bool operator==(const AttackerConfig& o) const {
        return enabled == o.enabled && position == o.position && r_effect == o.r_effect &&
               d == o.d;
    }
};

struct DetectorConfig {
    double alpha = 0.01;
    double delta = 0.15;
    int df = 2;
    // "switched": the detector consumes the control-path estimator (IMU-only
    // while attacked). "fused": always the fused estimator.
    std::string source = "switched";
    bool operator==(const DetectorConfig&) const = default;
};

struct EscapeConfig {
    std::vector<double> zeta{10.0, 10.0, 2.0, 2.0};
    double alpha = 0.01;
    double beta = 1e4;
    int horizon_slack = 50;       // N = k_esc + slack
    double q_track = 1e-4;        // stage weight on the goal error
    double r_control = 3e-3;      // stage weight on control effort
    double clearance_margin = 7.0;  // planning-radius inflation [m]
    double aug_beta_scale = 1.0;  // robust-mode repulsion scale relative to beta
    bool operator==(const EscapeConfig&) const = default;
};

struct LocalizationConfig {
    bool enabled = false;
    double p0_db = 30.0;
    double d0 = 1.0;
    double sigma_v = 0.25;
    double process_noise = 1e-4;
    double init_cov = 400.0;
    int window = 3;
    Vec2 fallback_bias{0.0, 0.0};
    bool operator==(const LocalizationConfig& o) const {
        return enabled == o.enabled && p0_db == o.p0_db && d0 == o.d0 &&
               sigma_v == o.sigma_v && process_noise == o.process_noise &&
               init_cov == o.init_cov && window == o.window &&
               fallback_bias == o.fallback_bias;
    }
};

struct AgentConfig {
    Vec initial_state;
    BezierPath path;
    bool operator==(const AgentConfig& o) const {
        return initial_state == o.initial_state && path.p0 == o.path.p0 &&
               path.p1 == o.path.p1 && path.p2 == o.path.p2 && path.p3 == o.path.p3;
    }
};

struct ScenarioConfig {
    std::uint64_t seed = 1;
    long max_ticks = 20000;
    ModelConfig model;
    NoiseConfig noise;
    std::vector<AgentConfig> agents;
    std::vector<std::vector<int>> graph;  // adjacency; empty -> complete graph
    GainConfig gains;
    CoordinationConfig coordination;
    AttackerConfig attacker;
    DetectorConfig detector;
    EscapeConfig escape;
    LocalizationConfig localization;

    bool operator==(const ScenarioConfig&) const = default;

    AgentModel filter_model() const;   // sigma_w from noise.sigma_w
    AgentModel plant_model() const;    // sigma_w shaped through B
    CoordGraph coord_graph() const;
};

/// The paper-style three-agent mission over the Table 1 paths.
ScenarioConfig default_scenario();

struct TraceRow {
    long tick = 0;
    int agent = 0;
    Vec x;       // true state
    Vec x_hat;   // control-path estimate
    Vec p_diag;  // control-path covariance diagonal
    double s = 0.0, z = 0.0, S = 0.0;
    std::string mode = "robust";
    Vec2 u = Vec2::Zero();
    double margin = 0.0;  // NaN when no attacker is configured
    Vec2 att_est = Vec2::Zero();
    bool has_att_est = false;
};

struct RunEvent {
    long tick = 0;
    int agent = 0;
    std::string kind;
};

struct AgentReport {
    long first_entry_tick = -1;   // first tick truly inside the effective range
    long detection_tick = -1;     // k_a: first detection at/after range entry
    long k_esc = -1;
    double margin_at_escape_check = std::numeric_limits<double>::quiet_NaN();
    long arrival_tick = -1;
    long alarm_ticks = 0;         // detector-positive ticks outside the range
    double true_path_length = 0.0;
    Vec final_state;
};

struct SimTrace {
    std::vector<TraceRow> rows;
    std::vector<RunEvent> events;
    std::vector<AgentReport> agents;
    long ticks_run = 0;
    bool safety_violation = false;
    bool numerical_failure = false;

    long arrival_spread() const;  // -1 unless every agent arrived
};

struct RunOptions {
    std::vector<int> eval_order;          // empty -> agent index order
    long stop_ticks_after_detection = -1; // early stop for latency studies
};

/// u = k_p (target_pos - pos(est)) + k_i (target_vel - vel(est)), norm-clamped.
Vec2 pd_control(const Vec2& target_pos, const Vec2& target_vel, const EstimatorState& est,
                double k_p, double k_i, double a_max);

SimTrace run(const ScenarioConfig& config, const RunOptions& options = {});

ScenarioConfig load_config(const std::string& path);
ScenarioConfig parse_config(const std::string& text);
std::string config_to_json(const ScenarioConfig& config);
void save_config(const ScenarioConfig& config, const std::string& path);

std::string trace_to_csv(const SimTrace& trace);
void emit_trace(const SimTrace& trace, const std::string& path);
std::string summary_to_json(const SimTrace& trace, const ScenarioConfig& config);
void emit_summary(const SimTrace& trace, const ScenarioConfig& config, const std::string& path);

}  // namespace uavsim
