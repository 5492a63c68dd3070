#pragma once

#include "uavsim/linalg.hpp"
#include "uavsim/rng.hpp"

namespace uavsim {

/// Discrete-time linear agent plant with GPS and IMU (relative) outputs.
struct AgentModel {
    Mat A;        // n x n state transition
    Mat B;        // n x m input
    Mat Cg;       // m_G x n GPS output (absolute)
    Mat Ci;       // m_I x n IMU output (applied to the state difference)
    Mat sigma_w;  // n x n process noise covariance
    Mat sigma_g;  // m_G x m_G GPS noise covariance
    Mat sigma_i;  // m_I x m_I IMU noise covariance
    double v_max = 5.0;  // speed bound [m/s]
    double a_max = 2.0;  // acceleration bound [m/s^2]
    double dt = 0.1;     // tick duration [s]
    bool enforce_speed_limit = true;

    int n() const { return int(A.rows()); }
    int m() const { return int(B.cols()); }
    int mg() const { return int(Cg.rows()); }
    int mi() const { return int(Ci.rows()); }

    /// Throws ConfigError on dimension mismatch or non-PSD/PD covariances.
    void validate() const;
};

/// Planar double integrator discretized at dt, GPS = position, IMU = velocity
/// difference. Covariances sigma_w = 0.1 I, sigma_g = I, sigma_i = 0.01 I.
AgentModel default_model(double dt = 0.1);

struct TrueState {
    Vec x;
    long k = 0;
};

struct MeasurementPair {
    Vec y_g;
    Vec y_i;
    Vec d;  // injected spoof signal (zero when unattacked)
};

struct StepFlags {
    bool input_clamped = false;
    bool speed_clamped = false;
};

/// Scale v radially onto the closed ball of the given norm bound.
Vec clamp_norm(const Vec& v, double bound, bool* clamped = nullptr);

/// x_{k+1} = A x_k + B u_k + w_k. The input is clamped to a_max; the velocity
/// components are clamped to v_max when the model enforces the speed limit.
/// A null noise stream disables w.
TrueState step(const AgentModel& model, const TrueState& x, const Vec& u,
               GaussianStream* process_noise, StepFlags* flags = nullptr);

/// y_g = Cg x + d + v_g,  y_i = Ci (x - x_prev) + v_i.
MeasurementPair measure(const AgentModel& model, const TrueState& x,
                        const TrueState& x_prev, const Vec& d,
                        GaussianStream* gps_noise, GaussianStream* imu_noise);

/// Boundary-inclusive membership in the spoofing device's effective range.
bool in_spoof_range(const Vec2& attacker_pos, const TrueState& x, double r_effect);

}  // namespace uavsim
